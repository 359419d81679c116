"""Forward image warping: reproject a rendered frame to a new camera.

Each source pixel with finite depth is reconstructed to its world point,
projected into the destination camera and splatted to the nearest pixel; the
nearest-depth writer wins.  Destination pixels with no writer are holes shown
as background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .render import Camera, FrameSlot


@dataclass(frozen=True)
class WarpResult:
    image: np.ndarray  # (H, W, 4) uint8; background where mask is False
    mask: np.ndarray  # (H, W) bool, True where a source pixel landed
    generation: int
    passes: int


def empty_warp(camera: Camera, generation=-1) -> WarpResult:
    h, w = camera.height, camera.width
    return WarpResult(
        image=np.zeros((h, w, 4), dtype=np.uint8),
        mask=np.zeros((h, w), dtype=bool),
        generation=generation,
        passes=0,
    )


def warp_frame(src: FrameSlot, dst_camera: Camera, display=None) -> WarpResult:
    """Splat the source frame's display pixels into the destination camera.

    `display` overrides the source display image (e.g. one with a pathline
    overlay composited in).
    """
    if src.passes < 1:
        return empty_warp(dst_camera, src.generation)
    if display is None:
        display = src.display()
    finite = np.isfinite(src.depth)
    out = empty_warp(dst_camera, src.generation)
    if not finite.any():
        return WarpResult(image=out.image, mask=out.mask, generation=src.generation, passes=src.passes)

    dirs = src.camera.ray_dirs()[finite]
    eye = np.asarray(src.camera.eye, dtype=np.float64)
    world = eye + src.depth[finite][:, None] * dirs
    colors = display[finite]

    px, py, dist, in_front = dst_camera.project(world)
    ix = np.rint(px).astype(np.int64)
    iy = np.rint(py).astype(np.int64)
    ok = in_front & (ix >= 0) & (ix < dst_camera.width) & (iy >= 0) & (iy < dst_camera.height)
    ix, iy, dist, colors = ix[ok], iy[ok], dist[ok], colors[ok]

    # Write in far-to-near order so the nearest-depth splat lands last.
    order = np.argsort(-dist, kind="stable")
    ix, iy, colors = ix[order], iy[order], colors[order]

    image = out.image
    mask = out.mask
    image[iy, ix] = colors
    mask[iy, ix] = True
    return WarpResult(image=image, mask=mask, generation=src.generation, passes=src.passes)
