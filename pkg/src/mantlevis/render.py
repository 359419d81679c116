"""CPU ray-marched volume rendering with brush rejection and pathline overlay.

Rendering is progressive: each pass marches every pixel with a deterministic
per-(pixel, pass) step jitter and accumulates into float32 buffers.  Samples
whose brushed variables fall outside their intervals are discarded and do not
contribute to the ray's color; opacity uses exponential extinction with a
per-km scale so images converge under step refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .brush import BrushSet
from .grid import ShellGrid, VolumeTimeStep
from .preprocess import LodPyramid, UnknownVariable

EARLY_TERMINATION_ALPHA = 0.995
DEPTH_ALPHA = 0.5

SPATIAL_CODES = {"x": -1, "y": -2, "z": -3, "depth": -4}

PATHLINE_START_COLOR = np.array([0.0, 0.0, 1.0])  # age 0: blue
PATHLINE_END_COLOR = np.array([1.0, 0.0, 0.0])  # age 1: red


class GenerationMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear map from a scalar variable to RGBA, clamped outside
    the control-point range; opacity_scale is extinction per km."""

    variable: str
    points: tuple  # ((value, (r, g, b, a)), ...) sorted, strictly increasing
    opacity_scale: float = 0.004

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("need at least 2 control points")
        xs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("control point values must be strictly increasing")
        for _, rgba in self.points:
            if len(rgba) != 4 or any(not (0.0 <= c <= 1.0) for c in rgba):
                raise ValueError("RGBA components must lie in [0, 1]")

    def arrays(self):
        xs = np.array([p[0] for p in self.points], dtype=np.float64)
        rgba = np.array([p[1] for p in self.points], dtype=np.float64)
        return xs, rgba

    def lookup(self, values):
        xs, rgba = self.arrays()
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        out = np.empty(values.shape + (4,))
        for c in range(4):
            out[..., c] = np.interp(values, xs, rgba[:, c])
        return out

    def to_json_obj(self):
        return {
            "variable": self.variable,
            "points": [[v, list(rgba)] for v, rgba in self.points],
            "opacity_scale": self.opacity_scale,
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            variable=obj["variable"],
            points=tuple((float(v), tuple(rgba)) for v, rgba in obj["points"]),
            opacity_scale=float(obj.get("opacity_scale", 0.004)),
        )


def diverging_tf(variable, v_min, v_max, opacity_scale=0.004, alpha=0.8):
    """Default transfer function: blue-white-red when the range straddles 0,
    otherwise a gray-to-white ramp."""
    if v_min < 0.0 < v_max:
        points = (
            (v_min, (0.1, 0.2, 1.0, alpha)),
            (0.0, (1.0, 1.0, 1.0, alpha)),
            (v_max, (1.0, 0.15, 0.1, alpha)),
        )
    else:
        if v_max <= v_min:
            v_max = v_min + 1.0
        points = ((v_min, (0.2, 0.2, 0.25, alpha)), (v_max, (1.0, 1.0, 1.0, alpha)))
    return TransferFunction(variable=variable, points=points, opacity_scale=opacity_scale)


@dataclass(frozen=True)
class Camera:
    eye: tuple  # km
    look_at: tuple
    up: tuple = (0.0, 0.0, 1.0)
    fov_deg: float = 40.0
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if tuple(self.eye) == tuple(self.look_at):
            raise ValueError("eye must differ from look_at")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must lie in (0, 180)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")

    def basis(self):
        eye = np.asarray(self.eye, dtype=np.float64)
        fwd = np.asarray(self.look_at, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return eye, fwd, right, up

    def ray_dirs(self):
        """Normalized ray directions through pixel centers, (H, W, 3)."""
        eye, fwd, right, up = self.basis()
        tan_half = math.tan(math.radians(self.fov_deg) / 2.0)
        aspect = self.width / self.height
        xs = (2.0 * (np.arange(self.width) + 0.5) / self.width - 1.0) * tan_half * aspect
        ys = (1.0 - 2.0 * (np.arange(self.height) + 0.5) / self.height) * tan_half
        d = fwd[None, None, :] + xs[None, :, None] * right[None, None, :] + ys[:, None, None] * up[None, None, :]
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return d

    def project(self, points):
        """Project world points to pixel coordinates.

        Returns (px, py, dist, in_front): px/py are float pixel-center
        coordinates, dist the camera-space distance.
        """
        eye, fwd, right, up = self.basis()
        v = np.asarray(points, dtype=np.float64) - eye
        z = v @ fwd
        x = v @ right
        y = v @ up
        tan_half = math.tan(math.radians(self.fov_deg) / 2.0)
        aspect = self.width / self.height
        in_front = z > 1e-12
        zs = np.where(in_front, z, 1.0)
        px = ((x / zs) / (tan_half * aspect) + 1.0) * 0.5 * self.width - 0.5
        py = (1.0 - (y / zs) / tan_half) * 0.5 * self.height - 0.5
        dist = np.linalg.norm(v, axis=-1)
        return px, py, dist, in_front

    def to_json_obj(self):
        return {
            "eye": list(self.eye),
            "look_at": list(self.look_at),
            "up": list(self.up),
            "fov_deg": self.fov_deg,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            eye=tuple(obj["eye"]),
            look_at=tuple(obj["look_at"]),
            up=tuple(obj.get("up", (0.0, 0.0, 1.0))),
            fov_deg=float(obj.get("fov_deg", 40.0)),
            width=int(obj.get("width", 256)),
            height=int(obj.get("height", 256)),
        )


def default_camera(grid: ShellGrid, width=256, height=256):
    return Camera(
        eye=(2.6 * grid.r_outer, 0.0, 0.8 * grid.r_outer),
        look_at=(0.0, 0.0, 0.0),
        width=width,
        height=height,
    )


@dataclass(frozen=True)
class RenderState:
    """Everything one frame depends on; generation changes with any part."""

    step_index: int
    brush: BrushSet
    transfer: TransferFunction
    camera: Camera
    generation: int = 0
    pass_budget: int = 8
    step_km: float | None = None  # None: half the finest radial node spacing

    def content_key(self):
        return (
            self.step_index,
            tuple(sorted(self.brush.entries.items())),
            self.transfer,
            self.camera,
            self.step_km,
            self.pass_budget,
        )


@dataclass
class FrameSlot:
    """A progressively accumulated frame plus its 0.5-alpha depth proxy."""

    camera: Camera
    generation: int
    accum: np.ndarray  # (H, W, 4) float32 sum over passes
    depth: np.ndarray  # (H, W) float32, +inf where alpha never crossed 0.5
    passes: int = 0

    @classmethod
    def fresh(cls, camera: Camera, generation: int):
        h, w = camera.height, camera.width
        return cls(
            camera=camera,
            generation=generation,
            accum=np.zeros((h, w, 4), dtype=np.float32),
            depth=np.full((h, w), np.inf, dtype=np.float32),
        )

    def display(self):
        """8-bit RGBA display copy: accumulation / passes, clamped to [0, 1]."""
        if self.passes == 0:
            return np.zeros(self.accum.shape, dtype=np.uint8)
        img = np.clip(self.accum / np.float32(self.passes), 0.0, 1.0)
        return np.rint(img * 255.0).astype(np.uint8)

    def copy(self):
        return FrameSlot(
            camera=self.camera,
            generation=self.generation,
            accum=self.accum.copy(),
            depth=self.depth.copy(),
            passes=self.passes,
        )


def intersect_shell(origin, direction, r_inner, r_outer):
    """Sorted [t0, t1] intervals (t >= 0) where the ray is inside the shell."""
    from ._kernels.fallback import shell_segments

    t0, t1 = shell_segments(
        np.asarray(origin, dtype=np.float64)[None, :],
        np.asarray(direction, dtype=np.float64)[None, :],
        float(r_inner),
        float(r_outer),
    )
    return [(float(a), float(b)) for a, b in zip(t0[0], t1[0]) if b > a]


def pass_jitter(n_pixels, pass_index):
    """Deterministic per-pixel jitter in [0, 1) from a counter-based hash."""
    x = np.arange(n_pixels, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x * np.uint64(0x9E3779B97F4A7C15) + np.uint64(pass_index + 1) * np.uint64(
            0xBF58476D1CE4E5B9
        )
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def default_step_km(grid: ShellGrid):
    return 0.5 * grid.dr


def _resolve_fields(volume: VolumeTimeStep, brush: BrushSet, color_variable: str):
    names = volume.variable_names()
    index = {n: i for i, n in enumerate(names)}
    if color_variable not in index:
        raise UnknownVariable(color_variable)
    codes, los, his = [], [], []
    for name in brush.restricted_variables():
        lo, hi = brush.entries[name]
        if name in SPATIAL_CODES:
            codes.append(SPATIAL_CODES[name])
        elif name in index:
            codes.append(index[name])
        else:
            raise UnknownVariable(name)
        los.append(-np.inf if lo is None else lo)
        his.append(np.inf if hi is None else hi)
    stack = np.stack([volume.scalars[n].values for n in names])
    return stack, index[color_variable], np.array(codes, dtype=np.int64), np.array(los), np.array(his)


def march_image(
    state: RenderState,
    volume: VolumeTimeStep,
    jitter,
    early_threshold=EARLY_TERMINATION_ALPHA,
    track_sample_depth=False,
    backend=None,
):
    """March every pixel once; returns (rgba (H,W,4) f64, depth (H,W) f64,
    accepted-sample depth range)."""
    cam = state.camera
    grid = volume.grid
    dirs = cam.ray_dirs().reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(cam.eye, dtype=np.float64), dirs.shape)
    stack, color_index, codes, los, his = _resolve_fields(volume, state.brush, state.transfer.variable)
    xs, rgba_pts = state.transfer.arrays()
    step = state.step_km if state.step_km is not None else default_step_km(grid)
    rgba, depth, depth_range = _kernels.march_rays(
        origins,
        dirs,
        grid,
        stack,
        color_index,
        codes,
        los,
        his,
        xs,
        rgba_pts,
        state.transfer.opacity_scale,
        step,
        jitter,
        early_threshold=early_threshold,
        track_sample_depth=track_sample_depth,
        backend=backend,
    )
    h, w = cam.height, cam.width
    return rgba.reshape(h, w, 4), depth.reshape(h, w), depth_range


def pick_lod(interactive: bool, pass_index: int, n_levels=3) -> int:
    """Coarsest while interacting, mid level for the first converged pass,
    full resolution afterwards."""
    if interactive:
        return min(2, n_levels - 1)
    if pass_index == 0:
        return min(1, n_levels - 1)
    return 0


def render_pass(
    state: RenderState,
    pyramid: LodPyramid,
    frame: FrameSlot,
    pass_index: int,
    level=None,
    backend=None,
):
    """Accumulate one jittered pass into `frame` (mutates and returns it)."""
    if frame.passes > 0 and frame.generation != state.generation:
        raise GenerationMismatch(
            f"frame generation {frame.generation} != state generation {state.generation}"
        )
    frame.generation = state.generation
    if level is None:
        level = pick_lod(interactive=False, pass_index=pass_index, n_levels=len(pyramid.levels))
    volume = pyramid.level(level)
    jitter = pass_jitter(state.camera.width * state.camera.height, pass_index)
    rgba, depth, _ = march_image(state, volume, jitter, backend=backend)
    frame.accum += rgba.astype(np.float32)
    frame.depth = depth.astype(np.float32)
    frame.passes += 1
    return frame


def render_volume(state: RenderState, pyramid: LodPyramid, passes=None, backend=None) -> FrameSlot:
    """Batch render: the full progressive pass budget on a fresh frame."""
    if passes is None:
        passes = state.pass_budget
    frame = FrameSlot.fresh(state.camera, state.generation)
    for p in range(passes):
        render_pass(state, pyramid, frame, p, backend=backend)
    return frame


def _line_pixels(x0, y0, x1, y1):
    """Integer pixel chain from (x0, y0) to (x1, y1) with one pixel per major
    axis step (round of the ideal line); parameter fraction per pixel."""
    steps = max(abs(x1 - x0), abs(y1 - y0))
    if steps == 0:
        return np.array([x0]), np.array([y0]), np.array([0.0])
    f = np.arange(steps + 1) / steps
    xs = np.rint(x0 + f * (x1 - x0)).astype(np.int64)
    ys = np.rint(y0 + f * (y1 - y0)).astype(np.int64)
    return xs, ys, f


def render_pathlines(lines, camera: Camera, depth_buffer):
    """Rasterize age-colored 1-px pathlines, depth-tested against the volume.

    Returns (overlay (H,W,4) float, mask (H,W) bool).  A fragment draws only
    where its camera-space distance is less than the volume depth.
    """
    h, w = camera.height, camera.width
    overlay = np.zeros((h, w, 4))
    drawn = np.zeros((h, w), dtype=bool)
    frag_depth = np.full((h, w), np.inf)
    for line in lines:
        px, py, dist, in_front = camera.project(line.positions)
        ipx = np.rint(px).astype(np.int64)
        ipy = np.rint(py).astype(np.int64)
        for s in range(len(ipx) - 1):
            if not (in_front[s] and in_front[s + 1]):
                continue
            xs, ys, f = _line_pixels(ipx[s], ipy[s], ipx[s + 1], ipy[s + 1])
            d = dist[s] + f * (dist[s + 1] - dist[s])
            age = line.ages[s] + f * (line.ages[s + 1] - line.ages[s])
            ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            xs, ys, d, age = xs[ok], ys[ok], d[ok], age[ok]
            ok = (d < depth_buffer[ys, xs]) & (d < frag_depth[ys, xs])
            xs, ys, d, age = xs[ok], ys[ok], d[ok], age[ok]
            color = (1.0 - age)[:, None] * PATHLINE_START_COLOR + age[:, None] * PATHLINE_END_COLOR
            overlay[ys, xs, 0:3] = color
            overlay[ys, xs, 3] = 1.0
            drawn[ys, xs] = True
            frag_depth[ys, xs] = d
    return overlay, drawn


def compose_overlay(display_u8, overlay, mask):
    """Composite a pathline overlay over an 8-bit display image."""
    out = display_u8.copy()
    rgba = np.rint(np.clip(overlay, 0.0, 1.0) * 255.0).astype(np.uint8)
    out[mask] = rgba[mask]
    return out


def encode_png(image_u8) -> bytes:
    """8-bit straight-alpha RGBA PNG bytes."""
    from io import BytesIO

    from PIL import Image

    buf = BytesIO()
    Image.fromarray(image_u8, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes):
    from io import BytesIO

    from PIL import Image

    return np.asarray(Image.open(BytesIO(data)).convert("RGBA"))
