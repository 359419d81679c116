"""Pure-numpy ray-marching kernel, vectorized across rays.

Semantics match the compiled kernel: per shell segment, samples at
t = t_near + (k + jitter) * step; each sample is brush-tested, mapped through
the transfer function and composited front-to-back with exponential
extinction.  Per-ray state advances in sample order, so results are
deterministic.
"""

from __future__ import annotations

import numpy as np

from ..grid import ShellGrid, trilinear_apply, trilinear_setup

BACKEND = "python"

CODE_X = -1
CODE_Y = -2
CODE_Z = -3
CODE_DEPTH = -4


def shell_segments(origins, dirs, r_inner, r_outer):
    """Parametric intervals where each ray is inside the shell.

    Returns (t0, t1) arrays of shape (N, 2); a segment is valid iff t1 > t0.
    """
    n = len(origins)
    b = np.einsum("ij,ij->i", origins, dirs)
    oo = np.einsum("ij,ij->i", origins, origins)

    def hit(radius):
        disc = b * b - (oo - radius * radius)
        ok = disc > 0.0
        s = np.sqrt(np.maximum(disc, 0.0))
        return ok, -b - s, -b + s

    ok_out, tn_out, tf_out = hit(r_outer)
    ok_in, tn_in, tf_in = hit(r_inner)

    t0 = np.full((n, 2), np.inf)
    t1 = np.full((n, 2), -np.inf)

    miss = ~ok_out | (tf_out <= 0.0)
    pierced = ok_in & (tf_in > 0.0) & ~miss
    single = ~miss & ~pierced

    # No core intersection: one segment through the whole shell.
    t0[single, 0] = np.maximum(tn_out[single], 0.0)
    t1[single, 0] = tf_out[single]
    # Core pierced: entry piece and exit piece.
    t0[pierced, 0] = np.maximum(tn_out[pierced], 0.0)
    t1[pierced, 0] = np.maximum(tn_in[pierced], 0.0)
    t0[pierced, 1] = np.maximum(tf_in[pierced], 0.0)
    t1[pierced, 1] = tf_out[pierced]
    return t0, t1


def _tf_lookup(values, tf_values, tf_rgba):
    out = np.empty((len(values), 4))
    for c in range(4):
        out[:, c] = np.interp(values, tf_values, tf_rgba[:, c])
    return out


def march_rays(
    origins,
    dirs,
    r_inner,
    r_outer,
    n_r,
    n_lat,
    n_lon,
    fields,
    color_index,
    res_codes,
    res_lo,
    res_hi,
    tf_values,
    tf_rgba,
    opacity_scale,
    step,
    jitter,
    early_threshold,
    track_sample_depth,
):
    grid = ShellGrid(n_r=n_r, n_lat=n_lat, n_lon=n_lon, r_inner=r_inner, r_outer=r_outer)
    n = len(origins)
    rgba = np.zeros((n, 4))
    depth = np.full(n, np.inf)
    dmin, dmax = np.inf, -np.inf

    seg_t0, seg_t1 = shell_segments(origins, dirs, r_inner, r_outer)
    for seg in range(2):
        t0 = seg_t0[:, seg]
        t1 = seg_t1[:, seg]
        segment_ok = t1 > t0
        k = 0
        while True:
            t = t0 + (k + jitter) * step
            act = segment_ok & (t < t1) & (rgba[:, 3] < early_threshold)
            idx = np.flatnonzero(act)
            if idx.size == 0:
                break
            pos = origins[idx] + t[idx, None] * dirs[idx]
            inside, tri_idx, tri_w = trilinear_setup(grid, pos)
            radius = np.linalg.norm(pos, axis=1)
            accept = inside.copy()
            for code, lo, hi in zip(res_codes, res_lo, res_hi):
                if code >= 0:
                    val = trilinear_apply(fields[code], tri_idx, tri_w)
                elif code == CODE_X:
                    val = pos[:, 0]
                elif code == CODE_Y:
                    val = pos[:, 1]
                elif code == CODE_Z:
                    val = pos[:, 2]
                else:
                    val = r_outer - radius
                accept &= (val >= lo) & (val <= hi)
            if accept.any():
                sub = idx[accept]
                cval = trilinear_apply(
                    fields[color_index],
                    tuple(a[accept] for a in tri_idx),
                    tuple(w[accept] for w in tri_w),
                )
                tf = _tf_lookup(cval, tf_values, tf_rgba)
                alpha = 1.0 - np.exp(-opacity_scale * tf[:, 3] * step)
                trans = 1.0 - rgba[sub, 3]
                rgba[sub, 0:3] += (trans * alpha)[:, None] * tf[:, 0:3]
                new_a = rgba[sub, 3] + trans * alpha
                rgba[sub, 3] = new_a
                crossed = (new_a >= 0.5) & np.isinf(depth[sub])
                depth[sub[crossed]] = t[sub[crossed]]
                if track_sample_depth:
                    d = r_outer - radius[accept]
                    dmin = min(dmin, float(d.min()))
                    dmax = max(dmax, float(d.max()))
            k += 1
    return rgba, depth, (dmin, dmax)
