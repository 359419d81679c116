"""Ray-marching kernel backends.

The compiled extension (Cython) is preferred; a pure-numpy fallback with
identical semantics is selected when the extension is unavailable.  Set
MANTLEVIS_KERNELS=python or =native to force a backend.
"""

import os

import numpy as np

from . import fallback

_choice = os.environ.get("MANTLEVIS_KERNELS", "").lower()
if _choice == "python":
    _impl = fallback
elif _choice == "native":
    from . import native as _impl  # noqa: F401
else:
    try:
        from . import native as _impl
    except ImportError:
        _impl = fallback

BACKEND = _impl.BACKEND


def get_backend(name=None):
    """Return a backend module by name ("python"/"native"), default current."""
    if name is None:
        return _impl
    if name == "python":
        return fallback
    if name == "native":
        from . import native

        return native
    raise ValueError(f"unknown kernel backend {name!r}")


def march_rays(
    origins,
    dirs,
    grid,
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
    early_threshold=0.995,
    track_sample_depth=False,
    backend=None,
):
    """March all rays through the shell; see render.march_rays for semantics.

    Returns (rgba float64 (N, 4), depth float64 (N,), (dmin, dmax)) where
    dmin/dmax bound the depth of accepted samples when tracking is on.
    """
    impl = get_backend(backend)
    return impl.march_rays(
        np.ascontiguousarray(origins, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        float(grid.r_inner),
        float(grid.r_outer),
        int(grid.n_r),
        int(grid.n_lat),
        int(grid.n_lon),
        np.ascontiguousarray(fields, dtype=np.float32),
        int(color_index),
        np.ascontiguousarray(res_codes, dtype=np.int64),
        np.ascontiguousarray(res_lo, dtype=np.float64),
        np.ascontiguousarray(res_hi, dtype=np.float64),
        np.ascontiguousarray(tf_values, dtype=np.float64),
        np.ascontiguousarray(tf_rgba, dtype=np.float64),
        float(opacity_scale),
        float(step),
        np.ascontiguousarray(jitter, dtype=np.float64),
        float(early_threshold),
        bool(track_sample_depth),
    )
