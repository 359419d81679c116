"""Interactive brushing-and-linking exploration of time-varying mantle data.

Preprocesses volume time series into LOD pyramids, derived variables,
parallel-coordinates samples and pathlines, then serves brush-filtered
progressive volume renderings through an image-warping frame server.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
