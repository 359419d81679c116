"""Strict local extrema of scalar fields on the shell grid.

Pathline seeds come from here.  A node is a maximum iff its value is strictly
greater than all neighbors in its 3x3x3 index neighborhood; minima symmetric.
Longitude wraps; radial/latitude edges compare against the truncated
neighborhood.  Non-strict ties yield no extremum.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .grid import ScalarField, ShellGrid


@dataclass(frozen=True)
class CriticalPoint:
    node_index: int  # flat r-major index
    position: tuple  # Cartesian (x, y, z), km
    kind: str  # "minimum" | "maximum"
    value: float
    time_step: int = 0


def _padded(values, fill):
    # Pad r/lat edges with `fill`, wrap longitude by one node on each side.
    a = np.pad(values, ((1, 1), (1, 1), (0, 0)), mode="constant", constant_values=fill)
    return np.concatenate([a[:, :, -1:], a, a[:, :, :1]], axis=2)


def _strict_extrema_mask(values, maxima: bool):
    fill = -np.inf if maxima else np.inf
    p = _padded(values.astype(np.float64), fill)
    center = p[1:-1, 1:-1, 1:-1]
    mask = np.ones(values.shape, dtype=bool)
    for dr, dlat, dlon in product((0, 1, 2), repeat=3):
        if (dr, dlat, dlon) == (1, 1, 1):
            continue
        nb = p[dr : dr + values.shape[0], dlat : dlat + values.shape[1], dlon : dlon + values.shape[2]]
        mask &= (center > nb) if maxima else (center < nb)
    return mask


def find_local_extrema(field: ScalarField, grid: ShellGrid, time_step=0):
    """All strict 26-neighborhood extrema, sorted by flat node index."""
    values = field.values
    out = []
    pos = None
    for kind, maxima in (("minimum", False), ("maximum", True)):
        mask = _strict_extrema_mask(values, maxima)
        if not mask.any():
            continue
        if pos is None:
            pos = grid.node_cartesian().reshape(grid.node_count, 3)
        for flat in np.flatnonzero(mask.reshape(-1)):
            out.append(
                CriticalPoint(
                    node_index=int(flat),
                    position=tuple(pos[flat]),
                    kind=kind,
                    value=float(values.reshape(-1)[flat]),
                    time_step=time_step,
                )
            )
    out.sort(key=lambda c: c.node_index)
    return out
