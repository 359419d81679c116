"""Preprocessing pipeline: LOD pyramid, derived variables, sample extract.

All transforms are pure; means accumulate in float64 in storage order so
results do not depend on internal parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .grid import ScalarField, ShellGrid, VectorField, VolumeTimeStep

SAMPLE_CAP = 100_000
LOD_LEVELS = 2  # extra levels below the original

# Incremented on every build_lod call; lets callers assert that brushing
# never triggers a pyramid rebuild.
BUILD_CALLS = 0


class DimensionTooSmall(ValueError):
    pass


class MissingVelocity(ValueError):
    pass


class UnknownVariable(KeyError):
    pass


@dataclass(frozen=True)
class LodPyramid:
    """Level 0 is the original volume; each next level halves every axis."""

    levels: tuple  # of VolumeTimeStep

    def __post_init__(self):
        if len(self.levels) != LOD_LEVELS + 1:
            raise ValueError(f"expected {LOD_LEVELS + 1} levels")

    def level(self, k) -> VolumeTimeStep:
        return self.levels[k]


def _downsample_array(a):
    """Mean over 2x2x2 child blocks; edge blocks shrink on odd dimensions."""
    out_shape = tuple((d + 1) // 2 for d in a.shape)
    acc = np.zeros(out_shape, dtype=np.float64)
    cnt = np.zeros(out_shape, dtype=np.int64)
    for dz, dy, dx in product(range(2), repeat=3):
        sub = a[dz::2, dy::2, dx::2]
        sl = tuple(slice(0, s) for s in sub.shape)
        acc[sl] += sub
        cnt[sl] += 1
    return (acc / cnt).astype(np.float32)


def _downsample_volume(v: VolumeTimeStep) -> VolumeTimeStep:
    coarse = v.grid.coarsened()
    scalars = {
        name: ScalarField.from_values(name, _downsample_array(f.values), coarse.shape)
        for name, f in v.scalars.items()
    }
    velocity = None
    if v.velocity is not None:
        velocity = VectorField.from_components(
            v.velocity.name,
            _downsample_array(v.velocity.x.values),
            _downsample_array(v.velocity.y.values),
            _downsample_array(v.velocity.z.values),
            coarse.shape,
        )
    return VolumeTimeStep(grid=coarse, time=v.time, scalars=scalars, velocity=velocity)


def build_lod(v: VolumeTimeStep) -> LodPyramid:
    """Original plus two block-mean downsampled levels (1/8th nodes each on
    even dimensions)."""
    global BUILD_CALLS
    dims = v.grid.shape
    for _ in range(LOD_LEVELS):
        dims = tuple((d + 1) // 2 for d in dims)
    if dims[0] < 2 or dims[1] < 2 or dims[2] < 3:
        raise DimensionTooSmall(
            f"grid {v.grid.shape} cannot be halved {LOD_LEVELS} times"
        )
    BUILD_CALLS += 1
    levels = [v]
    for _ in range(LOD_LEVELS):
        levels.append(_downsample_volume(levels[-1]))
    return LodPyramid(levels=tuple(levels))


def radial_projection(vel, positions):
    """Project velocity vectors onto the outward radial direction (float64)."""
    p = np.asarray(positions, dtype=np.float64)
    r = np.linalg.norm(p, axis=-1)
    return np.einsum("...c,...c->...", np.asarray(vel, dtype=np.float64), p) / r


def compute_radial_velocity(v: VolumeTimeStep) -> ScalarField:
    """Velocity projected on the outward radial direction, km/Myr."""
    if v.velocity is None:
        raise MissingVelocity("volume has no velocity field")
    vr = radial_projection(v.velocity.stacked(), v.grid.node_cartesian())
    return ScalarField.from_values("v_radial", vr, v.grid.shape)


def compute_depth(v: VolumeTimeStep) -> ScalarField:
    """Depth below the outer shell, km (altitude with its sign flipped)."""
    r, _, _ = v.grid.node_spherical()
    return ScalarField.from_values("depth", v.grid.r_outer - r, v.grid.shape)


def compute_anomaly(v: VolumeTimeStep, source: str) -> ScalarField:
    """Source value minus its spherical-shell mean at the same radial index."""
    if source not in v.scalars:
        raise UnknownVariable(source)
    vals = v.scalars[source].values.astype(np.float64)
    shell_mean = vals.mean(axis=(1, 2), keepdims=True)
    return ScalarField.from_values(f"{source}_anomaly", vals - shell_mean, v.grid.shape)


def add_derived(v: VolumeTimeStep) -> VolumeTimeStep:
    """Attach v_radial, depth and (if missing) temp_anomaly as scalar fields."""
    out = v
    if "v_radial" not in out.scalars and out.velocity is not None:
        out = out.with_scalar(compute_radial_velocity(out))
    if "depth" not in out.scalars:
        out = out.with_scalar(compute_depth(out))
    if "temp_anomaly" not in out.scalars and "temperature" in out.scalars:
        out = out.with_scalar(compute_anomaly(out, "temperature").renamed("temp_anomaly"))
    return out


def reservoir_indices(n, cap, seed):
    """Uniform sample without replacement of min(n, cap) of range(n).

    Seeded and deterministic; output sorted ascending (storage order).
    """
    if n <= cap:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=cap, replace=False).astype(np.int64)
    idx.sort()
    return idx


SPATIAL_COLUMNS = ("x", "y", "z")


@dataclass(frozen=True)
class SampleTable:
    """Up to SAMPLE_CAP rows of per-node values for the parallel coordinates."""

    columns: tuple  # of str
    data: np.ndarray  # (rows, len(columns)) float32
    indices: np.ndarray  # flat node index per row
    seed: int


def extract_samples(v: VolumeTimeStep, cap=SAMPLE_CAP, seed=42) -> SampleTable:
    """Randomly select up to `cap` nodes and tabulate their values.

    Rows carry Cartesian x, y, z plus every scalar (including derived ones);
    scalar values are bitwise copies of the node values.
    """
    n = v.grid.node_count
    idx = reservoir_indices(n, cap, seed)
    names = v.variable_names()
    columns = SPATIAL_COLUMNS + tuple(names)
    data = np.empty((len(idx), len(columns)), dtype=np.float32)
    pos = v.grid.node_cartesian().reshape(n, 3)[idx]
    data[:, 0:3] = pos.astype(np.float32)
    for c, name in enumerate(names, start=len(SPATIAL_COLUMNS)):
        data[:, c] = v.scalars[name].values.reshape(n)[idx]
    return SampleTable(columns=columns, data=data, indices=idx, seed=seed)


def write_msamp(table: SampleTable) -> str:
    """MSAMP: UTF-8 CSV, header row of column names, f32 at 9 significant
    digits (lossless round-trip)."""
    lines = [",".join(table.columns)]
    for row in table.data:
        lines.append(",".join(f"{x:.9g}" for x in row))
    return "\n".join(lines) + "\n"


def read_msamp(text: str) -> SampleTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    columns = tuple(lines[0].split(","))
    data = np.array(
        [[np.float32(x) for x in ln.split(",")] for ln in lines[1:]], dtype=np.float32
    ).reshape(len(lines) - 1, len(columns))
    return SampleTable(columns=columns, data=data, indices=np.arange(len(data)), seed=-1)
