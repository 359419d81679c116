"""Seeded synthetic mantle-convection scenarios.

Stands in for real simulation output at desk scale.  Each scenario is a pure
function of (kind, seed, grid, time), so generated series are reproducible
bit-for-bit.  Canonical variables: temperature, temp_anomaly, expansivity,
conductivity, spin_density_anomaly plus the velocity components vx, vy, vz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, ShellGrid, VectorField, VolumeTimeStep

KINDS = ("plume", "slab", "rigid_rotation", "convection_cells")

# Depth (km) where the spin-transition density anomaly changes sign.
SPIN_TRANSITION_DEPTH_KM = 1600.0

# Angular footprint of one plume/slab column and its hard cutoff; tails are
# truncated to exact zero so the anomaly has no spurious strict extrema.
FEATURE_SIGMA_DEG = 9.0
FEATURE_CUTOFF_SIGMAS = 3.0


class EmptyTimeList(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticScenario:
    kind: str
    seed: int = 42
    feature_count: int = 4
    amplitude: float = 100.0  # anomaly amplitude, K
    radial_speed: float = 40.0  # km/Myr inside features
    omega: float = 0.05  # rad/Myr about z, rigid_rotation only
    cell_count: int = 4  # longitudinal cell pairs, convection_cells only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")


def _truncated_gaussian(q, cutoff=FEATURE_CUTOFF_SIGMAS):
    """exp(-q/2) rescaled to hit exactly zero at q = cutoff**2."""
    floor = np.exp(-0.5 * cutoff * cutoff)
    return np.maximum(0.0, (np.exp(-0.5 * np.minimum(q, cutoff * cutoff)) - floor) / (1.0 - floor))


def feature_centers(scenario: SyntheticScenario):
    """Deterministic, well-separated feature centers: (lat deg, lon deg,
    radial fraction of shell thickness).

    The radial fraction is jittered around mid-shell so a feature peak never
    sits exactly halfway between two radial node layers (which would tie the
    discrete maximum away).
    """
    rng = np.random.default_rng(scenario.seed)
    n = scenario.feature_count
    lon_pitch = 360.0 / max(n, 1)
    lats = rng.uniform(-45.0, 45.0, size=n)
    lons = (np.arange(n) + 0.2 + 0.6 * rng.random(n)) * lon_pitch
    rfracs = rng.uniform(0.42, 0.58, size=n)
    return np.column_stack([lats, lons % 360.0, rfracs])


def _angular_distance_sq(lat, lon, clat, clon):
    """Squared great-circle distance (deg^2) from grid angles to a center."""
    lat_r = np.deg2rad(lat)
    lon_r = np.deg2rad(lon)
    clat_r = np.deg2rad(clat)
    clon_r = np.deg2rad(clon)
    cosd = np.sin(lat_r) * np.sin(clat_r) + np.cos(lat_r) * np.cos(clat_r) * np.cos(lon_r - clon_r)
    d = np.degrees(np.arccos(np.clip(cosd, -1.0, 1.0)))
    return d * d


def plume_anomaly(scenario: SyntheticScenario, grid: ShellGrid):
    """Closed-form plume temperature anomaly evaluated at every node (float64).

    Sum of positive, compactly supported bumps: a truncated Gaussian in
    great-circle distance from each (lat, lon) center times a truncated
    Gaussian envelope in depth around mid-shell.
    """
    r, lat, lon = grid.node_spherical()
    centers = feature_centers(scenario)
    thickness = grid.r_outer - grid.r_inner
    sigma_r = 0.25 * thickness
    total = np.zeros(grid.shape)
    for clat, clon, rfrac in centers:
        q = _angular_distance_sq(lat, lon, clat, clon) / FEATURE_SIGMA_DEG**2
        radial = _truncated_gaussian(((r - (grid.r_inner + rfrac * thickness)) / sigma_r) ** 2)
        total += _truncated_gaussian(q) * radial
    return scenario.amplitude * total


def _spin_density_anomaly(anomaly, grid: ShellGrid):
    # sign(anomaly) * g(depth), g flips sign at the spin-transition depth.
    r, _, _ = grid.node_spherical()
    depth = grid.r_outer - r
    g = np.tanh((depth - SPIN_TRANSITION_DEPTH_KM) / 200.0)
    return np.sign(anomaly) * g


def _background(grid: ShellGrid):
    r, _, _ = grid.node_spherical()
    depth = grid.r_outer - r
    temperature = 1600.0 + 0.45 * depth
    conductivity = 3.0 + 0.002 * depth
    return temperature, conductivity


def _radial_unit(grid: ShellGrid):
    p = grid.node_cartesian()
    r = np.linalg.norm(p, axis=-1, keepdims=True)
    return p / r


def generate_time_step(scenario: SyntheticScenario, grid: ShellGrid, time: float) -> VolumeTimeStep:
    """Generate one snapshot; pure in (kind, seed, grid, time)."""
    temperature_bg, conductivity = _background(grid)

    if scenario.kind in ("plume", "slab"):
        anomaly = plume_anomaly(scenario, grid)
        if scenario.kind == "slab":
            anomaly = -anomaly
        expansivity = anomaly / scenario.amplitude
        vel = _radial_unit(grid) * (anomaly / scenario.amplitude * scenario.radial_speed)[..., None]
    elif scenario.kind == "rigid_rotation":
        anomaly = np.zeros(grid.shape)
        expansivity = np.ones(grid.shape)
        p = grid.node_cartesian()
        vel = np.empty_like(p)
        vel[..., 0] = -scenario.omega * p[..., 1]
        vel[..., 1] = scenario.omega * p[..., 0]
        vel[..., 2] = 0.0
    else:  # convection_cells
        r, lat, lon = grid.node_spherical()
        # Seeded phase keeps pattern peaks off exact grid nodes (no ties).
        phase = np.random.default_rng(scenario.seed).uniform(0.1, 0.9)
        pattern = np.sin(2.0 * np.deg2rad(lat)) * np.sin(scenario.cell_count * np.deg2rad(lon) + phase)
        # Sign flip at mid-depth: +1 at the CMB, -1 at the surface.
        s = np.cos(np.pi * (r - grid.r_inner) / (grid.r_outer - grid.r_inner))
        anomaly = scenario.amplitude * pattern * s
        expansivity = anomaly / scenario.amplitude
        vel = _radial_unit(grid) * (anomaly / scenario.amplitude * scenario.radial_speed)[..., None]

    scalars = {}
    for name, data in (
        ("temperature", temperature_bg + anomaly),
        ("temp_anomaly", anomaly),
        ("expansivity", expansivity),
        ("conductivity", conductivity),
        ("spin_density_anomaly", _spin_density_anomaly(anomaly, grid)),
    ):
        scalars[name] = ScalarField.from_values(name, data, grid.shape)

    velocity = VectorField.from_components("velocity", vel[..., 0], vel[..., 1], vel[..., 2], grid.shape)
    return VolumeTimeStep(grid=grid, time=time, scalars=scalars, velocity=velocity)


def generate_synthetic(scenario: SyntheticScenario, grid: ShellGrid, times):
    """Generate a snapshot per requested time, deterministically per seed."""
    times = list(times)
    if not times:
        raise EmptyTimeList("at least one time step is required")
    return [generate_time_step(scenario, grid, t) for t in times]


def default_times(n_steps=12, spacing_myr=2.0, start=0.0):
    """The desk-scale default: n steps at 2 Myr spacing."""
    return [start + spacing_myr * i for i in range(n_steps)]
