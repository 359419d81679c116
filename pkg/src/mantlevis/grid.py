"""Spherical-shell grid geometry, coordinate conversions and trilinear sampling.

The whole system samples its data through this module: a structured shell grid
with uniform spacing in radius, latitude [-90, +90] deg and longitude
[0, 360) deg (periodic).  Values are node-centered, stored r-major, then
latitude, then longitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Default Earth radii (km): surface and core-mantle boundary.
EARTH_SURFACE_KM = 6371.0
CORE_MANTLE_BOUNDARY_KM = 3480.0


def spherical_to_cartesian(r, lat, lon):
    """Convert (r [km], lat [deg], lon [deg]) to Cartesian (x, y, z) in km.

    Accepts scalars or numpy arrays.
    """
    r = np.asarray(r, dtype=np.float64)
    lat_r = np.deg2rad(np.asarray(lat, dtype=np.float64))
    lon_r = np.deg2rad(np.asarray(lon, dtype=np.float64))
    cl = np.cos(lat_r)
    x = r * cl * np.cos(lon_r)
    y = r * cl * np.sin(lon_r)
    z = r * np.sin(lat_r)
    return x, y, z


def cartesian_to_spherical(x, y, z):
    """Inverse of :func:`spherical_to_cartesian`.

    Longitude is normalized to [0, 360).  At r = 0 both angles are 0 by
    convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = np.sqrt(x * x + y * y + z * z)
    with np.errstate(invalid="ignore", divide="ignore"):
        lat = np.degrees(np.arcsin(np.clip(np.where(r > 0, z / np.where(r > 0, r, 1.0), 0.0), -1.0, 1.0)))
    lon = np.degrees(np.arctan2(y, x)) % 360.0
    lon = np.where(r > 0, lon, 0.0)
    lat = np.where(r > 0, lat, 0.0)
    if np.ndim(r) == 0:
        return float(r), float(lat), float(lon)
    return r, lat, lon


@dataclass(frozen=True)
class ShellGrid:
    """Structured spherical shell: node counts per axis and shell radii in km."""

    n_r: int
    n_lat: int
    n_lon: int
    r_inner: float = CORE_MANTLE_BOUNDARY_KM
    r_outer: float = EARTH_SURFACE_KM

    def __post_init__(self):
        if self.n_r < 2 or self.n_lat < 2 or self.n_lon < 3:
            raise ValueError("grid too small: need n_r >= 2, n_lat >= 2, n_lon >= 3")
        if not (0.0 < self.r_inner < self.r_outer):
            raise ValueError("need 0 < r_inner < r_outer")

    @property
    def shape(self):
        return (self.n_r, self.n_lat, self.n_lon)

    @property
    def node_count(self):
        return self.n_r * self.n_lat * self.n_lon

    @property
    def dr(self):
        return (self.r_outer - self.r_inner) / (self.n_r - 1)

    @property
    def dlat(self):
        return 180.0 / (self.n_lat - 1)

    @property
    def dlon(self):
        # Longitude is periodic: n_lon nodes cover [0, 360).
        return 360.0 / self.n_lon

    def radii(self):
        # linspace keeps the endpoints exact (derived depth hits 0 at the
        # surface bit-for-bit).
        return np.linspace(self.r_inner, self.r_outer, self.n_r)

    def latitudes(self):
        return np.linspace(-90.0, 90.0, self.n_lat)

    def longitudes(self):
        return self.dlon * np.arange(self.n_lon)

    def node_spherical(self):
        """(r, lat, lon) arrays of shape (n_r, n_lat, n_lon)."""
        return np.meshgrid(self.radii(), self.latitudes(), self.longitudes(), indexing="ij")

    def node_cartesian(self):
        """Cartesian node positions, shape (n_r, n_lat, n_lon, 3), float64."""
        r, lat, lon = self.node_spherical()
        x, y, z = spherical_to_cartesian(r, lat, lon)
        return np.stack([x, y, z], axis=-1)

    def coarsened(self):
        """Grid with per-axis node counts halved (ceil), same radii."""
        return ShellGrid(
            n_r=(self.n_r + 1) // 2,
            n_lat=(self.n_lat + 1) // 2,
            n_lon=(self.n_lon + 1) // 2,
            r_inner=self.r_inner,
            r_outer=self.r_outer,
        )


def _frozen_f32(values, shape):
    a = np.ascontiguousarray(values, dtype=np.float32).reshape(shape)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ScalarField:
    """One 32-bit value per grid node, with a cached range."""

    name: str
    values: np.ndarray  # (n_r, n_lat, n_lon) float32, read-only
    v_min: float
    v_max: float

    @classmethod
    def from_values(cls, name, values, shape=None):
        a = _frozen_f32(values, shape if shape is not None else np.shape(values))
        if not np.all(np.isfinite(a)):
            raise ValueError(f"field {name!r} contains non-finite values")
        return cls(name=name, values=a, v_min=float(a.min()), v_max=float(a.max()))

    def renamed(self, name):
        return ScalarField(name=name, values=self.values, v_min=self.v_min, v_max=self.v_max)


@dataclass(frozen=True)
class VectorField:
    """Cartesian velocity in km/Myr as three scalar components on one grid."""

    name: str
    x: ScalarField
    y: ScalarField
    z: ScalarField

    def __post_init__(self):
        if not (self.x.values.shape == self.y.values.shape == self.z.values.shape):
            raise ValueError("vector components must share one grid")

    @classmethod
    def from_components(cls, name, vx, vy, vz, shape=None):
        return cls(
            name=name,
            x=ScalarField.from_values("vx", vx, shape),
            y=ScalarField.from_values("vy", vy, shape),
            z=ScalarField.from_values("vz", vz, shape),
        )

    def stacked(self):
        """(n_r, n_lat, n_lon, 3) float32 view of the components."""
        return np.stack([self.x.values, self.y.values, self.z.values], axis=-1)


@dataclass(frozen=True)
class VolumeTimeStep:
    """All fields of one simulation snapshot on a shared grid."""

    grid: ShellGrid
    time: float  # Myr
    scalars: dict  # name -> ScalarField
    velocity: VectorField | None = None

    def __post_init__(self):
        for name, f in self.scalars.items():
            if f.values.shape != self.grid.shape:
                raise ValueError(f"field {name!r} does not match the grid")
            if f.name != name:
                raise ValueError(f"field name mismatch: {f.name!r} stored as {name!r}")
        if self.velocity is not None and self.velocity.x.values.shape != self.grid.shape:
            raise ValueError("velocity does not match the grid")

    def with_scalar(self, f: ScalarField):
        scalars = dict(self.scalars)
        scalars[f.name] = f
        return VolumeTimeStep(grid=self.grid, time=self.time, scalars=scalars, velocity=self.velocity)

    def variable_names(self):
        return sorted(self.scalars)


def trilinear_setup(grid: ShellGrid, pts):
    """Index/weight setup for trilinear sampling of Cartesian points.

    Returns (inside, (i0, i1, j0, j1, k0, k1), (tr, tlat, tlon)) where inside
    marks points with radius within [r_inner, r_outer].  Longitude wraps,
    latitude clamps at the poles.
    """
    pts = np.asarray(pts, dtype=np.float64)
    r, lat, lon = cartesian_to_spherical(pts[..., 0], pts[..., 1], pts[..., 2])
    r = np.atleast_1d(r)
    lat = np.atleast_1d(lat)
    lon = np.atleast_1d(lon)
    inside = (r >= grid.r_inner) & (r <= grid.r_outer)

    fr = (r - grid.r_inner) / grid.dr
    i0 = np.clip(np.floor(fr).astype(np.intp), 0, grid.n_r - 2)
    tr = np.clip(fr - i0, 0.0, 1.0)

    flat = (lat + 90.0) / grid.dlat
    j0 = np.clip(np.floor(flat).astype(np.intp), 0, grid.n_lat - 2)
    tlat = np.clip(flat - j0, 0.0, 1.0)

    flon = (lon % 360.0) / grid.dlon
    k0 = np.floor(flon).astype(np.intp) % grid.n_lon
    tlon = flon - np.floor(flon)
    k1 = (k0 + 1) % grid.n_lon

    return inside, (i0, i0 + 1, j0, j0 + 1, k0, k1), (tr, tlat, tlon)


def trilinear_apply(values, idx, w):
    """Evaluate trilinear interpolation given a setup from trilinear_setup."""
    i0, i1, j0, j1, k0, k1 = idx
    tr, tlat, tlon = w
    v = values
    c000 = v[i0, j0, k0]
    c001 = v[i0, j0, k1]
    c010 = v[i0, j1, k0]
    c011 = v[i0, j1, k1]
    c100 = v[i1, j0, k0]
    c101 = v[i1, j0, k1]
    c110 = v[i1, j1, k0]
    c111 = v[i1, j1, k1]
    c00 = c000 * (1.0 - tlon) + c001 * tlon
    c01 = c010 * (1.0 - tlon) + c011 * tlon
    c10 = c100 * (1.0 - tlon) + c101 * tlon
    c11 = c110 * (1.0 - tlon) + c111 * tlon
    c0 = c00 * (1.0 - tlat) + c01 * tlat
    c1 = c10 * (1.0 - tlat) + c11 * tlat
    return c0 * (1.0 - tr) + c1 * tr


def sample_scalar_many(f: ScalarField, grid: ShellGrid, pts):
    """Sample a scalar field at (N, 3) Cartesian points.

    Returns (values, inside); values are meaningless where inside is False.
    """
    inside, idx, w = trilinear_setup(grid, pts)
    return trilinear_apply(f.values.astype(np.float64, copy=False), idx, w), inside


def sample_scalar(f: ScalarField, grid: ShellGrid, p):
    """Sample at one point; returns a float, or None when outside the shell."""
    vals, inside = sample_scalar_many(f, grid, np.asarray(p, dtype=np.float64)[None, :])
    if not inside[0]:
        return None
    return float(vals[0])


def sample_velocity_many(v: VectorField, grid: ShellGrid, pts):
    inside, idx, w = trilinear_setup(grid, pts)
    out = np.empty(inside.shape + (3,), dtype=np.float64)
    for c, comp in enumerate((v.x, v.y, v.z)):
        out[..., c] = trilinear_apply(comp.values.astype(np.float64, copy=False), idx, w)
    return out, inside


def sample_velocity(v: VectorField, grid: ShellGrid, p):
    """Componentwise velocity sample; None when outside the shell."""
    vals, inside = sample_velocity_many(v, grid, np.asarray(p, dtype=np.float64)[None, :])
    if not inside[0]:
        return None
    return vals[0].copy()
