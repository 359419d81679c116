"""Bit-exact MVOL volume file reading/writing and the series index.

Layout (little-endian throughout):

    magic  "MVOL1" + zero byte
    u16    version (currently 1)
    u32    n_r, n_lat, n_lon
    f64    r_inner, r_outer  [km]
    f64    time              [Myr]
    u16    variable count
    per variable: u16 name length + UTF-8 name
    payload: one f32 array per variable, node-ordered r-major/lat/lon,
             in the same order as the name table.

Velocity travels as three variables named "vx", "vy", "vz".  A time series is
a directory of MVOL files plus an ``index.txt`` with one ascending-time line
per step: "<time_Myr> <filename>".
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import ScalarField, ShellGrid, VectorField, VolumeTimeStep

MAGIC = b"MVOL1\x00"
VERSION = 1
INDEX_NAME = "index.txt"
VELOCITY_NAMES = ("vx", "vy", "vz")


class MvolError(Exception):
    """Base error for malformed MVOL data; carries the offending byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(MvolError):
    pass


class TruncatedFile(MvolError):
    pass


class DuplicateVariable(MvolError):
    pass


class NonFiniteValue(MvolError):
    pass


def write_volume(v: VolumeTimeStep) -> bytes:
    """Serialize a volume deterministically (variables in sorted name order)."""
    fields = dict(v.scalars)
    if v.velocity is not None:
        fields["vx"] = v.velocity.x
        fields["vy"] = v.velocity.y
        fields["vz"] = v.velocity.z
    names = sorted(fields)
    g = v.grid
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<III", g.n_r, g.n_lat, g.n_lon),
        struct.pack("<dd", g.r_inner, g.r_outer),
        struct.pack("<d", v.time),
        struct.pack("<H", len(names)),
    ]
    for name in names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    for name in names:
        parts.append(fields[name].values.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def header_size(variable_names) -> int:
    """Byte size of the header for the given variable names (layout rule)."""
    return 6 + 2 + 12 + 16 + 8 + 2 + sum(2 + len(n.encode("utf-8")) for n in variable_names)


def read_volume(data: bytes) -> VolumeTimeStep:
    """Parse MVOL bytes into a volume; errors name the byte offset."""
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic("bad magic", 0)
    off = len(MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(data):
            raise TruncatedFile("header truncated", off)
        vals = struct.unpack_from(fmt, data, off)
        off += size
        return vals

    (_version,) = take("<H")
    n_r, n_lat, n_lon = take("<III")
    r_inner, r_outer = take("<dd")
    (time,) = take("<d")
    (count,) = take("<H")
    names = []
    for _ in range(count):
        (nlen,) = take("<H")
        if off + nlen > len(data):
            raise TruncatedFile("variable name truncated", off)
        name = data[off : off + nlen].decode("utf-8")
        if name in names:
            raise DuplicateVariable(f"duplicate variable {name!r}", off)
        names.append(name)
        off += nlen

    grid = ShellGrid(n_r=n_r, n_lat=n_lat, n_lon=n_lon, r_inner=r_inner, r_outer=r_outer)
    n = grid.node_count
    fields = {}
    for name in names:
        end = off + 4 * n
        if end > len(data):
            raise TruncatedFile(f"payload for {name!r} truncated", off)
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off)
        bad = ~np.isfinite(arr)
        if bad.any():
            raise NonFiniteValue(
                f"non-finite value in {name!r}", off + 4 * int(np.argmax(bad))
            )
        fields[name] = ScalarField.from_values(name, arr, grid.shape)
        off = end

    velocity = None
    if all(c in fields for c in VELOCITY_NAMES):
        velocity = VectorField(
            name="velocity",
            x=fields.pop("vx").renamed("vx"),
            y=fields.pop("vy").renamed("vy"),
            z=fields.pop("vz").renamed("vz"),
        )
    return VolumeTimeStep(grid=grid, time=time, scalars=fields, velocity=velocity)


def save_volume(v: VolumeTimeStep, path):
    Path(path).write_bytes(write_volume(v))


def load_volume(path) -> VolumeTimeStep:
    return read_volume(Path(path).read_bytes())


def write_series_index(entries, directory):
    """entries: iterable of (time_Myr, filename), written in ascending time."""
    entries = sorted(entries, key=lambda e: e[0])
    lines = [f"{time:.17g} {name}\n" for time, name in entries]
    (Path(directory) / INDEX_NAME).write_text("".join(lines), encoding="utf-8")


def read_series_index(directory):
    """Returns [(time_Myr, filename), ...] in ascending time order."""
    path = Path(directory) / INDEX_NAME
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        time_s, name = line.split(maxsplit=1)
        entries.append((float(time_s), name))
    times = [t for t, _ in entries]
    if times != sorted(times):
        raise ValueError(f"series index {path} is not in ascending time order")
    return entries


def save_series(volumes, directory, prefix="step"):
    """Write one MVOL per step plus the series index; returns the filenames."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, v in enumerate(volumes):
        name = f"{prefix}_{i:04d}.mvol"
        save_volume(v, directory / name)
        entries.append((v.time, name))
    write_series_index(entries, directory)
    return [name for _, name in entries]


def load_series(directory):
    """Load every step listed in the index, in time order."""
    directory = Path(directory)
    return [load_volume(directory / name) for _, name in read_series_index(directory)]
