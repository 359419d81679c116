"""Forward pathline integration through the time-varying velocity series.

Seeds are the strict extrema of the anomaly field at each step; each seed is
traced forward with classical fixed-step RK4 (default step: inter-step
spacing / 8) for up to 10 series steps of simulation time.  A line ends early
only by leaving the shell.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .grid import (
    ShellGrid,
    VolumeTimeStep,
    sample_scalar_many,
    sample_velocity,
    sample_velocity_many,
)
from .topology import CriticalPoint, find_local_extrema

SPAWN_WINDOW = 10  # series steps
RK4_SUBSTEPS = 8  # RK4 steps per series spacing

MPATH_MAGIC = b"MPTH1"


class TimeOutOfRange(ValueError):
    pass


class SeedOutsideShell(ValueError):
    pass


@dataclass(frozen=True)
class Pathline:
    seed: CriticalPoint
    spawn_step: int
    positions: np.ndarray  # (n, 3) km
    times: np.ndarray  # (n,) Myr, strictly increasing
    ages: np.ndarray  # (n,) in [0, 1]
    scalars: dict  # name -> (n,) sampled values

    @property
    def vertex_count(self):
        return len(self.times)


def series_times(series):
    return np.array([v.time for v in series], dtype=np.float64)


def _bracket(times, t):
    if t < times[0] or t > times[-1]:
        raise TimeOutOfRange(f"t={t} outside series range [{times[0]}, {times[-1]}]")
    hi = int(np.searchsorted(times, t, side="right"))
    hi = min(max(hi, 1), len(times) - 1)
    lo = hi - 1
    if times[hi] == times[lo]:
        return lo, hi, 0.0
    return lo, hi, (t - times[lo]) / (times[hi] - times[lo])


def velocity_at(series, p, t):
    """Time-lerped spatial velocity sample; None when outside the shell."""
    times = series_times(series)
    lo, hi, w = _bracket(times, t)
    a = sample_velocity(series[lo].velocity, series[lo].grid, p)
    if a is None:
        return None
    if w == 0.0:
        return a
    b = sample_velocity(series[hi].velocity, series[hi].grid, p)
    if b is None:
        return None
    return (1.0 - w) * a + w * b


def rk4_trace(velocity_fn, seed_pos, t0, duration, dt):
    """Classical RK4 with fixed step; records a vertex after every step.

    velocity_fn(p, t) returns a length-3 array or None (outside the domain);
    integration stops before a step whose stages sample outside.
    Returns (positions, times).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = max(1, int(round(duration / dt)))
    dt = duration / n_steps
    p = np.asarray(seed_pos, dtype=np.float64)
    positions = [p.copy()]
    times = [t0]
    t = t0
    k1 = velocity_fn(p, t)
    for _ in range(n_steps):
        if k1 is None:
            break
        k2 = velocity_fn(p + 0.5 * dt * k1, t + 0.5 * dt)
        if k2 is None:
            break
        k3 = velocity_fn(p + 0.5 * dt * k2, t + 0.5 * dt)
        if k3 is None:
            break
        k4 = velocity_fn(p + dt * k3, t + dt)
        if k4 is None:
            break
        p_new = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t + dt
        # Only record vertices that are still inside the domain.
        k1 = velocity_fn(p_new, t_new)
        if k1 is None:
            break
        p, t = p_new, t_new
        positions.append(p.copy())
        times.append(t)
    return np.array(positions), np.array(times)


def _series_velocity_fn(series):
    times = series_times(series)

    def fn(p, t):
        # Clamp float round-off at the series ends.
        lo, hi, w = _bracket(times, min(max(t, times[0]), times[-1]))
        a = sample_velocity(series[lo].velocity, series[lo].grid, p)
        if a is None:
            return None
        if w == 0.0:
            return a
        b = sample_velocity(series[hi].velocity, series[hi].grid, p)
        if b is None:
            return None
        return (1.0 - w) * a + w * b

    return fn


def integrate_pathline(series, seed, t0, duration, dt=None, spawn_step=0, scalar_names=None):
    """Trace one seed through the series and sample attributes per vertex."""
    times = series_times(series)
    if t0 < times[0] or t0 + duration > times[-1]:
        raise TimeOutOfRange("integration window exceeds the series time range")
    grid = series[0].grid
    if isinstance(seed, CriticalPoint):
        seed_cp = seed
        seed_pos = np.asarray(seed.position, dtype=np.float64)
    else:
        seed_pos = np.asarray(seed, dtype=np.float64)
        seed_cp = CriticalPoint(
            node_index=-1, position=tuple(seed_pos), kind="maximum", value=0.0, time_step=spawn_step
        )
    r = float(np.linalg.norm(seed_pos))
    if not (grid.r_inner <= r <= grid.r_outer):
        raise SeedOutsideShell(f"seed radius {r:.3f} outside the shell")
    if dt is None:
        spacing = float(np.min(np.diff(times))) if len(times) > 1 else duration
        dt = spacing / RK4_SUBSTEPS
    positions, vert_times = rk4_trace(_series_velocity_fn(series), seed_pos, t0, duration, dt)
    ages = (vert_times - t0) / duration if duration > 0 else np.zeros_like(vert_times)
    scalars = _sample_line_scalars(series, positions, vert_times, scalar_names)
    return Pathline(
        seed=seed_cp,
        spawn_step=spawn_step,
        positions=positions,
        times=vert_times,
        ages=ages,
        scalars=scalars,
    )


def _sample_line_scalars(series, positions, vert_times, scalar_names=None):
    """Per-vertex time-lerped scalar samples plus derived depth and v_radial."""
    grid = series[0].grid
    times = series_times(series)
    if scalar_names is None:
        scalar_names = series[0].variable_names()
    scalar_names = [n for n in scalar_names if n not in ("depth", "v_radial")]

    n = len(positions)
    out = {name: np.empty(n) for name in scalar_names}
    radius = np.linalg.norm(positions, axis=1)
    out["depth"] = grid.r_outer - radius

    vel = np.empty((n, 3))
    brackets = [_bracket(times, min(max(t, times[0]), times[-1])) for t in vert_times]
    for lo in sorted({b[0] for b in brackets}):
        rows = np.array([i for i, b in enumerate(brackets) if b[0] == lo])
        w = np.array([brackets[i][2] for i in rows])
        hi = lo + 1 if lo + 1 < len(series) else lo
        pts = positions[rows]
        for name in scalar_names:
            a, _ = sample_scalar_many(series[lo].scalars[name], grid, pts)
            if np.any(w > 0.0):
                b, _ = sample_scalar_many(series[hi].scalars[name], grid, pts)
            else:
                b = a
            out[name][rows] = (1.0 - w) * a + w * b
        va, _ = sample_velocity_many(series[lo].velocity, grid, pts)
        if np.any(w > 0.0):
            vb, _ = sample_velocity_many(series[hi].velocity, grid, pts)
        else:
            vb = va
        vel[rows] = (1.0 - w)[:, None] * va + w[:, None] * vb
    out["v_radial"] = np.einsum("ij,ij->i", vel, positions) / radius
    return out


def generate_pathlines(series, anomaly_variable="temp_anomaly", window=SPAWN_WINDOW):
    """Seed at anomaly extrema of every step, trace forward up to `window`
    steps of simulation time.  Output ordered by (spawn step, seed node)."""
    if len(series) < 2:
        return []
    times = series_times(series)
    spacing = float(np.min(np.diff(times)))
    lines = []
    for s, vol in enumerate(series):
        remaining = len(series) - 1 - s
        n_fwd = min(window, remaining)
        if n_fwd <= 0:
            continue
        duration = float(times[s + n_fwd] - times[s])
        seeds = find_local_extrema(vol.scalars[anomaly_variable], vol.grid, time_step=s)
        for seed in seeds:
            lines.append(
                integrate_pathline(
                    series,
                    seed,
                    t0=float(times[s]),
                    duration=duration,
                    dt=spacing / RK4_SUBSTEPS,
                    spawn_step=s,
                )
            )
    return lines


def write_mpath(lines) -> bytes:
    """MPATH: magic, MVOL-style scalar-name table, u32 line count, then per
    line u32 vertex count, u32 spawn step, f32 (x, y, z, time, age, scalars)."""
    names = sorted(lines[0].scalars) if lines else []
    parts = [MPATH_MAGIC, struct.pack("<H", len(names))]
    for name in names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<I", len(lines)))
    for line in lines:
        n = line.vertex_count
        parts.append(struct.pack("<II", n, line.spawn_step))
        rec = np.empty((n, 5 + len(names)), dtype="<f4")
        rec[:, 0:3] = line.positions
        rec[:, 3] = line.times
        rec[:, 4] = line.ages
        for c, name in enumerate(names, start=5):
            rec[:, c] = line.scalars[name]
        parts.append(rec.tobytes())
    return b"".join(parts)


def read_mpath(data: bytes):
    if data[: len(MPATH_MAGIC)] != MPATH_MAGIC:
        raise ValueError("bad MPATH magic")
    off = len(MPATH_MAGIC)
    (n_names,) = struct.unpack_from("<H", data, off)
    off += 2
    names = []
    for _ in range(n_names):
        (ln,) = struct.unpack_from("<H", data, off)
        off += 2
        names.append(data[off : off + ln].decode("utf-8"))
        off += ln
    (n_lines,) = struct.unpack_from("<I", data, off)
    off += 4
    lines = []
    for _ in range(n_lines):
        n, spawn = struct.unpack_from("<II", data, off)
        off += 8
        rec = np.frombuffer(data, dtype="<f4", count=n * (5 + n_names), offset=off)
        rec = rec.reshape(n, 5 + n_names)
        off += rec.nbytes
        scalars = {name: rec[:, 5 + c].astype(np.float64) for c, name in enumerate(names)}
        seed = CriticalPoint(
            node_index=-1,
            position=tuple(rec[0, 0:3].astype(np.float64)),
            kind="maximum",
            value=0.0,
            time_step=spawn,
        )
        lines.append(
            Pathline(
                seed=seed,
                spawn_step=spawn,
                positions=rec[:, 0:3].astype(np.float64),
                times=rec[:, 3].astype(np.float64),
                ages=rec[:, 4].astype(np.float64),
                scalars=scalars,
            )
        )
    return lines
