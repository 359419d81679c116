"""Parallel-coordinates selection model: per-variable closed intervals.

A BrushSet maps variable names (scalars, derived variables, or the spatial
axes x, y, z, depth) to closed [lo, hi] intervals; absent variables are
unrestricted.  Brush snapshots are immutable; every mutation produces a new
snapshot with a strictly larger generation, so concurrent readers always see
a consistent selection.

"Negative"/"positive" task bounds from the contest write-up are encoded as
closed intervals at 0 (the boundary has measure zero in the data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType


class MissingVariable(KeyError):
    pass


class UnknownPreset(KeyError):
    pass


def _normalize(lo, hi):
    lo = None if lo is None or lo == float("-inf") else float(lo)
    hi = None if hi is None or hi == float("inf") else float(hi)
    if lo is not None and hi is not None and lo > hi:
        raise ValueError(f"empty interval: lo={lo} > hi={hi}")
    return lo, hi


@dataclass(frozen=True)
class BrushSet:
    entries: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    generation: int = 0

    @classmethod
    def create(cls, intervals=None, generation=0):
        entries = {}
        for name, (lo, hi) in (intervals or {}).items():
            entries[name] = _normalize(lo, hi)
        return cls(entries=MappingProxyType(entries), generation=generation)

    def with_interval(self, name, lo, hi):
        entries = dict(self.entries)
        entries[name] = _normalize(lo, hi)
        return BrushSet(entries=MappingProxyType(entries), generation=self.generation + 1)

    def without(self, name):
        entries = {k: v for k, v in self.entries.items() if k != name}
        return BrushSet(entries=MappingProxyType(entries), generation=self.generation + 1)

    def restricted_variables(self):
        return sorted(self.entries)

    def interval(self, name):
        return self.entries.get(name)

    def evaluate(self, values) -> bool:
        """True iff every restricted variable's value lies in its closed
        interval.  Raises MissingVariable when a restricted variable is
        absent from `values`."""
        for name, (lo, hi) in self.entries.items():
            if name not in values:
                raise MissingVariable(name)
            v = values[name]
            if lo is not None and v < lo:
                return False
            if hi is not None and v > hi:
                return False
        return True

    def to_json_obj(self):
        """{"var": [lo, hi]} with null for unbounded ends; round-trips exactly."""
        return {name: [lo, hi] for name, (lo, hi) in sorted(self.entries.items())}

    @classmethod
    def from_json_obj(cls, obj, generation=0):
        return cls.create({name: (pair[0], pair[1]) for name, pair in obj.items()}, generation)

    def same_intervals(self, other) -> bool:
        return dict(self.entries) == dict(other.entries)


def evaluate(b: BrushSet, values) -> bool:
    return b.evaluate(values)


@dataclass(frozen=True)
class TaskPreset:
    id: str
    brush: BrushSet
    color_variable: str


_PRESET_CACHE = {}


def preset_ids():
    root = resources.files("mantlevis") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def preset(preset_id: str) -> TaskPreset:
    """Load a shipped task preset by id (task1..task4, task5_* variants)."""
    if preset_id not in _PRESET_CACHE:
        path = resources.files("mantlevis") / "presets" / f"{preset_id}.json"
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UnknownPreset(preset_id) from None
        _PRESET_CACHE[preset_id] = TaskPreset(
            id=preset_id,
            brush=BrushSet.from_json_obj(obj["brush"]),
            color_variable=obj["color_variable"],
        )
    return _PRESET_CACHE[preset_id]


def filter_pathlines(lines, volume_brush: BrushSet, line_brush: BrushSet, current_step, window=10):
    """Lines spawned in (current-window, current] whose seed-vertex values
    satisfy both the volume brush and the pathline refinement brush."""
    kept = []
    for line in lines:
        if not (current_step - window < line.spawn_step <= current_step):
            continue
        values = {name: float(vals[0]) for name, vals in line.scalars.items()}
        values["x"], values["y"], values["z"] = (float(c) for c in line.positions[0])
        if volume_brush.evaluate(values) and line_brush.evaluate(values):
            kept.append(line)
    return kept
