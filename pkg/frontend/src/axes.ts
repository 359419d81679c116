/** Axis models for the parallel-coordinates plots.
 *
 * Each axis shows one variable over its data range and optionally carries a
 * brush interval. Brushes are always clamped into the displayed range, so the
 * interval-subset invariant holds by construction. Null bounds mean
 * "unbounded" and survive the JSON round trip unchanged.
 */

import type { BrushJson, Interval } from "./protocol.js";

export interface AxisModel {
  variable: string;
  lo: number;
  hi: number;
  brush: Interval | null;
  order: number;
}

export class AxisSet {
  axes: AxisModel[] = [];

  static fromRanges(ranges: Record<string, [number, number]>, order?: string[]): AxisSet {
    const s = new AxisSet();
    const names = order ?? Object.keys(ranges).sort();
    names.forEach((variable, i) => {
      const r = ranges[variable];
      if (!r) return;
      s.axes.push({ variable, lo: r[0], hi: r[1], brush: null, order: i });
    });
    return s;
  }

  byName(variable: string): AxisModel | undefined {
    return this.axes.find((a) => a.variable === variable);
  }

  visible(): AxisModel[] {
    return [...this.axes].sort((a, b) => a.order - b.order);
  }

  /** Client-local reordering; never triggers a server round trip. */
  moveAxis(variable: string, newIndex: number): void {
    const ordered = this.visible().filter((a) => a.variable !== variable);
    const moved = this.byName(variable);
    if (!moved) return;
    ordered.splice(Math.max(0, Math.min(newIndex, ordered.length)), 0, moved);
    ordered.forEach((a, i) => (a.order = i));
  }

  setBrush(variable: string, lo: number | null, hi: number | null): void {
    const axis = this.byName(variable);
    if (!axis) throw new Error(`no axis for ${variable}`);
    if (lo !== null && hi !== null && lo > hi) [lo, hi] = [hi, lo];
    // clamp into the displayed range: brush interval stays a subset
    const clampedLo = lo === null ? null : Math.max(axis.lo, Math.min(lo, axis.hi));
    const clampedHi = hi === null ? null : Math.max(axis.lo, Math.min(hi, axis.hi));
    axis.brush = [clampedLo, clampedHi];
  }

  clearBrush(variable: string): void {
    const axis = this.byName(variable);
    if (axis) axis.brush = null;
  }

  clearAll(): void {
    for (const a of this.axes) a.brush = null;
  }

  /** Serialize for set_brush; axes without a brush are simply absent. */
  toBrushJson(): BrushJson {
    const out: BrushJson = {};
    for (const a of this.axes) {
      if (a.brush) out[a.variable] = [a.brush[0], a.brush[1]];
    }
    return out;
  }

  /** Adopt server-side brushes, e.g. after apply_preset or a reconnect. */
  applyBrushJson(brush: BrushJson): void {
    this.clearAll();
    for (const [variable, [lo, hi]] of Object.entries(brush)) {
      const axis = this.byName(variable);
      if (axis) {
        axis.brush = [lo, hi];
      }
    }
  }

  /** Closed-interval test mirroring the server's sample predicate. */
  accepts(row: Record<string, number>): boolean {
    for (const a of this.axes) {
      if (!a.brush) continue;
      const v = row[a.variable];
      if (v === undefined) return false;
      const [lo, hi] = a.brush;
      if (lo !== null && v < lo) return false;
      if (hi !== null && v > hi) return false;
    }
    return true;
  }
}

export function sameBrush(a: BrushJson, b: BrushJson): boolean {
  const ka = Object.keys(a).sort();
  const kb = Object.keys(b).sort();
  if (ka.length !== kb.length) return false;
  return ka.every(
    (k, i) => k === kb[i] && a[k][0] === b[k][0] && a[k][1] === b[k][1],
  );
}
