/** Transfer-function editor model: draggable (value, color, alpha) points.
 *
 * Points are re-sorted by value after every edit so the serialized form is
 * always a valid strictly-increasing piecewise-linear map.
 */

import type { TfJson, TfPoint } from "./protocol.js";

const MIN_GAP = 1e-9;

export class TfEditorModel {
  points: TfPoint[];

  constructor(
    public variable: string,
    points: TfPoint[],
    public opacityScale = 0.004,
  ) {
    this.points = [...points];
    this.normalize();
  }

  static diverging(variable: string, lo: number, hi: number): TfEditorModel {
    if (lo < 0 && 0 < hi) {
      return new TfEditorModel(variable, [
        { value: lo, rgba: [0.1, 0.2, 1.0, 0.8] },
        { value: 0, rgba: [1.0, 1.0, 1.0, 0.8] },
        { value: hi, rgba: [1.0, 0.15, 0.1, 0.8] },
      ]);
    }
    if (hi <= lo) hi = lo + 1;
    return new TfEditorModel(variable, [
      { value: lo, rgba: [0.2, 0.2, 0.25, 0.8] },
      { value: hi, rgba: [1.0, 1.0, 1.0, 0.8] },
    ]);
  }

  addPoint(p: TfPoint): void {
    this.points.push({ value: p.value, rgba: [...p.rgba] });
    this.normalize();
  }

  removePoint(index: number): void {
    if (this.points.length <= 2) return; // keep the map valid
    this.points.splice(index, 1);
  }

  /** Drag a point to a new value/alpha; returns its index after sorting. */
  dragPoint(index: number, value: number, alpha?: number): number {
    const p = this.points[index];
    p.value = value;
    if (alpha !== undefined) p.rgba[3] = Math.max(0, Math.min(1, alpha));
    this.normalize();
    return this.points.indexOf(p);
  }

  setColor(index: number, r: number, g: number, b: number): void {
    const p = this.points[index];
    p.rgba = [r, g, b, p.rgba[3]];
  }

  private normalize(): void {
    this.points.sort((a, b) => a.value - b.value);
    // nudge exact duplicates apart so values stay strictly increasing
    for (let i = 1; i < this.points.length; i++) {
      if (this.points[i].value <= this.points[i - 1].value) {
        this.points[i].value = this.points[i - 1].value + MIN_GAP;
      }
    }
  }

  toJson(): TfJson {
    return {
      variable: this.variable,
      points: this.points.map((p) => [p.value, [...p.rgba] as [number, number, number, number]]),
      opacity_scale: this.opacityScale,
    };
  }
}
