/** Parallel-coordinates plot on a canvas with per-axis interval brushes.
 *
 * Geometry and highlight logic are plain functions; the widget wires them to
 * pointer events and a debounced brush callback (100 ms), so drags do not
 * flood the server.
 */

import { AxisSet } from "./axes.js";
import type { SampleTable } from "./csv.js";
import { debounce } from "./debounce.js";

export const BRUSH_DEBOUNCE_MS = 100;

export interface PlotLayout {
  width: number;
  height: number;
  top: number;
  bottom: number;
  axisX: Map<string, number>;
}

export function layoutAxes(axes: AxisSet, width: number, height: number): PlotLayout {
  const visible = axes.visible();
  const axisX = new Map<string, number>();
  const pad = 42;
  const span = Math.max(1, visible.length - 1);
  visible.forEach((a, i) => {
    axisX.set(a.variable, pad + ((width - 2 * pad) * i) / span);
  });
  return { width, height, top: 18, bottom: height - 24, axisX };
}

/** Screen y for a value on one axis (top = max). */
export function valueToY(
  layout: PlotLayout,
  lo: number,
  hi: number,
  value: number,
): number {
  const t = hi > lo ? (value - lo) / (hi - lo) : 0.5;
  return layout.bottom - t * (layout.bottom - layout.top);
}

export function yToValue(layout: PlotLayout, lo: number, hi: number, y: number): number {
  const t = (layout.bottom - y) / (layout.bottom - layout.top);
  return lo + Math.max(0, Math.min(1, t)) * (hi - lo);
}

/** Highlight flags for every row: true = passes all axis brushes. */
export function highlightRows(axes: AxisSet, table: SampleTable): boolean[] {
  const cols = table.columns;
  const brushed = axes.axes.filter((a) => a.brush !== null);
  const lookup = brushed.map((a) => ({ a, c: cols.indexOf(a.variable) }));
  return table.rows.map((row) => {
    for (const { a, c } of lookup) {
      if (c < 0) return false;
      const v = row[c];
      const [lo, hi] = a.brush as [number | null, number | null];
      if (lo !== null && v < lo) return false;
      if (hi !== null && v > hi) return false;
    }
    return true;
  });
}

interface DragState {
  variable: string;
  startY: number;
}

export class ParcoordsWidget {
  private drag: DragState | null = null;
  private emitBrush: (brush: Record<string, [number | null, number | null]>) => void;

  constructor(
    private canvas: HTMLCanvasElement,
    public axes: AxisSet,
    public table: SampleTable,
    onBrush: (brush: Record<string, [number | null, number | null]>) => void,
  ) {
    this.emitBrush = debounce(onBrush, BRUSH_DEBOUNCE_MS);
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    canvas.addEventListener("dblclick", (e) => this.doubleClick(e));
  }

  setTable(table: SampleTable): void {
    this.table = table;
    this.draw();
  }

  private layout(): PlotLayout {
    return layoutAxes(this.axes, this.canvas.width, this.canvas.height);
  }

  private axisAt(x: number): string | null {
    const layout = this.layout();
    let best: string | null = null;
    let bestDist = 14;
    for (const [name, ax] of layout.axisX) {
      const d = Math.abs(ax - x);
      if (d < bestDist) {
        best = name;
        bestDist = d;
      }
    }
    return best;
  }

  private pointerDown(e: PointerEvent): void {
    const name = this.axisAt(e.offsetX);
    if (!name) return;
    this.canvas.setPointerCapture(e.pointerId);
    this.drag = { variable: name, startY: e.offsetY };
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    this.updateBrushFromDrag(e.offsetY);
  }

  private pointerUp(e: PointerEvent): void {
    if (!this.drag) return;
    this.updateBrushFromDrag(e.offsetY);
    this.drag = null;
  }

  private doubleClick(e: MouseEvent): void {
    const name = this.axisAt(e.offsetX);
    if (!name) return;
    this.axes.clearBrush(name);
    this.emitBrush(this.axes.toBrushJson());
    this.draw();
  }

  private updateBrushFromDrag(y: number): void {
    const drag = this.drag as DragState;
    const axis = this.axes.byName(drag.variable);
    if (!axis) return;
    const layout = this.layout();
    const a = yToValue(layout, axis.lo, axis.hi, drag.startY);
    const b = yToValue(layout, axis.lo, axis.hi, y);
    this.axes.setBrush(drag.variable, Math.min(a, b), Math.max(a, b));
    this.emitBrush(this.axes.toBrushJson());
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const layout = this.layout();
    ctx.clearRect(0, 0, layout.width, layout.height);

    const highlight = highlightRows(this.axes, this.table);
    const visible = this.axes.visible();
    const cols = visible.map((a) => this.table.columns.indexOf(a.variable));

    // dimmed lines first, highlighted on top
    for (const pass of [false, true]) {
      ctx.strokeStyle = pass ? "rgba(70,140,255,0.5)" : "rgba(140,140,140,0.08)";
      ctx.beginPath();
      this.table.rows.forEach((row, r) => {
        if (highlight[r] !== pass) return;
        visible.forEach((axis, i) => {
          const c = cols[i];
          if (c < 0) return;
          const x = layout.axisX.get(axis.variable) as number;
          const y = valueToY(layout, axis.lo, axis.hi, row[c]);
          if (i === 0) ctx.moveTo(x, y);
          else ctx.lineTo(x, y);
        });
      });
      ctx.stroke();
    }

    // axes, labels, brush handles
    ctx.strokeStyle = "#888";
    ctx.fillStyle = "#ccc";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "center";
    for (const axis of visible) {
      const x = layout.axisX.get(axis.variable) as number;
      ctx.beginPath();
      ctx.moveTo(x, layout.top);
      ctx.lineTo(x, layout.bottom);
      ctx.stroke();
      ctx.fillText(axis.variable, x, layout.height - 8);
      if (axis.brush) {
        const [lo, hi] = axis.brush;
        const y0 = valueToY(layout, axis.lo, axis.hi, hi ?? axis.hi);
        const y1 = valueToY(layout, axis.lo, axis.hi, lo ?? axis.lo);
        ctx.fillStyle = "rgba(70,140,255,0.25)";
        ctx.fillRect(x - 6, y0, 12, Math.max(2, y1 - y0));
        ctx.fillStyle = "#ccc";
      }
    }
  }
}
