import { describe, expect, it } from "vitest";

import { TfEditorModel } from "./tf.js";

describe("TfEditorModel", () => {
  it("keeps points sorted while a point is dragged past a neighbor", () => {
    const tf = new TfEditorModel("temp_anomaly", [
      { value: -100, rgba: [0, 0, 1, 0.5] },
      { value: 0, rgba: [1, 1, 1, 0.5] },
      { value: 100, rgba: [1, 0, 0, 0.5] },
    ]);
    const idx = tf.dragPoint(0, 50); // drag the blue point past the white one
    const values = tf.points.map((p) => p.value);
    expect(values).toEqual([...values].sort((a, b) => a - b));
    expect(tf.points[idx].rgba[0]).toBe(0); // still the blue point
    expect(tf.points[idx].value).toBe(50);
  });

  it("nudges duplicate values apart so the map stays strictly increasing", () => {
    const tf = new TfEditorModel("t", [
      { value: 1, rgba: [0, 0, 0, 1] },
      { value: 1, rgba: [1, 1, 1, 1] },
    ]);
    expect(tf.points[1].value).toBeGreaterThan(tf.points[0].value);
  });

  it("never drops below two points", () => {
    const tf = TfEditorModel.diverging("t", 0, 10);
    tf.removePoint(0);
    expect(tf.points.length).toBe(2);
    tf.removePoint(0);
    expect(tf.points.length).toBe(2);
  });

  it("builds a three-point diverging map over a signed range", () => {
    const tf = TfEditorModel.diverging("temp_anomaly", -500, 800);
    expect(tf.points.map((p) => p.value)).toEqual([-500, 0, 800]);
  });

  it("serializes to the wire shape", () => {
    const tf = TfEditorModel.diverging("temp_anomaly", -1, 1);
    const json = tf.toJson();
    expect(json.variable).toBe("temp_anomaly");
    expect(json.points.length).toBe(3);
    expect(json.points[0][0]).toBe(-1);
    expect(json.points[0][1].length).toBe(4);
    expect(json.opacity_scale).toBeGreaterThan(0);
  });

  it("clamps dragged alpha into [0, 1]", () => {
    const tf = TfEditorModel.diverging("t", 0, 1);
    tf.dragPoint(0, 0, 7);
    expect(tf.points[0].rgba[3]).toBe(1);
    tf.dragPoint(0, 0, -3);
    expect(tf.points[0].rgba[3]).toBe(0);
  });
});
