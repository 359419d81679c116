import { describe, expect, it } from "vitest";

import { parseSampleCsv, rowToObject } from "./csv.js";

describe("parseSampleCsv", () => {
  it("parses header and numeric rows", () => {
    const table = parseSampleCsv("a,b,c\n1,2,3\n4.5,-6,7e2\n");
    expect(table.columns).toEqual(["a", "b", "c"]);
    expect(table.rows.length).toBe(2);
    expect(Array.from(table.rows[1])).toEqual([4.5, -6, 700]);
  });

  it("handles an empty document and trailing blank lines", () => {
    expect(parseSampleCsv("").rows).toEqual([]);
    expect(parseSampleCsv("x\n1\n\n\n").rows.length).toBe(1);
  });

  it("maps a row back to named values", () => {
    const table = parseSampleCsv("depth,temp\n700,-250\n");
    expect(rowToObject(table, 0)).toEqual({ depth: 700, temp: -250 });
  });
});
