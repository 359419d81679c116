/** Parse the sample-table CSV (header row of column names, numeric rows). */

export interface SampleTable {
  columns: string[];
  rows: Float64Array[];
}

export function parseSampleCsv(text: string): SampleTable {
  const lines = text.split("\n").filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) return { columns: [], rows: [] };
  const columns = lines[0].split(",");
  const rows: Float64Array[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    const row = new Float64Array(columns.length);
    for (let c = 0; c < columns.length; c++) row[c] = Number(parts[c]);
    rows.push(row);
  }
  return { columns, rows };
}

export function rowToObject(table: SampleTable, index: number): Record<string, number> {
  const out: Record<string, number> = {};
  table.columns.forEach((name, c) => (out[name] = table.rows[index][c]));
  return out;
}
