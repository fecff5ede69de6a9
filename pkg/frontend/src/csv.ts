/** Minimal CSV reader for the report files: header row + plain numeric cells. */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = splitLine(lines[0]);
  const rows: Record<string, string>[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = splitLine(lines[i]);
    if (cells.length !== columns.length) {
      throw new Error(`malformed CSV: row ${i} has ${cells.length} cells, expected ${columns.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = cells[j]));
    rows.push(row);
  }
  return { columns, rows };
}

function splitLine(line: string): string[] {
  // the reports never quote commas, but tolerate simple quoted cells
  const out: string[] = [];
  let cur = "";
  let quoted = false;
  for (const ch of line) {
    if (ch === '"') {
      quoted = !quoted;
    } else if (ch === "," && !quoted) {
      out.push(cur);
      cur = "";
    } else {
      cur += ch;
    }
  }
  out.push(cur);
  return out.map((s) => s.trim());
}

/** Numeric column accessor; throws on non-numeric cells (malformed report). */
export function numbers(table: Table, column: string): number[] {
  if (!table.columns.includes(column)) {
    throw new Error(`missing column ${column}`);
  }
  return table.rows.map((r) => {
    const v = Number(r[column]);
    if (!Number.isFinite(v)) {
      throw new Error(`non-numeric value ${JSON.stringify(r[column])} in column ${column}`);
    }
    return v;
  });
}
