/**
 * CSV reader for gibbslab reports: `#`-prefixed lines are metadata comments,
 * the first remaining line is the header.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export class CsvError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((l) => l.trim().length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new CsvError("CSV has no header row");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((l) => l.split(",").map((c) => c.trim()));
  if (rows.length === 0) {
    throw new CsvError("CSV has a header but no data rows");
  }
  for (const [i, row] of rows.entries()) {
    if (row.length !== header.length) {
      throw new CsvError(
        `row ${i + 1} has ${row.length} fields, header has ${header.length}`,
      );
    }
  }
  return { header, rows };
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.header.includes(col)) {
      throw new CsvError(
        `missing required column '${col}' (have: ${table.header.join(", ")})`,
      );
    }
  }
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new CsvError(`no column '${name}'`);
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new CsvError(`column '${name}' row ${i + 1} is not numeric: '${row[idx]}'`);
    }
    return v;
  });
}

export function stringColumn(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new CsvError(`no column '${name}'`);
  return table.rows.map((row) => row[idx]);
}
