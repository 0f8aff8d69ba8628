// Readers for the documented adabatch output files. The plotter never
// recomputes theory quantities; it only consumes these schemas.

import { readFileSync } from 'fs';

export const TRACE_COLUMNS = ['iter', 'epochs', 'rel_error', 'tau', 'gamma', 'sigma', 'L'];
export const GRID_COLUMNS = ['tau', 'epochs'];

export interface TraceRow {
  iter: number;
  epochs: number;
  rel_error: number;
  tau: number;
  gamma: number;
  sigma: number;
  L: number;
}

export interface GridRow {
  tau: number;
  epochs: number;
}

export interface GridSummary {
  tau_star_theory: number;
  adaptive_epochs: number;
  [key: string]: unknown;
}

function parseCsv(path: string, expected: string[]): Record<string, number>[] {
  const text = readFileSync(path, 'utf8');
  const lines = text.split('\n').filter((l) => l.trim() !== '' && !l.startsWith('#'));
  if (lines.length === 0) throw new Error(`${path}: empty file`);
  const header = lines[0].split(',').map((h) => h.trim());
  for (const col of expected) {
    if (!header.includes(col)) {
      throw new Error(`${path}: missing column '${col}' (header: ${header.join(',')})`);
    }
  }
  const rows: Record<string, number>[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(',');
    if (parts.length !== header.length) {
      throw new Error(`${path}: row ${i + 1} has ${parts.length} fields, expected ${header.length}`);
    }
    const row: Record<string, number> = {};
    header.forEach((col, j) => {
      const v = Number(parts[j]);
      if (!Number.isFinite(v)) throw new Error(`${path}: row ${i + 1}: non-numeric '${parts[j]}' in ${col}`);
      row[col] = v;
    });
    rows.push(row);
  }
  if (rows.length === 0) throw new Error(`${path}: no data rows`);
  return rows;
}

export function readTrace(path: string): TraceRow[] {
  const rows = parseCsv(path, TRACE_COLUMNS) as unknown as TraceRow[];
  for (let i = 1; i < rows.length; i++) {
    if (rows[i].epochs < rows[i - 1].epochs) {
      throw new Error(`${path}: out-of-order rows (epochs decreases at row ${i + 2})`);
    }
  }
  return rows;
}

export function readGrid(path: string): GridRow[] {
  return parseCsv(path, GRID_COLUMNS) as unknown as GridRow[];
}

export function readGridSummary(path: string): GridSummary {
  const data = JSON.parse(readFileSync(path, 'utf8'));
  for (const key of ['tau_star_theory', 'adaptive_epochs']) {
    if (typeof data[key] !== 'number') {
      throw new Error(`${path}: missing numeric field '${key}'`);
    }
  }
  return data as GridSummary;
}
