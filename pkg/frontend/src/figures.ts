// The three figure families: epochs-vs-tau V-curve with the theory tau*
// marker and the adaptive level, convergence curves, and the evolution of
// the adaptive batch size over training epochs.

import { writeFileSync } from 'fs';
import { basename } from 'path';

import { readGrid, readGridSummary, readTrace } from './csv.js';
import { Chart, Scale, extent, plotArea } from './svg.js';

export type FigureKind = 'vcurve' | 'convergence' | 'tau_evolution';

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];          // CSV paths (grid.csv / trace.csv)
  summary?: string;          // grid summary JSON (vcurve only)
  out: string;
  title?: string;
  logY?: boolean;
}

const SERIES_COLORS = ['#2e7d32', '#1565c0', '#c62828', '#6a1b9a', '#ef6c00'];

export function renderVCurve(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) throw new Error('vcurve takes exactly one grid CSV');
  if (!spec.summary) throw new Error('vcurve needs the grid summary JSON (--summary)');
  const grid = readGrid(spec.inputs[0]);
  const summary = readGridSummary(spec.summary);
  const area = plotArea();
  const taus = grid.map((r) => r.tau);
  const epochs = grid.map((r) => r.epochs);
  const yVals = epochs.concat([summary.adaptive_epochs]);
  const x = new Scale(extent(taus), area.x);
  const y = spec.logY
    ? new Scale({ min: Math.min(...yVals) / 1.5, max: Math.max(...yVals) * 1.5 }, area.y, true)
    : new Scale({ min: 0, max: Math.max(...yVals) * 1.05 }, area.y);
  const chart = new Chart(x, y, spec.title ?? 'Epochs to converge vs batch size',
    'batch size tau', 'epochs to target');
  chart.polyline(taus, epochs, SERIES_COLORS[0], 'grid-epochs');
  chart.vline(summary.tau_star_theory, '#ef6c00', 'tau-star', `tau* = ${summary.tau_star_theory}`);
  chart.hline(summary.adaptive_epochs, '#1565c0', 'adaptive-level',
    `adaptive = ${Number(summary.adaptive_epochs.toPrecision(4))}`);
  chart.legend([
    { label: 'fixed-batch SGD', color: SERIES_COLORS[0] },
    { label: 'adaptive', color: '#1565c0' },
  ]);
  return chart.render();
}

export function renderConvergence(spec: FigureSpec): string {
  if (spec.inputs.length === 0) throw new Error('convergence needs at least one trace CSV');
  const traces = spec.inputs.map((p) => ({ name: basename(p), rows: readTrace(p) }));
  const area = plotArea();
  const allEpochs = traces.flatMap((t) => t.rows.map((r) => r.epochs));
  const allRel = traces.flatMap((t) => t.rows.map((r) => Math.max(r.rel_error, 1e-300)));
  const x = new Scale(extent(allEpochs), area.x);
  const y = new Scale({ min: Math.min(...allRel) / 2, max: Math.max(...allRel) * 2 }, area.y, true);
  const chart = new Chart(x, y, spec.title ?? 'Convergence', 'epochs', 'relative error');
  traces.forEach((t, i) => {
    chart.polyline(t.rows.map((r) => r.epochs),
      t.rows.map((r) => Math.max(r.rel_error, 1e-300)),
      SERIES_COLORS[i % SERIES_COLORS.length], `trace-${i}`);
  });
  if (traces.length > 1) {
    chart.legend(traces.map((t, i) => ({ label: t.name, color: SERIES_COLORS[i % SERIES_COLORS.length] })));
  }
  return chart.render();
}

export function renderTauEvolution(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) throw new Error('tau_evolution takes exactly one trace CSV');
  const rows = readTrace(spec.inputs[0]);
  const area = plotArea();
  const x = new Scale(extent(rows.map((r) => r.epochs)), area.x);
  const y = new Scale({ min: 0, max: Math.max(...rows.map((r) => r.tau)) * 1.1 }, area.y);
  const chart = new Chart(x, y, spec.title ?? 'Adaptive batch size over training',
    'epochs', 'batch size tau');
  chart.steps(rows.map((r) => r.epochs), rows.map((r) => r.tau), SERIES_COLORS[1], 'tau-steps');
  return chart.render();
}

export function render(spec: FigureSpec): void {
  let svg: string;
  switch (spec.kind) {
    case 'vcurve':
      svg = renderVCurve(spec);
      break;
    case 'convergence':
      svg = renderConvergence(spec);
      break;
    case 'tau_evolution':
      svg = renderTauEvolution(spec);
      break;
    default:
      throw new Error(`unknown figure kind '${spec.kind}'`);
  }
  writeFileSync(spec.out, svg);
}
