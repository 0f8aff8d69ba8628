// Minimal SVG chart scaffolding: linear/log scales, axes with ticks, and a
// string builder. Output is a pure function of the inputs (no randomness,
// no timestamps), so re-renders are byte-identical.

export interface Extent {
  min: number;
  max: number;
}

export class Scale {
  constructor(
    readonly domain: Extent,
    readonly range: Extent,
    readonly log: boolean = false,
  ) {
    if (log && domain.min <= 0) {
      throw new Error(`log scale needs positive domain, got [${domain.min}, ${domain.max}]`);
    }
  }

  private t(v: number): number {
    return this.log ? Math.log10(v) : v;
  }

  apply(v: number): number {
    const d0 = this.t(this.domain.min);
    const d1 = this.t(this.domain.max);
    const span = d1 - d0 || 1;
    const f = (this.t(v) - d0) / span;
    return this.range.min + f * (this.range.max - this.range.min);
  }

  ticks(count = 6): number[] {
    if (this.log) {
      const lo = Math.ceil(Math.log10(this.domain.min));
      const hi = Math.floor(Math.log10(this.domain.max));
      const out: number[] = [];
      for (let e = lo; e <= hi; e++) out.push(10 ** e);
      return out.length >= 2 ? out : [this.domain.min, this.domain.max];
    }
    const span = this.domain.max - this.domain.min || 1;
    const step = niceStep(span / count);
    const out: number[] = [];
    for (let v = Math.ceil(this.domain.min / step) * step; v <= this.domain.max + 1e-12; v += step) {
      out.push(Number(v.toPrecision(12)));
    }
    return out;
  }
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(raw));
  const r = raw / mag;
  if (r <= 1) return mag;
  if (r <= 2) return 2 * mag;
  if (r <= 5) return 5 * mag;
  return 10 * mag;
}

export function extent(values: number[], padFrac = 0.0): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!Number.isFinite(min)) throw new Error('empty extent');
  const pad = (max - min) * padFrac;
  return { min: min - pad, max: max + pad || max + 1 };
}

export function fmt(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(6)));
  return v.toExponential(0).replace('+', '');
}

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 42, right: 24, bottom: 48, left: 72 };

export class Chart {
  private parts: string[] = [];

  constructor(
    readonly x: Scale,
    readonly y: Scale,
    title: string,
    xLabel: string,
    yLabel: string,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15">${esc(title)}</text>`,
      `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="12">${esc(xLabel)}</text>`,
      `<text x="18" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 18 ${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2})">${esc(yLabel)}</text>`,
    );
    this.axes();
  }

  private axes(): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.parts.push(`<g stroke="#333" fill="none"><path d="M${x0},${y1} L${x0},${y0} L${x1},${y0}"/></g>`);
    for (const t of this.x.ticks()) {
      const px = r2(this.x.apply(t));
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333"/>`,
        `<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`,
      );
    }
    for (const t of this.y.ticks()) {
      const py = r2(this.y.apply(t));
      this.parts.push(
        `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333"/>`,
        `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${fmt(t)}</text>`,
        `<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#eee"/>`,
      );
    }
  }

  polyline(xs: number[], ys: number[], color: string, role: string, width = 1.8): void {
    const pts = xs.map((v, i) => `${r2(this.x.apply(v))},${r2(this.y.apply(ys[i]))}`).join(' ');
    this.parts.push(`<polyline data-role="${role}" points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"/>`);
  }

  steps(xs: number[], ys: number[], color: string, role: string): void {
    // step-after path for piecewise-constant series
    let d = `M${r2(this.x.apply(xs[0]))},${r2(this.y.apply(ys[0]))}`;
    for (let i = 1; i < xs.length; i++) {
      d += ` H${r2(this.x.apply(xs[i]))} V${r2(this.y.apply(ys[i]))}`;
    }
    this.parts.push(`<path data-role="${role}" d="${d}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
  }

  vline(x: number, color: string, role: string, label?: string): void {
    const px = r2(this.x.apply(x));
    this.parts.push(
      `<line data-role="${role}" x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${HEIGHT - MARGIN.bottom}" stroke="${color}" stroke-width="1.5" stroke-dasharray="6 4"/>`,
    );
    if (label) {
      this.parts.push(`<text x="${px + 4}" y="${MARGIN.top + 14}" font-size="11" fill="${color}">${esc(label)}</text>`);
    }
  }

  hline(y: number, color: string, role: string, label?: string): void {
    const py = r2(this.y.apply(y));
    this.parts.push(
      `<line data-role="${role}" x1="${MARGIN.left}" y1="${py}" x2="${WIDTH - MARGIN.right}" y2="${py}" stroke="${color}" stroke-width="1.5" stroke-dasharray="6 4"/>`,
    );
    if (label) {
      this.parts.push(`<text x="${WIDTH - MARGIN.right - 4}" y="${py - 6}" text-anchor="end" font-size="11" fill="${color}">${esc(label)}</text>`);
    }
  }

  legend(entries: Array<{ label: string; color: string }>): void {
    let y = MARGIN.top + 10;
    for (const e of entries) {
      this.parts.push(
        `<line x1="${WIDTH - MARGIN.right - 150}" y1="${y}" x2="${WIDTH - MARGIN.right - 126}" y2="${y}" stroke="${e.color}" stroke-width="2"/>`,
        `<text x="${WIDTH - MARGIN.right - 120}" y="${y + 4}" font-size="11">${esc(e.label)}</text>`,
      );
      y += 16;
    }
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

export function plotArea(): { x: Extent; y: Extent } {
  return {
    x: { min: MARGIN.left, max: WIDTH - MARGIN.right },
    y: { min: HEIGHT - MARGIN.bottom, max: MARGIN.top },
  };
}

function r2(v: number): number {
  return Math.round(v * 100) / 100;
}

function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}
