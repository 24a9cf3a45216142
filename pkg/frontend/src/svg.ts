/**
 * Minimal SVG scene builder and axis helpers. No DOM, no dependencies; the
 * output is a standalone SVG document string.
 */

export type Attrs = { [key: string]: string | number };

function escapeXml(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function attrString(attrs: Attrs): string {
  return Object.entries(attrs)
    .map(([k, v]) => ` ${k}="${typeof v === 'number' ? fmt(v) : escapeXml(v)}"`)
    .join('');
}

/** Compact numeric formatting for attributes and tick labels. */
export function fmt(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  if (v !== 0 && (Math.abs(v) >= 1e6 || Math.abs(v) < 1e-3)) {
    return v.toExponential(2).replace(/\.?0+e/, 'e');
  }
  const rounded = Math.round(v * 1000) / 1000;
  return String(rounded);
}

export class SvgDoc {
  private parts: string[] = [];

  // Multiplies the rendered width/height attributes (dpi / 96); the viewBox
  // and all coordinates stay in base units.
  displayScale = 1;

  constructor(readonly width: number, readonly height: number) {}

  el(tag: string, attrs: Attrs, text?: string): void {
    if (text === undefined) {
      this.parts.push(`<${tag}${attrString(attrs)}/>`);
    } else {
      this.parts.push(`<${tag}${attrString(attrs)}>${escapeXml(text)}</${tag}>`);
    }
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: Attrs = {}): void {
    this.el('line', { x1, y1, x2, y2, stroke: '#333', ...attrs });
  }

  rect(x: number, y: number, w: number, h: number, attrs: Attrs = {}): void {
    this.el('rect', { x, y, width: w, height: h, ...attrs });
  }

  circle(cx: number, cy: number, r: number, attrs: Attrs = {}): void {
    this.el('circle', { cx, cy, r, ...attrs });
  }

  polyline(points: [number, number][], attrs: Attrs = {}): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    this.el('polyline', { points: pts, fill: 'none', stroke: '#333', ...attrs });
  }

  text(x: number, y: number, s: string, attrs: Attrs = {}): void {
    this.el('text', { x, y, 'font-family': 'sans-serif', 'font-size': 11, ...attrs }, s);
  }

  toString(): string {
    const w = fmt(this.width * this.displayScale);
    const h = fmt(this.height * this.displayScale);
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${w}" ` +
      `height="${h}" viewBox="0 0 ${this.width} ${this.height}">` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="#ffffff"/>` +
      this.parts.join('') +
      `</svg>`
    );
  }
}

export type Scale = (v: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) * (r1 - r0)) / span;
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const l0 = Math.log10(d0);
  const span = Math.log10(d1) - l0 || 1;
  return (v) => r0 + ((Math.log10(v) - l0) * (r1 - r0)) / span;
}

/** Round-numbered ticks (1/2/5 times a power of ten) covering [lo, hi]. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const rawStep = (hi - lo) / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

/** Powers of ten inside [lo, hi], for log axes. */
export function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    out.push(Math.pow(10, e));
  }
  if (out.length === 0) out.push(lo);
  return out;
}

export interface Panel {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface AxisSpec {
  panel: Panel;
  xScale: Scale;
  yScale: Scale;
  xTicks: number[];
  yTicks: number[];
  xLabel: string;
  yLabel: string;
  title?: string;
}

/** Frame a panel: border, ticks with labels, axis titles. */
export function drawAxes(svg: SvgDoc, spec: AxisSpec): void {
  const { panel, xScale, yScale, xTicks, yTicks, xLabel, yLabel, title } = spec;
  const x1 = panel.x + panel.width;
  const y1 = panel.y + panel.height;
  svg.rect(panel.x, panel.y, panel.width, panel.height, {
    fill: 'none',
    stroke: '#333',
    'stroke-width': 1,
  });
  for (const t of xTicks) {
    const px = xScale(t);
    if (px < panel.x - 0.5 || px > x1 + 0.5) continue;
    svg.line(px, y1, px, y1 + 4);
    svg.text(px, y1 + 16, fmt(t), { 'text-anchor': 'middle' });
  }
  for (const t of yTicks) {
    const py = yScale(t);
    if (py < panel.y - 0.5 || py > y1 + 0.5) continue;
    svg.line(panel.x - 4, py, panel.x, py);
    svg.text(panel.x - 7, py + 4, fmt(t), { 'text-anchor': 'end' });
  }
  svg.text(panel.x + panel.width / 2, y1 + 32, xLabel, { 'text-anchor': 'middle' });
  svg.el(
    'text',
    {
      x: panel.x - 40,
      y: panel.y + panel.height / 2,
      'font-family': 'sans-serif',
      'font-size': 11,
      'text-anchor': 'middle',
      transform: `rotate(-90 ${panel.x - 40} ${panel.y + panel.height / 2})`,
    },
    yLabel
  );
  if (title) {
    svg.text(panel.x + panel.width / 2, panel.y - 8, title, {
      'text-anchor': 'middle',
      'font-size': 13,
    });
  }
}

// Color-blind-safe qualitative palette.
export const PALETTE = [
  '#0072b2',
  '#d55e00',
  '#009e73',
  '#cc79a7',
  '#e69f00',
  '#56b4e9',
  '#f0e442',
  '#999999',
];

export function color(i: number): string {
  return PALETTE[i % PALETTE.length] as string;
}
