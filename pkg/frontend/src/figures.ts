/**
 * The nine figure families rendered from a study report.
 *
 * Split per family into an extractor and a renderer. Extractors return
 * references straight into the report object (no copies, no rescaling), so
 * tests can assert that what gets plotted is the report section verbatim.
 * Renderers turn extracted data into standalone SVG strings and never write
 * back into the report; renderFigure() checks that with a before/after
 * serialization of the whole report.
 *
 * Per-day families tolerate individual skipped days (real streams often have
 * a degenerate day 0) and fail with MissingSectionError only when no day is
 * usable.
 */

import {
  ActivityKindSection,
  FlowSection,
  InfluenceSection,
  MemorySection,
  StructureSection,
  StudyReport,
  WeightSection,
  XY,
  isSkipped,
  requireSection,
  MissingSectionError,
  LocationRow,
  CurveSection,
} from './report.js';
import {
  AxisSpec,
  Panel,
  SvgDoc,
  color,
  drawAxes,
  fmt,
  linearScale,
  logScale,
  logTicks,
  ticks,
} from './svg.js';

export const FIGURE_KINDS = [
  'activity',
  'structures',
  'memory',
  'ccdf',
  'weights',
  'flow',
  'heatmap',
  'decay',
  'surrogate',
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureStyle {
  width?: number;
  height?: number;
  dpi?: number; // scales the rendered size; coordinates stay in base units
}

export interface FigureSpec {
  kind: FigureKind;
  reportPath: string;
  outPath: string;
  style?: FigureStyle;
}

const KIND_ORDER = ['post', 'retweet', 'reply', 'quote'];
const STRUCTURE_LABELS = ['Con', 'C_S', 'Sel', 'S_R', 'Rec', 'R_C', 'CSR'];

// ---------------------------------------------------------------- extractors

export interface DaySeries<T> {
  day: number;
  section: T;
}

function usableDays<T>(
  report: StudyReport,
  name: string,
  pick: (d: StudyReport['days'][number]) => T | { skipped: string }
): DaySeries<T>[] {
  const out: DaySeries<T>[] = [];
  for (const dayReport of report.days) {
    const section = pick(dayReport);
    if (!isSkipped(section)) {
      out.push({ day: dayReport.day, section: section as T });
    }
  }
  if (out.length === 0) {
    throw new MissingSectionError(name, 'no usable day in the report');
  }
  return out;
}

export function extractActivity(
  report: StudyReport
): { day: number; kind: string; section: ActivityKindSection }[] {
  const days = usableDays(report, 'activity', (d) => d.activity);
  const out: { day: number; kind: string; section: ActivityKindSection }[] = [];
  for (const { day, section } of days) {
    for (const kind of KIND_ORDER) {
      const entry = section.kinds[kind];
      if (entry !== undefined && !isSkipped(entry)) {
        out.push({ day, kind, section: entry });
      }
    }
  }
  if (out.length === 0) {
    throw new MissingSectionError('activity', 'every kind skipped on every day');
  }
  return out;
}

export function extractStructures(report: StudyReport): DaySeries<StructureSection>[] {
  return usableDays(report, 'structures', (d) => d.structures);
}

export function extractMemory(report: StudyReport): DaySeries<MemorySection>[] {
  return usableDays(report, 'memory', (d) => d.memory);
}

export function extractInfluence(report: StudyReport): DaySeries<InfluenceSection>[] {
  return usableDays(report, 'influence', (d) => d.influence);
}

export function extractWeights(report: StudyReport): DaySeries<WeightSection>[] {
  return usableDays(report, 'weights', (d) => d.weights);
}

export function extractFlows(report: StudyReport): DaySeries<FlowSection>[] {
  return usableDays(report, 'flows', (d) => d.flows);
}

export interface HeatmapData {
  locations: LocationRow[];
  freq: number[][];
  resp: (number | null)[][] | null; // null when the response section is skipped
}

export function extractHeatmap(report: StudyReport): HeatmapData {
  const spatial = requireSection(report.spatial, 'spatial');
  const resp = isSkipped(report.response) ? null : report.response.resp_matrix;
  return { locations: spatial.locations, freq: spatial.freq_matrix, resp };
}

export interface DecayData {
  cityKm: number;
  stateKm: number;
  freqCurve: CurveSection;
  respCurve: CurveSection | null;
}

export function extractDecay(report: StudyReport): DecayData {
  const spatial = requireSection(report.spatial, 'spatial');
  return {
    cityKm: spatial.city_km,
    stateKm: spatial.state_km,
    freqCurve: spatial.freq_curve,
    respCurve: isSkipped(report.response) ? null : report.response.resp_curve,
  };
}

export interface SurrogateData {
  locations: LocationRow[];
  freqEdges: [number, number, number][];
  respEdges: [number, number, number][] | null;
}

export function extractSurrogate(report: StudyReport): SurrogateData {
  const spatial = requireSection(report.spatial, 'spatial');
  return {
    locations: spatial.locations,
    freqEdges: spatial.surrogate_freq,
    respEdges: isSkipped(report.response) ? null : report.response.surrogate_resp,
  };
}

// ----------------------------------------------------------------- renderers

const MARGIN = { left: 64, right: 20, top: 40, bottom: 52 };

function panelGrid(
  width: number,
  height: number,
  rows: number,
  cols: number
): Panel[] {
  const innerW = (width - MARGIN.left - MARGIN.right - (cols - 1) * 70) / cols;
  const innerH = (height - MARGIN.top - MARGIN.bottom - (rows - 1) * 60) / rows;
  const panels: Panel[] = [];
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      panels.push({
        x: MARGIN.left + c * (innerW + 70),
        y: MARGIN.top + r * (innerH + 60),
        width: innerW,
        height: innerH,
      });
    }
  }
  return panels;
}

function newDoc(style: FigureStyle | undefined, baseW: number, baseH: number): SvgDoc {
  const doc = new SvgDoc(style?.width ?? baseW, style?.height ?? baseH);
  if (style?.dpi !== undefined && style.dpi > 0) {
    doc.displayScale = style.dpi / 96;
  }
  return doc;
}

function dayLegend(svg: SvgDoc, days: number[], x: number, y: number): void {
  days.forEach((day, i) => {
    const lx = x + i * 72;
    svg.line(lx, y, lx + 16, y, { stroke: color(i), 'stroke-width': 2 });
    svg.text(lx + 20, y + 4, `day ${day}`);
  });
}

function renderActivity(report: StudyReport, style?: FigureStyle): string {
  const series = extractActivity(report);
  const svg = newDoc(style, 980, 700);
  const panels = panelGrid(svg.width, svg.height, 2, 2);
  const days = [...new Set(series.map((s) => s.day))].sort((a, b) => a - b);

  KIND_ORDER.forEach((kind, k) => {
    const panel = panels[k]!;
    const curves = series.filter((s) => s.kind === kind);
    if (curves.length === 0) {
      svg.text(panel.x + panel.width / 2, panel.y + panel.height / 2, 'skipped', {
        'text-anchor': 'middle',
        fill: '#888',
      });
      svg.text(panel.x + panel.width / 2, panel.y - 8, kind, {
        'text-anchor': 'middle',
        'font-size': 13,
      });
      return;
    }
    const xs = curves.flatMap((c) => c.section.kde.map((p) => p[0]));
    const ys = curves.flatMap((c) => c.section.kde.map((p) => p[1]));
    const xScale = linearScale(
      Math.min(...xs),
      Math.max(...xs),
      panel.x,
      panel.x + panel.width
    );
    const yScale = linearScale(0, Math.max(...ys) * 1.05, panel.y + panel.height, panel.y);
    drawAxes(svg, {
      panel,
      xScale,
      yScale,
      xTicks: ticks(Math.min(...xs), Math.max(...xs)),
      yTicks: ticks(0, Math.max(...ys) * 1.05, 4),
      xLabel: 'transformed activity proportion',
      yLabel: 'density',
      title: kind,
    });
    for (const curve of curves) {
      const ci = days.indexOf(curve.day);
      svg.polyline(
        curve.section.kde.map(([x, y]: XY) => [xScale(x), yScale(y)]),
        { stroke: color(ci), 'stroke-width': 1.5 }
      );
    }
  });
  dayLegend(svg, days, MARGIN.left, 18);
  return svg.toString();
}

function renderStructures(report: StudyReport, style?: FigureStyle): string {
  const series = extractStructures(report);
  const svg = newDoc(style, 820, 520);
  const panel = panelGrid(svg.width, svg.height, 1, 1)[0]!;
  const xScale = linearScale(-0.5, series.length - 0.5, panel.x, panel.x + panel.width);
  const yScale = linearScale(0, 1, panel.y + panel.height, panel.y);
  drawAxes(svg, {
    panel,
    xScale,
    yScale,
    xTicks: series.map((_, i) => i),
    yTicks: ticks(0, 1, 5),
    xLabel: 'study day',
    yLabel: 'share of classified users',
    title: 'communication structure mix per day',
  });
  const slot = panel.width / series.length;
  series.forEach(({ section }, i) => {
    let cum = 0;
    STRUCTURE_LABELS.forEach((label, li) => {
      const share = (section[label] as number | undefined) ?? 0;
      if (share <= 0) return;
      const y0 = yScale(cum + share);
      const y1 = yScale(cum);
      svg.rect(xScale(i) - slot * 0.3, y0, slot * 0.6, y1 - y0, {
        fill: color(li),
        stroke: '#ffffff',
        'stroke-width': 0.5,
      });
      cum += share;
    });
  });
  STRUCTURE_LABELS.forEach((label, li) => {
    const lx = MARGIN.left + li * 88;
    svg.rect(lx, 12, 10, 10, { fill: color(li) });
    svg.text(lx + 14, 21, label);
  });
  return svg.toString();
}

function renderMemory(report: StudyReport, style?: FigureStyle): string {
  const series = extractMemory(report);
  const svg = newDoc(style, 820, 520);
  const panel = panelGrid(svg.width, svg.height, 1, 1)[0]!;
  const xScale = linearScale(-0.5, series.length - 0.5, panel.x, panel.x + panel.width);
  const yScale = linearScale(0, 1, panel.y + panel.height, panel.y);
  drawAxes(svg, {
    panel,
    xScale,
    yScale,
    xTicks: series.map((s) => s.day),
    yTicks: ticks(0, 1, 5),
    xLabel: 'study day',
    yLabel: 'never-seen share of active pairs',
    title: 'daily fresh-pair ratio',
  });
  const slot = panel.width / series.length;
  series.forEach(({ section }, i) => {
    if (section.ratio === null) {
      svg.text(xScale(i), yScale(0) - 6, 'n/a', { 'text-anchor': 'middle', fill: '#888' });
      return;
    }
    const y = yScale(section.ratio);
    svg.rect(xScale(i) - slot * 0.3, y, slot * 0.6, yScale(0) - y, {
      fill: color(0),
    });
    svg.text(xScale(i), y - 5, fmt(section.ratio), { 'text-anchor': 'middle' });
  });
  return svg.toString();
}

function renderCcdf(report: StudyReport, style?: FigureStyle): string {
  const series = extractInfluence(report);
  const svg = newDoc(style, 760, 560);
  const panel = panelGrid(svg.width, svg.height, 1, 1)[0]!;
  const points = series.flatMap((s) => s.section.ccdf);
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(...ys);
  const xScale = logScale(xLo, xHi, panel.x, panel.x + panel.width);
  const yScale = logScale(yLo, 1, panel.y + panel.height, panel.y);
  drawAxes(svg, {
    panel,
    xScale,
    yScale,
    xTicks: logTicks(xLo, xHi),
    yTicks: logTicks(yLo, 1),
    xLabel: 'normalized influence score',
    yLabel: 'Pr(score >= x)',
    title: 'influence score CCDF (log-log)',
  });
  series.forEach(({ section }, i) => {
    svg.polyline(
      section.ccdf.map(([x, y]: XY) => [xScale(x), yScale(y)]),
      { stroke: color(i), 'stroke-width': 1.5 }
    );
  });

  // Guide with the fitted tail slope, anchored at the last day's first tail point.
  const last = series[series.length - 1]!.section;
  const anchor = last.ccdf.find((p) => p[0] >= 1) ?? last.ccdf[0]!;
  const slope = -(last.alpha - 1);
  const guideY = (x: number) => anchor[1] * Math.pow(x / anchor[0], slope);
  const gx1 = xHi;
  svg.line(xScale(anchor[0]), yScale(anchor[1]), xScale(gx1), yScale(Math.max(guideY(gx1), yLo)), {
    stroke: '#555',
    'stroke-dasharray': '6 4',
  });
  svg.text(panel.x + panel.width - 8, panel.y + 16, `guide slope -(alpha-1) = ${fmt(slope)}`, {
    'text-anchor': 'end',
    fill: '#555',
  });
  dayLegend(svg, series.map((s) => s.day), MARGIN.left, 18);
  return svg.toString();
}

function renderWeights(report: StudyReport, style?: FigureStyle): string {
  const series = extractWeights(report);
  const svg = newDoc(style, 820, 560);
  const panel = panelGrid(svg.width, svg.height, 1, 1)[0]!;
  let wMax = 1;
  let cMax = 1;
  for (const { section } of series) {
    for (const [w, c] of Object.entries(section.histogram)) {
      wMax = Math.max(wMax, Number(w));
      cMax = Math.max(cMax, c);
    }
  }
  const xScale = linearScale(-0.5, series.length - 0.5, panel.x, panel.x + panel.width);
  const yScale = logScale(1, wMax, panel.y + panel.height, panel.y);
  drawAxes(svg, {
    panel,
    xScale,
    yScale,
    xTicks: series.map((s) => s.day),
    yTicks: logTicks(1, wMax),
    xLabel: 'study day',
    yLabel: 'edge weight (repeat count)',
    title: 'edge-weight distribution per day',
  });
  const halfMax = (panel.width / series.length) * 0.38;
  series.forEach(({ section }, i) => {
    const cx = xScale(i);
    const rows = Object.entries(section.histogram)
      .map(([w, c]) => [Number(w), c] as [number, number])
      .sort((a, b) => a[0] - b[0]);
    // Mirror counts around the day's center line: a discrete violin.
    const right: [number, number][] = rows.map(([w, c]) => [
      cx + (c / cMax) * halfMax,
      yScale(w),
    ]);
    const left: [number, number][] = rows
      .map(([w, c]) => [cx - (c / cMax) * halfMax, yScale(w)] as [number, number])
      .reverse();
    const pts = [...right, ...left].map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    svg.el('polygon', {
      points: pts,
      fill: color(i),
      'fill-opacity': 0.5,
      stroke: color(i),
    });
    if (section.median !== null) {
      svg.line(cx - halfMax, yScale(section.median), cx + halfMax, yScale(section.median), {
        stroke: '#222',
        'stroke-width': 1.5,
      });
    }
  });
  return svg.toString();
}

function renderFlow(report: StudyReport, style?: FigureStyle): string {
  const series = extractFlows(report);
  const { day, section } = series[series.length - 1]!;
  const svg = newDoc(style, 760, 480);
  const x0 = 180;
  const x1 = 560;
  const top = 90;
  const scale = 300 / 100; // px per percentage point
  // Band order fixes vertical stacking on both sides; labelAt staggers the
  // captions along the ribbon so the two crossing bands cannot overprint.
  const bands: { key: 'ii' | 'io' | 'oi' | 'oo'; from: number; to: number; labelAt: number }[] = [
    { key: 'ii', from: 0, to: 0, labelAt: 0.5 },
    { key: 'io', from: 0, to: 1, labelAt: 0.22 },
    { key: 'oi', from: 1, to: 0, labelAt: 0.78 },
    { key: 'oo', from: 1, to: 1, labelAt: 0.5 },
  ];
  const leftStack = [0, 0];
  const rightStack = [0, 0];
  const leftBase = [top, top + (section.ii + section.io) * scale + 40];
  const rightBase = [top, top + (section.ii + section.oi) * scale + 40];
  const mx = (x0 + x1) / 2;
  for (const band of bands) {
    const h = section[band.key] * scale;
    const ly = leftBase[band.from]! + leftStack[band.from]!;
    const ry = rightBase[band.to]! + rightStack[band.to]!;
    leftStack[band.from] = leftStack[band.from]! + h;
    rightStack[band.to] = rightStack[band.to]! + h;
    svg.el('path', {
      d:
        `M ${x0} ${fmt(ly)} C ${mx} ${fmt(ly)} ${mx} ${fmt(ry)} ${x1} ${fmt(ry)} ` +
        `L ${x1} ${fmt(ry + h)} C ${mx} ${fmt(ry + h)} ${mx} ${fmt(ly + h)} ${x0} ${fmt(ly + h)} Z`,
      fill: color(band.from * 2 + band.to),
      'fill-opacity': 0.55,
    });
    const t = band.labelAt;
    const lx = x0 + t * (x1 - x0);
    const lyMid = ly * (1 - t) + ry * t + h / 2 + 4;
    svg.text(lx, lyMid, `${band.key} ${section[band.key].toFixed(1)}%`, {
      'text-anchor': 'middle',
    });
  }
  const labels = ['influential', 'ordinary'];
  labels.forEach((label, i) => {
    const lh = (i === 0 ? section.ii + section.io : section.oi + section.oo) * scale;
    const rh = (i === 0 ? section.ii + section.oi : section.io + section.oo) * scale;
    svg.rect(x0 - 14, leftBase[i]!, 14, lh, { fill: '#444' });
    svg.rect(x1, rightBase[i]!, 14, rh, { fill: '#444' });
    svg.text(x0 - 20, leftBase[i]! + lh / 2 + 4, label, { 'text-anchor': 'end' });
    svg.text(x1 + 20, rightBase[i]! + rh / 2 + 4, label);
  });
  svg.text(x0 - 14, top - 24, 'origin author', { 'font-size': 13 });
  svg.text(x1, top - 24, 'diffusing user', { 'font-size': 13 });
  svg.text(
    svg.width / 2,
    svg.height - 20,
    `share of communication volume, day ${day} (top ${fmt(section.top_pct)}% = ` +
      `${section.influential_users} influential users)`,
    { 'text-anchor': 'middle' }
  );
  return svg.toString();
}

function heatPanel(
  svg: SvgDoc,
  panel: Panel,
  names: string[],
  matrix: (number | null)[][],
  title: string,
  unit: string,
  hue: (t: number) => string
): void {
  const k = names.length;
  const cw = panel.width / k;
  const ch = panel.height / k;
  const finite = matrix.flat().filter((v): v is number => v !== null && isFinite(v));
  const vMax = Math.max(...finite, 1e-12);
  for (let i = 0; i < k; i++) {
    for (let j = 0; j < k; j++) {
      const x = panel.x + j * cw;
      const y = panel.y + i * ch;
      const v = matrix[i]?.[j] ?? null;
      if (v === null) {
        svg.rect(x, y, cw, ch, { fill: '#eeeeee', stroke: '#ffffff' });
        svg.text(x + cw / 2, y + ch / 2 + 4, '-', { 'text-anchor': 'middle', fill: '#999' });
      } else {
        const t = v / vMax;
        svg.rect(x, y, cw, ch, { fill: hue(t), stroke: '#ffffff' });
        svg.text(x + cw / 2, y + ch / 2 + 4, fmt(v), {
          'text-anchor': 'middle',
          fill: t > 0.6 ? '#ffffff' : '#222222',
        });
      }
    }
  }
  names.forEach((name, i) => {
    svg.text(panel.x - 6, panel.y + i * ch + ch / 2 + 4, name, { 'text-anchor': 'end' });
    svg.el(
      'text',
      {
        x: panel.x + i * cw + cw / 2,
        y: panel.y + panel.height + 10,
        'font-family': 'sans-serif',
        'font-size': 11,
        'text-anchor': 'end',
        transform: `rotate(-40 ${panel.x + i * cw + cw / 2} ${panel.y + panel.height + 10})`,
      },
      name
    );
  });
  svg.text(panel.x + panel.width / 2, panel.y - 22, title, {
    'text-anchor': 'middle',
    'font-size': 13,
  });
  svg.text(panel.x + panel.width / 2, panel.y - 8, unit, {
    'text-anchor': 'middle',
    fill: '#555',
  });
  svg.text(panel.x + panel.width / 2, panel.y + panel.height + 52, 'origin location', {
    'text-anchor': 'middle',
  });
  svg.el(
    'text',
    {
      x: panel.x - 74,
      y: panel.y + panel.height / 2,
      'font-family': 'sans-serif',
      'font-size': 11,
      'text-anchor': 'middle',
      transform: `rotate(-90 ${panel.x - 74} ${panel.y + panel.height / 2})`,
    },
    'reacting location'
  );
}

const blueRamp = (t: number) => `rgb(${Math.round(255 - 200 * t)},${Math.round(255 - 140 * t)},255)`;
const redRamp = (t: number) => `rgb(255,${Math.round(255 - 160 * t)},${Math.round(255 - 200 * t)})`;

function renderHeatmap(report: StudyReport, style?: FigureStyle): string {
  const data = extractHeatmap(report);
  const names = data.locations.map((l) => l.name);
  const svg = newDoc(style, 1060, 520);
  const left: Panel = { x: 110, y: 70, width: 360, height: 360 };
  const right: Panel = { x: 620, y: 70, width: 360, height: 360 };
  heatPanel(svg, left, names, data.freq, 'communication frequency', '(events)', blueRamp);
  if (data.resp === null) {
    svg.text(right.x + right.width / 2, right.y + right.height / 2, 'response section skipped', {
      'text-anchor': 'middle',
      fill: '#888',
    });
  } else {
    heatPanel(svg, right, names, data.resp, 'median response time', '(s)', redRamp);
  }
  return svg.toString();
}

function decayPanel(
  svg: SvgDoc,
  panel: Panel,
  curve: CurveSection,
  cityKm: number,
  stateKm: number,
  yLabel: string,
  title: string
): void {
  const rows = curve.bins
    .filter((b): b is [number, number, number] => b[2] !== null)
    .map(([lo, hi, mean]) => [Math.sqrt(lo * hi), mean] as [number, number]);
  if (rows.length === 0) {
    svg.text(panel.x + panel.width / 2, panel.y + panel.height / 2, 'no occupied bins', {
      'text-anchor': 'middle',
      fill: '#888',
    });
    return;
  }
  const first = curve.bins[0]!;
  const last = curve.bins[curve.bins.length - 1]!;
  const xLo = first[0];
  const xHi = last[1];
  const yVals = rows.map((r) => r[1]);
  const yHi = Math.max(...yVals) * 1.1;
  const xScale = logScale(xLo, xHi, panel.x, panel.x + panel.width);
  const yScale = linearScale(0, yHi, panel.y + panel.height, panel.y);
  drawAxes(svg, {
    panel,
    xScale,
    yScale,
    xTicks: logTicks(xLo, xHi),
    yTicks: ticks(0, yHi, 4),
    xLabel: 'pair distance (m)',
    yLabel,
    title,
  });
  for (const [scaleM, name] of [
    [cityKm * 1000, 'city scale'],
    [stateKm * 1000, 'state scale'],
  ] as [number, string][]) {
    if (scaleM <= xLo || scaleM >= xHi) continue;
    const px = xScale(scaleM);
    svg.line(px, panel.y, px, panel.y + panel.height, {
      stroke: '#888',
      'stroke-dasharray': '4 4',
    });
    svg.el(
      'text',
      {
        x: px + 4,
        y: panel.y + 14,
        'font-family': 'sans-serif',
        'font-size': 10,
        fill: '#666',
        transform: `rotate(-90 ${fmt(px + 4)} ${panel.y + 14})`,
        'text-anchor': 'end',
      },
      name
    );
  }
  svg.polyline(
    rows.map(([x, y]) => [xScale(x), yScale(y)]),
    { stroke: color(0), 'stroke-width': 1.5 }
  );
  for (const [x, y] of rows) {
    svg.circle(xScale(x), yScale(y), 3, { fill: color(0) });
  }
  if (curve.same_location !== null) {
    svg.text(panel.x + 8, panel.y + panel.height - 8, `same-location mean: ${fmt(curve.same_location)}`, {
      fill: '#555',
    });
  }
}

function renderDecay(report: StudyReport, style?: FigureStyle): string {
  const data = extractDecay(report);
  const svg = newDoc(style, 1080, 480);
  const panels = panelGrid(svg.width, svg.height, 1, 2);
  decayPanel(
    svg,
    panels[0]!,
    data.freqCurve,
    data.cityKm,
    data.stateKm,
    'mean pair communication count',
    'communication vs distance'
  );
  const right = panels[1]!;
  if (data.respCurve === null) {
    svg.text(right.x + right.width / 2, right.y + right.height / 2, 'response section skipped', {
      'text-anchor': 'middle',
      fill: '#888',
    });
  } else {
    decayPanel(
      svg,
      right,
      data.respCurve,
      data.cityKm,
      data.stateKm,
      'median response time (s)',
      'response time vs distance'
    );
  }
  return svg.toString();
}

function sketchPanel(
  svg: SvgDoc,
  panel: Panel,
  locations: LocationRow[],
  edges: [number, number, number][],
  stroke: string,
  title: string
): void {
  const placed = locations
    .map((loc, i) => ({ loc, i }))
    .filter((p): p is { loc: LocationRow & { lat: number; lon: number }; i: number } =>
      p.loc.lat !== null && p.loc.lon !== null
    );
  if (placed.length === 0) {
    svg.text(panel.x + panel.width / 2, panel.y + panel.height / 2, 'no geocoded locations', {
      'text-anchor': 'middle',
      fill: '#888',
    });
    return;
  }
  const lons = placed.map((p) => p.loc.lon);
  const lats = placed.map((p) => p.loc.lat);
  const pad = 46;
  const xScale = linearScale(
    Math.min(...lons),
    Math.max(...lons) || Math.min(...lons) + 1,
    panel.x + pad,
    panel.x + panel.width - pad
  );
  const yScale = linearScale(
    Math.min(...lats),
    Math.max(...lats) || Math.min(...lats) + 1,
    panel.y + panel.height - pad,
    panel.y + pad
  );
  const pos = new Map(placed.map((p) => [p.i, [xScale(p.loc.lon), yScale(p.loc.lat)] as const]));
  svg.rect(panel.x, panel.y, panel.width, panel.height, { fill: 'none', stroke: '#ccc' });
  for (const [i, j, w] of edges) {
    const a = pos.get(i);
    const b = pos.get(j);
    if (a === undefined || b === undefined) continue;
    if (i === j) {
      svg.circle(a[0] + 14, a[1] - 14, 11, {
        fill: 'none',
        stroke,
        'stroke-width': w,
        'stroke-opacity': 0.6,
      });
    } else {
      svg.line(a[0], a[1], b[0], b[1], { stroke, 'stroke-width': w, 'stroke-opacity': 0.6 });
    }
  }
  const cMax = Math.max(...placed.map((p) => p.loc.tweet_count), 1);
  for (const { loc, i } of placed) {
    const [x, y] = pos.get(i)!;
    svg.circle(x, y, 4 + 9 * Math.sqrt(loc.tweet_count / cMax), { fill: '#333' });
    svg.text(x, y - 12, loc.name, { 'text-anchor': 'middle' });
  }
  svg.text(panel.x + panel.width / 2, panel.y - 8, title, {
    'text-anchor': 'middle',
    'font-size': 13,
  });
}

function renderSurrogate(report: StudyReport, style?: FigureStyle): string {
  const data = extractSurrogate(report);
  const svg = newDoc(style, 1080, 520);
  const panels = panelGrid(svg.width, svg.height, 1, 2);
  sketchPanel(
    svg,
    panels[0]!,
    data.locations,
    data.freqEdges,
    color(0),
    'pair frequency (edge width)'
  );
  const right = panels[1]!;
  if (data.respEdges === null) {
    svg.text(right.x + right.width / 2, right.y + right.height / 2, 'response section skipped', {
      'text-anchor': 'middle',
      fill: '#888',
    });
  } else {
    sketchPanel(
      svg,
      right,
      data.locations,
      data.respEdges,
      color(1),
      'response immediacy (edge width, inverse median seconds)'
    );
  }
  svg.text(svg.width / 2, svg.height - 16, 'nodes placed by longitude/latitude, sized by event count', {
    'text-anchor': 'middle',
    fill: '#555',
  });
  return svg.toString();
}

// ----------------------------------------------------------------- dispatch

const RENDERERS: Record<FigureKind, (r: StudyReport, s?: FigureStyle) => string> = {
  activity: renderActivity,
  structures: renderStructures,
  memory: renderMemory,
  ccdf: renderCcdf,
  weights: renderWeights,
  flow: renderFlow,
  heatmap: renderHeatmap,
  decay: renderDecay,
  surrogate: renderSurrogate,
};

/**
 * Render one figure family to an SVG string. The report is a read-only
 * input; a before/after serialization guards the no-recompute contract.
 */
export function renderFigure(
  report: StudyReport,
  kind: FigureKind,
  style?: FigureStyle
): string {
  const before = JSON.stringify(report);
  const out = RENDERERS[kind](report, style);
  if (JSON.stringify(report) !== before) {
    throw new Error(`renderer for "${kind}" mutated the report`);
  }
  return out;
}

export function renderAll(
  report: StudyReport,
  style?: FigureStyle
): Map<FigureKind, string> {
  const out = new Map<FigureKind, string>();
  for (const kind of FIGURE_KINDS) {
    out.set(kind, renderFigure(report, kind, style));
  }
  return out;
}
