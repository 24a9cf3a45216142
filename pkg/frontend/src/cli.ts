#!/usr/bin/env node
/**
 * crisis-plots: batch-render figure families from a study report JSON.
 *
 *   crisis-plots --report <report.json> --kind <name>|all --out-dir <dir>
 *
 * Writes one SVG per requested kind into the output directory. Exit 0 on
 * success, 1 on any error (unknown kind, unreadable report, unsupported
 * schema version, missing section).
 */

import * as fs from 'fs';
import * as path from 'path';
import { parseArgs } from 'node:util';

import { FIGURE_KINDS, FigureKind, FigureSpec, FigureStyle, renderFigure } from './figures.js';
import { loadReport } from './report.js';

export function renderToFile(spec: FigureSpec): string {
  const report = loadReport(spec.reportPath);
  const svg = renderFigure(report, spec.kind, spec.style);
  fs.mkdirSync(path.dirname(spec.outPath), { recursive: true });
  fs.writeFileSync(spec.outPath, svg, 'utf-8');
  return spec.outPath;
}

function parseStyle(values: { width?: string; height?: string; dpi?: string }): FigureStyle {
  const style: FigureStyle = {};
  for (const key of ['width', 'height', 'dpi'] as const) {
    const raw = values[key];
    if (raw === undefined) continue;
    const parsed = Number(raw);
    if (!Number.isFinite(parsed) || parsed <= 0) {
      throw new Error(`--${key} must be a positive number, got ${JSON.stringify(raw)}`);
    }
    style[key] = parsed;
  }
  return style;
}

export function main(argv: string[]): number {
  let values;
  try {
    values = parseArgs({
      args: argv,
      options: {
        report: { type: 'string' },
        kind: { type: 'string', default: 'all' },
        'out-dir': { type: 'string' },
        width: { type: 'string' },
        height: { type: 'string' },
        dpi: { type: 'string' },
        help: { type: 'boolean', default: false },
      },
      allowPositionals: false,
    }).values;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }

  if (values.help) {
    process.stdout.write(
      `usage: crisis-plots --report <report.json> --kind <name>|all --out-dir <dir>\n` +
        `kinds: ${FIGURE_KINDS.join(', ')}\n` +
        `style: --width <px> --height <px> --dpi <n>\n`
    );
    return 0;
  }

  try {
    if (!values.report) throw new Error('--report is required');
    if (!values['out-dir']) throw new Error('--out-dir is required');
    const requested = values.kind ?? 'all';
    const kinds: FigureKind[] =
      requested === 'all'
        ? [...FIGURE_KINDS]
        : [validateKind(requested)];
    const style = parseStyle(values);

    // Load once; render every requested kind from the same read-only object.
    const report = loadReport(values.report);
    fs.mkdirSync(values['out-dir'], { recursive: true });
    for (const kind of kinds) {
      const outPath = path.join(values['out-dir'], `${kind}.svg`);
      fs.writeFileSync(outPath, renderFigure(report, kind, style), 'utf-8');
      process.stdout.write(`wrote ${outPath}\n`);
    }
    return 0;
  } catch (err) {
    const e = err as Error;
    process.stderr.write(`${e.name}: ${e.message}\n`);
    return 1;
  }
}

function validateKind(name: string): FigureKind {
  if ((FIGURE_KINDS as readonly string[]).includes(name)) {
    return name as FigureKind;
  }
  throw new Error(`unknown figure kind "${name}"; expected one of ${FIGURE_KINDS.join(', ')} or all`);
}

// Invoked as a script (bin entry), not imported.
const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
