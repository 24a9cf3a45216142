import * as fs from 'fs';
import { describe, expect, it } from 'vitest';

import { FIGURE_KINDS, renderAll, renderFigure } from '../src/figures.js';
import {
  MissingSectionError,
  SchemaVersionError,
  StudyReport,
  validateReport,
} from '../src/report.js';

const fixturePath = new URL('./fixtures/report.json', import.meta.url);

function loadFixture(): StudyReport {
  return validateReport(JSON.parse(fs.readFileSync(fixturePath, 'utf-8')));
}

describe('rendering', () => {
  it('renders all nine families as non-empty svg documents', () => {
    const out = renderAll(loadFixture());
    expect([...out.keys()]).toEqual([...FIGURE_KINDS]);
    for (const [kind, svg] of out) {
      expect(svg.startsWith('<svg '), kind).toBe(true);
      expect(svg.endsWith('</svg>'), kind).toBe(true);
      expect(svg.length, kind).toBeGreaterThan(500);
    }
  });

  it('is deterministic: same report and options give identical output', () => {
    const report = loadFixture();
    for (const kind of FIGURE_KINDS) {
      expect(renderFigure(report, kind)).toBe(renderFigure(report, kind));
    }
    // and across separately parsed copies of the same file
    expect(renderFigure(loadFixture(), 'ccdf')).toBe(renderFigure(loadFixture(), 'ccdf'));
  });

  it('never mutates the report', () => {
    const report = loadFixture();
    const before = JSON.stringify(report);
    renderAll(report);
    expect(JSON.stringify(report)).toBe(before);
  });

  it('labels distance in meters and response time in seconds', () => {
    const report = loadFixture();
    expect(renderFigure(report, 'decay')).toContain('pair distance (m)');
    expect(renderFigure(report, 'decay')).toContain('median response time (s)');
    expect(renderFigure(report, 'heatmap')).toContain('(s)');
  });

  it('draws city and state scale marks on the decay curves', () => {
    const svg = renderFigure(loadFixture(), 'decay');
    expect(svg).toContain('city scale');
    expect(svg).toContain('state scale');
  });

  it('honors size and dpi style options', () => {
    const report = loadFixture();
    const sized = renderFigure(report, 'memory', { width: 400, height: 300 });
    expect(sized).toContain('viewBox="0 0 400 300"');
    const scaled = renderFigure(report, 'memory', { dpi: 192 });
    expect(scaled).toContain('width="1640"'); // 820 * 192/96
  });
});

describe('missing sections', () => {
  it('spatial figures fail with a named error when spatial is absent', () => {
    for (const kind of ['heatmap', 'decay', 'surrogate'] as const) {
      const report = loadFixture();
      delete (report as Record<string, unknown>)['spatial'];
      let caught: unknown;
      try {
        renderFigure(report, kind);
      } catch (err) {
        caught = err;
      }
      expect(caught).toBeInstanceOf(MissingSectionError);
      expect((caught as MissingSectionError).name).toBe('MissingSectionError');
      expect((caught as MissingSectionError).message).toContain('spatial');
    }
  });

  it('a pipeline-skipped section carries its reason', () => {
    const report = loadFixture();
    (report as Record<string, unknown>)['spatial'] = { skipped: 'ValueError: no locations' };
    expect(() => renderFigure(report, 'heatmap')).toThrowError(/no locations/);
  });

  it('per-day figures fail only when every day is unusable', () => {
    const report = loadFixture();
    for (const day of report.days) {
      day.influence = { skipped: 'x' };
    }
    expect(() => renderFigure(report, 'ccdf')).toThrowError(MissingSectionError);

    const partial = loadFixture();
    partial.days[0]!.influence = { skipped: 'x' };
    expect(renderFigure(partial, 'ccdf')).toContain('</svg>');
  });

  it('a skipped response section degrades spatial figures instead of failing', () => {
    const report = loadFixture();
    report.response = { skipped: 'ValueError: nothing resolved' };
    for (const kind of ['heatmap', 'decay', 'surrogate'] as const) {
      expect(renderFigure(report, kind)).toContain('response section skipped');
    }
  });
});

describe('schema validation', () => {
  it('rejects unsupported schema versions with a named error', () => {
    const raw = JSON.parse(fs.readFileSync(fixturePath, 'utf-8'));
    raw.schema_version = 99;
    let caught: unknown;
    try {
      validateReport(raw);
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(SchemaVersionError);
    expect((caught as SchemaVersionError).name).toBe('SchemaVersionError');
    expect((caught as SchemaVersionError).message).toContain('99');
  });

  it('rejects non-report payloads', () => {
    expect(() => validateReport(null)).toThrowError(SchemaVersionError);
    expect(() => validateReport({ schema_version: 1 })).toThrowError(MissingSectionError);
  });
});
