/** End-to-end checks against the compiled CLI (npm test builds dist first). */

import { spawnSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { fileURLToPath } from 'url';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { FIGURE_KINDS } from '../src/figures.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const cliPath = path.join(here, '..', 'dist', 'cli.js');
const reportPath = path.join(here, 'fixtures', 'report.json');

let workDir: string;

beforeAll(() => {
  expect(fs.existsSync(cliPath), 'dist/cli.js missing; run npm run build').toBe(true);
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), 'crisis-plots-'));
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

function run(args: string[]) {
  return spawnSync(process.execPath, [cliPath, ...args], { encoding: 'utf-8' });
}

describe('crisis-plots', () => {
  it('--kind all emits every figure family', () => {
    const outDir = path.join(workDir, 'all');
    const proc = run(['--report', reportPath, '--kind', 'all', '--out-dir', outDir]);
    expect(proc.status, proc.stderr).toBe(0);
    for (const kind of FIGURE_KINDS) {
      const file = path.join(outDir, `${kind}.svg`);
      expect(fs.existsSync(file), file).toBe(true);
      expect(fs.statSync(file).size).toBeGreaterThan(500);
    }
    expect(fs.readdirSync(outDir)).toHaveLength(FIGURE_KINDS.length);
  });

  it('renders a single kind', () => {
    const outDir = path.join(workDir, 'single');
    const proc = run(['--report', reportPath, '--kind', 'ccdf', '--out-dir', outDir]);
    expect(proc.status, proc.stderr).toBe(0);
    expect(fs.readdirSync(outDir)).toEqual(['ccdf.svg']);
  });

  it('never rewrites the report file', () => {
    const before = fs.readFileSync(reportPath);
    run(['--report', reportPath, '--kind', 'all', '--out-dir', path.join(workDir, 'ro')]);
    expect(fs.readFileSync(reportPath).equals(before)).toBe(true);
  });

  it('rejects unknown kinds', () => {
    const proc = run(['--report', reportPath, '--kind', 'pie', '--out-dir', workDir]);
    expect(proc.status).toBe(1);
    expect(proc.stderr).toContain('unknown figure kind');
  });

  it('fails with the named error when a section is missing', () => {
    const stripped = JSON.parse(fs.readFileSync(reportPath, 'utf-8'));
    delete stripped.spatial;
    const strippedPath = path.join(workDir, 'no-spatial.json');
    fs.writeFileSync(strippedPath, JSON.stringify(stripped));
    const proc = run(['--report', strippedPath, '--kind', 'heatmap', '--out-dir', workDir]);
    expect(proc.status).toBe(1);
    expect(proc.stderr).toContain('MissingSectionError');
  });

  it('fails with the named error on a schema mismatch', () => {
    const bumped = JSON.parse(fs.readFileSync(reportPath, 'utf-8'));
    bumped.schema_version = 2;
    const bumpedPath = path.join(workDir, 'v2.json');
    fs.writeFileSync(bumpedPath, JSON.stringify(bumped));
    const proc = run(['--report', bumpedPath, '--kind', 'memory', '--out-dir', workDir]);
    expect(proc.status).toBe(1);
    expect(proc.stderr).toContain('SchemaVersionError');
  });

  it('requires --report and --out-dir', () => {
    expect(run(['--kind', 'all', '--out-dir', workDir]).status).toBe(1);
    expect(run(['--report', reportPath]).status).toBe(1);
  });

  it('prints usage with --help', () => {
    const proc = run(['--help']);
    expect(proc.status).toBe(0);
    expect(proc.stdout).toContain('usage:');
    expect(proc.stdout).toContain('ccdf');
  });
});
