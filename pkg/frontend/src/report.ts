/**
 * Types and access helpers for the study report JSON emitted by the
 * crisis-netkit pipeline. The renderer treats the report as read-only input;
 * nothing in this package recomputes analytics.
 */

import * as fs from 'fs';

export const SUPPORTED_SCHEMA_VERSION = 1;

// A section that could not be computed is written as {"skipped": reason}.
export interface SkippedSection {
  skipped: string;
}

export type XY = [number, number];

export interface ActivityKindSection {
  lambda: number;
  n: number;
  excluded_low: number;
  excluded_high: number;
  mean: number;
  variance: number;
  kde: XY[];
  qq: XY[];
}

export interface ActivitySection {
  total_users: number;
  kinds: { [kind: string]: ActivityKindSection | SkippedSection };
}

export interface StructureSection {
  classified_users: number;
  [label: string]: number;
}

export interface MemorySection {
  new_pairs: number;
  active_pairs: number;
  ratio: number | null;
}

export interface WeightSection {
  median: number | null;
  variance: number | null;
  max: number | null;
  n_edges: number;
  histogram: { [weight: string]: number };
}

export interface InfluenceSection {
  beta: number;
  iterations: number;
  nodes: number;
  x_min_raw: number;
  excluded: number;
  n_tail: number;
  alpha: number;
  ks: number;
  p_value: number;
  replicates: number;
  ccdf: XY[];
}

export interface FlowSection {
  top_pct: number;
  influential_users: number;
  ii: number;
  io: number;
  oi: number;
  oo: number;
}

export interface DayReport {
  day: number;
  graph: { nodes: number; active_users: number; edges: number; total_weight: number };
  activity: ActivitySection | SkippedSection;
  structures: StructureSection | SkippedSection;
  memory: MemorySection | SkippedSection;
  weights: WeightSection | SkippedSection;
  influence: InfluenceSection | SkippedSection;
  flows: FlowSection | SkippedSection;
}

export interface LocationRow {
  name: string;
  rank: number;
  tweet_count: number;
  lat: number | null;
  lon: number | null;
}

export interface CurveSection {
  same_location: number | null;
  bins: [number, number, number | null][]; // [lo m, hi m, mean]
  excluded_pairs: number;
}

export interface SpatialSection {
  top_k: number;
  shortfall: boolean;
  city_km: number;
  state_km: number;
  locations: LocationRow[];
  freq_matrix: number[][];
  freq_curve: CurveSection;
  surrogate_freq: [number, number, number][];
}

export interface ResponseSection {
  resp_matrix: (number | null)[][];
  samples: number;
  unresolved: number;
  clock_anomalies: number;
  resp_curve: CurveSection;
  surrogate_resp: [number, number, number][];
}

export interface StudyReport {
  schema_version: number;
  study: { name: string; start: number; days: number; config: unknown };
  ingest: {
    parsed: number;
    malformed: number;
    filtered_out: number;
    out_of_window: number;
    events: number;
  };
  days: DayReport[];
  spatial: SpatialSection | SkippedSection;
  response: ResponseSection | SkippedSection;
  skipped_sections: string[];
}

export class SchemaVersionError extends Error {
  constructor(found: unknown) {
    super(
      `unsupported report schema_version ${JSON.stringify(found)}; ` +
        `this renderer supports version ${SUPPORTED_SCHEMA_VERSION}`
    );
    this.name = 'SchemaVersionError';
  }
}

export class MissingSectionError extends Error {
  constructor(readonly section: string, reason?: string) {
    super(
      reason === undefined
        ? `report has no "${section}" section`
        : `report section "${section}" was skipped by the pipeline: ${reason}`
    );
    this.name = 'MissingSectionError';
  }
}

export function isSkipped(section: unknown): section is SkippedSection {
  return (
    typeof section === 'object' &&
    section !== null &&
    'skipped' in (section as Record<string, unknown>)
  );
}

/** Assert a section exists and was not skipped; returns it narrowed. */
export function requireSection<T>(
  section: T | SkippedSection | undefined,
  name: string
): T {
  if (section === undefined || section === null) {
    throw new MissingSectionError(name);
  }
  if (isSkipped(section)) {
    throw new MissingSectionError(name, section.skipped);
  }
  return section;
}

export function validateReport(data: unknown): StudyReport {
  if (typeof data !== 'object' || data === null) {
    throw new SchemaVersionError(undefined);
  }
  const report = data as StudyReport;
  if (report.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaVersionError(report.schema_version);
  }
  if (!Array.isArray(report.days)) {
    throw new MissingSectionError('days');
  }
  return report;
}

export function loadReport(path: string): StudyReport {
  return validateReport(JSON.parse(fs.readFileSync(path, 'utf-8')));
}
