"""Command-line entry points for the analytics pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import activity as act
from . import graph as gr
from . import influence as infl
from . import spatial as sp
from .ingest import day_partition, filter_by_keywords, parse_events, write_events_jsonl
from .report import (
    SECONDS_PER_DAY,
    StudyConfig,
    _parse_start,
    _spatial_sections,
    _SectionLog,
    run_pipeline,
    write_report,
)
from .synth import ScenarioConfig, gen_scenario, write_scenario

logger = logging.getLogger("crisis_netkit")


def _dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_keywords(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _load_events(path: str, fmt: str, keywords_path: str | None):
    records, stats = parse_events(path, fmt)
    logger.info(
        "parsed %d records (%d valid, %d malformed)",
        stats.parsed, stats.valid, stats.malformed,
    )
    if keywords_path:
        keywords = _read_keywords(keywords_path)
        kept = filter_by_keywords(records, keywords)
        logger.info("keyword filter kept %d of %d events", len(kept), len(records))
        records = kept
    return records, stats


def _default_start(records) -> int:
    return (min(ev.timestamp for ev in records) // SECONDS_PER_DAY) * SECONDS_PER_DAY


def cmd_ingest(args: argparse.Namespace) -> int:
    records, _ = _load_events(args.input, args.format, args.keywords)
    if not records:
        logger.error("no events survived parsing/filtering")
        return 1
    start = _parse_start(args.start) if args.start else _default_start(records)
    buckets = day_partition(records, start)
    written = write_events_jsonl(records, args.out)
    logger.info("wrote %d events across %d days to %s", written, len(buckets), args.out)
    return 0


def cmd_snapshot(args: argparse.Namespace) -> int:
    records, _ = _load_events(args.events, args.format, None)
    if not records:
        logger.error("no events to snapshot")
        return 1
    start = _parse_start(args.start) if args.start else _default_start(records)
    buckets = day_partition(records, start)
    snapshots = gr.build_daily_snapshots(buckets)
    for snap in snapshots:
        gr.export_snapshot(snap, args.out_dir)
    ratios = gr.new_edge_ratio(snapshots)
    logger.info(
        "exported %d snapshots; final graph %d nodes / %d edges",
        len(snapshots), len(snapshots[-1].nodes), len(snapshots[-1].edges),
    )
    for day, ratio in ratios:
        logger.info("day %d new-edge ratio: %s", day, "n/a" if ratio is None else f"{ratio:.4f}")
    return 0


def cmd_activity(args: argparse.Namespace) -> int:
    records, _ = _load_events(args.events, args.format, None)
    start = _parse_start(args.start) if args.start else _default_start(records)
    buckets = day_partition(records, start)
    if args.day >= len(buckets):
        logger.error("day %d beyond last event day %d", args.day, len(buckets) - 1)
        return 1
    cumulative = [ev for bucket in buckets[: args.day + 1] for ev in bucket.events]
    profiles = act.activity_proportions(cumulative)
    out: dict = {"day": args.day, "total_users": len(profiles), "kinds": {}}
    for kind in act.KIND_ORDER:
        try:
            summary = act.transform_kind(profiles, kind, bandwidth=args.bandwidth)
            qq = act.qq_normal(summary.transformed)
            out["kinds"][kind.value] = {
                "lambda": summary.lam,
                "n": int(summary.transformed.size),
                "excluded_low": summary.excluded_low,
                "excluded_high": summary.excluded_high,
                "mean": float(summary.transformed.mean()),
                "variance": float(summary.transformed.var()),
                "kde": [[float(a), float(b)] for a, b in summary.kde_grid],
                "qq": [[float(a), float(b)] for a, b in qq],
            }
        except Exception as exc:
            out["kinds"][kind.value] = {"skipped": f"{type(exc).__name__}: {exc}"}
    _dump_json(out, args.out)
    return 0


def cmd_structures(args: argparse.Namespace) -> int:
    from .structures import StructureClass, structure_proportions

    snapshots = gr.load_snapshot_dir(args.snapshot_dir)
    if not snapshots:
        logger.error("no snapshots found in %s", args.snapshot_dir)
        return 1
    rows = []
    for snap in snapshots:
        breakdown = structure_proportions(snap)
        row = {cls.value: breakdown.proportions.get(cls, 0.0) for cls in StructureClass}
        row["day"] = snap.day_index
        row["classified_users"] = breakdown.classified_users
        rows.append(row)
    _dump_json(rows, args.out)
    return 0


def cmd_influence(args: argparse.Namespace) -> int:
    snapshots = gr.load_snapshot_dir(args.snapshot_dir)
    if not snapshots:
        logger.error("no snapshots found in %s", args.snapshot_dir)
        return 1
    rows = []
    for snap in snapshots:
        row: dict = {"day": snap.day_index, "beta": args.beta}
        try:
            scores = infl.pagerank(snap, beta=args.beta)
            row["iterations"] = scores.iterations
            normalized = infl.normalize_scores(scores.scores, bins=args.bins)
            fit = infl.fit_power_law(normalized.values)
            p_value = infl.ks_gof(
                normalized.values, fit,
                replicates=args.replicates, seed=args.seed + snap.day_index,
            )
            curve = infl.ccdf(normalized.values)
            flow = infl.flow_matrix(snap, scores, top_pct=args.top_pct)
            row.update(
                {
                    "x_min_raw": normalized.x_min_raw,
                    "n_tail": fit.n_tail,
                    "alpha": fit.alpha,
                    "ks": fit.ks_statistic,
                    "p_value": p_value,
                    "ccdf": [[float(a), float(b)] for a, b in curve],
                    "flow": {
                        "ii": flow.ii, "io": flow.io,
                        "oi": flow.oi, "oo": flow.oo,
                        "top_pct": flow.top_pct,
                    },
                }
            )
        except Exception as exc:
            row["skipped"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    _dump_json(rows, args.out)
    return 0


def cmd_spatial(args: argparse.Namespace) -> int:
    records, _ = _load_events(args.events, args.format, None)
    if not records:
        logger.error("no events to analyze")
        return 1
    config = StudyConfig(
        top_locations=args.top, gazetteer=args.gazetteer, cache=args.cache
    )
    log = _SectionLog()
    spatial_section, response_section = _spatial_sections(records, config, log)
    _dump_json({"spatial": spatial_section, "response": response_section}, args.out)
    return 0 if not log.skips else 2


def cmd_synth(args: argparse.Namespace) -> int:
    config = ScenarioConfig.from_file(args.config)
    events, ledger = gen_scenario(config)
    ledger_path = args.ledger or (args.out + ".ledger.json")
    write_scenario(events, ledger, args.out, ledger_path)
    logger.info("wrote %d events to %s (ledger %s)", len(events), args.out, ledger_path)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = StudyConfig.from_file(args.config) if args.config else StudyConfig()
    try:
        report = run_pipeline(args.events, config)
    except Exception as exc:
        logger.error("fatal: %s", exc)
        return 1
    write_report(report, args.out)
    skipped = report.get("skipped_sections", [])
    if skipped:
        logger.warning("%d sections skipped", len(skipped))
        return 2
    logger.info("report written to %s", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisis-netkit",
        description="Temporal network analytics over crisis event streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, filter, and normalize an event stream")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--keywords", help="file with one keyword per line")
    p.add_argument("--start", help="study start (epoch seconds or ISO 8601)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("snapshot", help="build and export daily cumulative graphs")
    p.add_argument("--events", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--start")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("activity", help="activity-mix transform for one study day")
    p.add_argument("--events", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--start")
    p.add_argument("--day", type=int, required=True)
    p.add_argument("--bandwidth", type=float, default=act.DEFAULT_BANDWIDTH)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_activity)

    p = sub.add_parser("structures", help="communication-structure breakdown per day")
    p.add_argument("--snapshot-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_structures)

    p = sub.add_parser("influence", help="influence scores and tail fit per day")
    p.add_argument("--snapshot-dir", required=True)
    p.add_argument("--beta", type=float, default=infl.DEFAULT_BETA)
    p.add_argument("--bins", type=int, default=infl.DEFAULT_BINS)
    p.add_argument("--replicates", type=int, default=infl.DEFAULT_REPLICATES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-pct", type=float, default=infl.DEFAULT_TOP_PCT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("spatial", help="location, diffusion, and response analysis")
    p.add_argument("--events", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--gazetteer", help="location,lat,lon CSV (default: shipped table)")
    p.add_argument("--cache", help="append-only geocode cache CSV")
    p.add_argument("--top", type=int, default=sp.DEFAULT_TOP_LOCATIONS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("synth", help="generate a synthetic scenario with ledger")
    p.add_argument("--config", required=True, help="flat key = value scenario file")
    p.add_argument("--out", required=True, help="events JSONL path")
    p.add_argument("--ledger", help="ledger path (default: <out>.ledger.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="run the full pipeline into one JSON report")
    p.add_argument("--events", required=True)
    p.add_argument("--config", help="flat key = value study file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        logger.error("fatal: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
