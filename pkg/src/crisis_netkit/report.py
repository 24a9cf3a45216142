"""End-to-end study pipeline producing one consolidated JSON report.

Sections are computed per day (graph, activity, structures, memory, weights,
influence, flows) plus two study-level spatial sections. A failing section is
recorded as {"skipped": reason} without aborting the rest; input problems
(unreadable file, broken schema, empty filtered stream) are fatal. Given the
same inputs, config, and seed, the report bytes are identical run to run.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from . import activity as act
from . import graph as gr
from . import influence as infl
from . import spatial as sp
from .errors import StudyWindowError
from .ingest import (
    SECONDS_PER_DAY,
    COMMUNICATION_KINDS,
    DayBucket,
    EventRecord,
    Kind,
    day_partition,
    filter_by_keywords,
    parse_events,
)
from .kvconfig import load_kv, parse_kv_text
from .structures import StructureClass, StructureTracker

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
SERIES_MAX_POINTS = 512


@dataclass(slots=True)
class StudyConfig:
    """Pipeline knobs; defaults mirror the measurement constants."""

    name: str = "study"
    fmt: str = "jsonl"
    start: int | None = None          # epoch seconds; None floors min ts to UTC midnight
    days: int | None = None           # None runs through the last event day
    keywords: tuple[str, ...] = ()    # empty tuple disables keyword filtering
    beta: float = infl.DEFAULT_BETA
    epsilon: float = infl.DEFAULT_EPSILON
    max_iter: int = infl.DEFAULT_MAX_ITER
    bins: int = infl.DEFAULT_BINS
    replicates: int = infl.DEFAULT_REPLICATES
    seed: int = 0
    top_pct: float = infl.DEFAULT_TOP_PCT
    top_locations: int = sp.DEFAULT_TOP_LOCATIONS
    bandwidth: float = act.DEFAULT_BANDWIDTH
    grid_points: int = act.DEFAULT_GRID_POINTS
    curve_bins: int = sp.DEFAULT_CURVE_BINS
    curve_lo_km: float = sp.DEFAULT_CURVE_LO_KM
    curve_hi_km: float = sp.DEFAULT_CURVE_HI_KM
    city_km: float = sp.CITY_SCALE_KM
    state_km: float = sp.STATE_SCALE_KM
    gazetteer: str | None = None      # None uses the shipped table
    cache: str | None = None
    series_max_points: int = SERIES_MAX_POINTS

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "StudyConfig":
        cfg = cls()
        converters: dict[str, Callable[[str], object]] = {
            "name": str,
            "fmt": str,
            "start": _parse_start,
            "days": int,
            "keywords": lambda v: tuple(k.strip() for k in v.split(",") if k.strip()),
            "beta": float,
            "epsilon": float,
            "max_iter": int,
            "bins": int,
            "replicates": int,
            "seed": int,
            "top_pct": float,
            "top_locations": int,
            "bandwidth": float,
            "grid_points": int,
            "curve_bins": int,
            "curve_lo_km": float,
            "curve_hi_km": float,
            "city_km": float,
            "state_km": float,
            "gazetteer": str,
            "cache": str,
            "series_max_points": int,
        }
        for key, raw in kv.items():
            if key not in converters:
                raise ValueError(f"unknown config key: {key}")
            setattr(cfg, key, converters[key](raw))
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "StudyConfig":
        return cls.from_mapping(load_kv(path))

    @classmethod
    def from_text(cls, text: str) -> "StudyConfig":
        return cls.from_mapping(parse_kv_text(text))


def _parse_start(raw: str) -> int:
    """Epoch seconds from either an integer or an ISO 8601 timestamp."""
    try:
        return int(raw)
    except ValueError:
        pass
    text = raw.replace("Z", "+00:00")
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _decimate(arr: np.ndarray, max_points: int) -> np.ndarray:
    """Evenly thin a series to at most max_points rows, keeping endpoints."""
    n = arr.shape[0]
    if n <= max_points:
        return arr
    idx = np.unique(np.round(np.linspace(0, n - 1, max_points)).astype(np.int64))
    return arr[idx]


def _pairs(arr: np.ndarray) -> list[list[float]]:
    return [[float(a), float(b)] for a, b in arr]


class _SectionLog:
    def __init__(self) -> None:
        self.skips: list[str] = []

    def run(self, label: str, fn: Callable[[], dict]) -> dict:
        try:
            return fn()
        except Exception as exc:
            reason = f"{type(exc).__name__}: {exc}"
            logger.warning("section %s skipped: %s", label, reason)
            self.skips.append(f"{label}: {reason}")
            return {"skipped": reason}


class _ActivityCounts:
    """Running per-user activity counts over the four kinds."""

    _POS = {kind: i for i, kind in enumerate(act.KIND_ORDER)}

    def __init__(self) -> None:
        self.row_of: dict[str, int] = {}
        self.counts = np.zeros((1024, 4), dtype=np.int64)

    def add_bucket(self, bucket: DayBucket) -> None:
        rows = np.empty(len(bucket.events), dtype=np.int64)
        kinds = np.empty(len(bucket.events), dtype=np.int64)
        for i, ev in enumerate(bucket.events):
            row = self.row_of.get(ev.user_id)
            if row is None:
                row = len(self.row_of)
                self.row_of[ev.user_id] = row
                if row >= self.counts.shape[0]:
                    self.counts = np.vstack(
                        [self.counts, np.zeros_like(self.counts)]
                    )
            rows[i] = row
            kinds[i] = self._POS[ev.kind]
        np.add.at(self.counts, (rows, kinds), 1)

    def proportions(self) -> tuple[np.ndarray, int]:
        n = len(self.row_of)
        counts = self.counts[:n].astype(np.float64)
        totals = counts.sum(axis=1)
        return counts / totals[:, None], n


def _activity_section(
    counts: _ActivityCounts, config: StudyConfig, log: _SectionLog, day: int
) -> dict:
    proportions, n_users = counts.proportions()
    section: dict = {"total_users": n_users, "kinds": {}}
    for col, kind in enumerate(act.KIND_ORDER):
        def _one(col: int = col, kind: Kind = kind) -> dict:
            r = proportions[:, col]
            low = int((r == 0.0).sum())
            high = int((r == 1.0).sum())
            mid = r[(r > 0.0) & (r < 1.0)]
            values = -np.log(mid)
            lam, transformed = act.boxcox_mle(values)
            grid = act.kde(
                transformed,
                bandwidth=config.bandwidth,
                grid_points=config.grid_points,
            )
            qq = act.qq_normal(transformed)
            return {
                "lambda": float(lam),
                "n": int(transformed.size),
                "excluded_low": low,
                "excluded_high": high,
                "mean": float(transformed.mean()),
                "variance": float(transformed.var()),
                "kde": _pairs(_decimate(grid, config.series_max_points)),
                "qq": _pairs(_decimate(qq, config.series_max_points)),
            }

        section["kinds"][kind.value] = log.run(f"day{day}.activity.{kind.value}", _one)
    return section


def _influence_sections(
    store: gr.SnapshotStore,
    day: int,
    weights: np.ndarray,
    config: StudyConfig,
    log: _SectionLog,
) -> tuple[dict, dict]:
    n = store.nodes_at(day)
    src, dst = store.edge_arrays_at(day)
    rank, iterations, _ = infl.pagerank_arrays(
        n, src, dst,
        beta=config.beta, epsilon=config.epsilon, max_iter=config.max_iter,
    )

    influence: dict = {
        "beta": config.beta,
        "iterations": iterations,
        "nodes": n,
    }

    normalized = infl.normalize_scores(rank, bins=config.bins)
    fit = infl.fit_power_law(normalized.values, x_min=1.0)
    # One deterministic bootstrap stream per study day.
    p_value = infl.ks_gof(
        normalized.values, fit,
        replicates=config.replicates, seed=config.seed + day,
    )
    curve = infl.ccdf(normalized.values)
    influence.update(
        {
            "x_min_raw": normalized.x_min_raw,
            "excluded": normalized.excluded,
            "n_tail": fit.n_tail,
            "alpha": fit.alpha,
            "ks": fit.ks_statistic,
            "p_value": p_value,
            "replicates": config.replicates,
            "ccdf": _pairs(_decimate(curve, config.series_max_points)),
        }
    )

    def _flows() -> dict:
        ids = np.array(store.node_ids[:n])
        k = math.ceil(config.top_pct / 100.0 * n)
        # Highest score wins; ties resolve to the lexicographically
        # smaller id, matching the map-based selector.
        order = np.lexsort((ids, -rank))
        influential = np.zeros(n, dtype=bool)
        influential[order[:k]] = True
        ordinary_origin = ~influential[dst]
        ordinary_diffuser = ~influential[src]
        code = ordinary_origin.astype(np.int64) * 2 + ordinary_diffuser.astype(np.int64)
        sums = np.bincount(code, weights=weights.astype(np.float64), minlength=4)
        total = float(sums.sum())
        if total == 0.0:
            raise ValueError("no communication volume")
        return {
            "top_pct": config.top_pct,
            "influential_users": int(k),
            "ii": 100.0 * float(sums[0]) / total,
            "io": 100.0 * float(sums[1]) / total,
            "oi": 100.0 * float(sums[2]) / total,
            "oo": 100.0 * float(sums[3]) / total,
        }

    flows = log.run(f"day{day}.flows", _flows)
    return influence, flows


def _spatial_sections(
    events: Sequence[EventRecord], config: StudyConfig, log: _SectionLog
) -> tuple[dict, dict]:
    gazetteer = sp.load_gazetteer(config.gazetteer)
    cache = sp.GeocodeCache(config.cache)
    ranked, shortfall = sp.top_locations(events, k=config.top_locations)
    if not ranked:
        raise ValueError("no events carry a profile location")
    for stats in ranked:
        stats.coordinates = sp.geocode(stats.name, gazetteer, cache)
    names = [stats.name for stats in ranked]
    coords = [stats.coordinates for stats in ranked]
    user_loc = sp.user_locations(events)

    freq = sp.frequency_matrix(events, names, user_loc)
    freq_curve = sp.decay_curve(
        freq, coords,
        n_bins=config.curve_bins,
        lo_km=config.curve_lo_km, hi_km=config.curve_hi_km,
    )
    spatial = {
        "top_k": config.top_locations,
        "shortfall": shortfall,
        "city_km": config.city_km,
        "state_km": config.state_km,
        "locations": [
            {
                "name": stats.name,
                "rank": stats.rank,
                "tweet_count": stats.tweet_count,
                "lat": None if stats.coordinates is None else stats.coordinates.lat,
                "lon": None if stats.coordinates is None else stats.coordinates.lon,
            }
            for stats in ranked
        ],
        "freq_matrix": freq.tolist(),
        "freq_curve": _curve_rows(freq_curve),
        "surrogate_freq": [
            [int(i), int(j), float(w)] for i, j, w in sp.surrogate_model(freq)
        ],
    }

    def _response() -> dict:
        matrix, stats = sp.response_times(events, names, user_loc)
        resp_curve = sp.decay_curve(
            matrix, coords,
            n_bins=config.curve_bins,
            lo_km=config.curve_lo_km, hi_km=config.curve_hi_km,
        )
        return {
            "resp_matrix": [
                [None if math.isnan(v) else float(v) for v in row]
                for row in matrix.tolist()
            ],
            "samples": stats.samples,
            "unresolved": stats.unresolved,
            "clock_anomalies": stats.clock_anomalies,
            "resp_curve": _curve_rows(resp_curve),
            "surrogate_resp": [
                [int(i), int(j), float(w)]
                for i, j, w in sp.surrogate_model(matrix, inverse=True)
            ],
        }

    response = log.run("response", _response)
    return spatial, response


def _curve_rows(curve: sp.DecayCurve) -> dict:
    return {
        "same_location": curve.same_location,
        "bins": [
            [float(lo), float(hi), None if mean is None else float(mean)]
            for lo, hi, mean in curve.bins
        ],
        "excluded_pairs": curve.excluded_pairs,
    }


def run_pipeline(events_path: str, config: StudyConfig) -> dict:
    """Execute the full study and return the report as a plain dict."""
    records, parse_stats = parse_events(events_path, config.fmt)
    if not records:
        raise ValueError("input stream contains no valid events")
    filtered_out = 0
    if config.keywords:
        kept = filter_by_keywords(records, config.keywords)
        filtered_out = len(records) - len(kept)
        records = kept
        if not records:
            raise ValueError("keyword filter removed every event")

    start = config.start
    if start is None:
        start = (min(ev.timestamp for ev in records) // SECONDS_PER_DAY) * SECONDS_PER_DAY

    out_of_window = 0
    if config.days is not None:
        end = start + config.days * SECONDS_PER_DAY
        in_window = [ev for ev in records if ev.timestamp < end]
        out_of_window = len(records) - len(in_window)
        records = in_window
        if not records:
            raise ValueError("study window contains no events")

    buckets = day_partition(records, start)
    if config.days is not None:
        while len(buckets) < config.days:
            buckets.append(DayBucket(day_index=len(buckets)))
    n_days = len(buckets)

    store = gr.SnapshotStore.from_buckets(buckets)
    log = _SectionLog()
    counts = _ActivityCounts()
    tracker = StructureTracker()

    weights = np.zeros(len(store.edge_src), dtype=np.int64)
    day_reports: list[dict] = []
    prev_edges = 0
    for day in range(n_days):
        idx, cnt = store.day_deltas[day]
        np.add.at(weights, idx, cnt)
        counts.add_bucket(buckets[day])
        for eidx in range(prev_edges, store.edges_at(day)):
            tracker.add_edge(
                store.node_ids[store.edge_src[eidx]],
                store.node_ids[store.edge_dst[eidx]],
            )
        prev_edges = store.edges_at(day)

        m = store.edges_at(day)
        day_weights = weights[:m]
        graph_section = {
            "nodes": store.nodes_at(day),
            "active_users": len(counts.row_of),
            "edges": m,
            "total_weight": int(day_weights.sum()),
        }

        def _structures() -> dict:
            breakdown = tracker.breakdown()
            out = {cls.value: breakdown.proportions.get(cls, 0.0) for cls in StructureClass}
            out["classified_users"] = breakdown.classified_users
            return out

        def _memory() -> dict:
            active = store.active_pairs(day)
            new = store.new_pairs(day)
            return {
                "new_pairs": new,
                "active_pairs": active,
                "ratio": (new / active) if active else None,
            }

        def _weights_section() -> dict:
            stats = gr.weight_stats_from_array(day_weights)
            return {
                "median": stats.median,
                "variance": stats.variance,
                "max": stats.max,
                "n_edges": stats.n_edges,
                "histogram": {str(k): v for k, v in sorted(stats.histogram.items())},
            }

        influence_and_flows = log.run(
            f"day{day}.influence",
            lambda: dict(
                zip(("influence", "flows"),
                    _influence_sections(store, day, day_weights, config, log))
            ),
        )
        if "skipped" in influence_and_flows:
            influence_section = influence_and_flows
            flows_section = {"skipped": influence_and_flows["skipped"]}
        else:
            influence_section = influence_and_flows["influence"]
            flows_section = influence_and_flows["flows"]

        day_reports.append(
            {
                "day": day,
                "graph": graph_section,
                "activity": log.run(
                    f"day{day}.activity",
                    lambda: _activity_section(counts, config, log, day),
                ),
                "structures": log.run(f"day{day}.structures", _structures),
                "memory": log.run(f"day{day}.memory", _memory),
                "weights": log.run(f"day{day}.weights", _weights_section),
                "influence": influence_section,
                "flows": flows_section,
            }
        )

    spatial_and_response = log.run(
        "spatial",
        lambda: dict(
            zip(("spatial", "response"), _spatial_sections(records, config, log))
        ),
    )
    if "skipped" in spatial_and_response:
        spatial_section = spatial_and_response
        response_section = {"skipped": spatial_and_response["skipped"]}
    else:
        spatial_section = spatial_and_response["spatial"]
        response_section = spatial_and_response["response"]

    config_echo = asdict(config)
    config_echo["keywords"] = list(config.keywords)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "study": {
            "name": config.name,
            "start": start,
            "days": n_days,
            "config": config_echo,
        },
        "ingest": {
            "parsed": parse_stats.parsed,
            "malformed": parse_stats.malformed,
            "filtered_out": filtered_out,
            "out_of_window": out_of_window,
            "events": len(records),
        },
        "days": day_reports,
        "spatial": spatial_section,
        "response": response_section,
        "skipped_sections": log.skips,
    }
    return report


def report_to_bytes(report: dict) -> bytes:
    """Canonical JSON encoding: sorted keys, fixed separators, newline end."""
    return (json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def write_report(report: dict, path: str) -> int:
    data = report_to_bytes(report)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)
