"""Synthetic crisis-stream scenarios with exact ground-truth bookkeeping.

The generator plants users in real gazetteer cities and plays the stream
forward one day at a time. Every user anchors each day with a post, then
draws two more activity kinds from a per-user Dirichlet mixture (two draws
keep day-one activity shares off a single point). Communication events pick
their target by preferential attachment (in-degree + 1 raised to a strength
derived from the target tail exponent) damped by a gravity factor
distance^-gravity_exponent between cities; with probability repeat_prob an
existing out-edge is reused instead, so fresh draws always create
never-seen-before pairs. Reactions reference the target's same-day anchor
post and happen a log-normal delay after it, with the per-pair-class median
delay taken verbatim from the config.

A ledger sidecar records per-day fresh-pair ratios, the location frequency
matrix, realized delay medians, and an origin/diffuser flow matrix, all
tallied from the exact event list the caller receives, so pipeline outputs
can be checked by bookkeeping instead of re-estimation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .errors import ScenarioError
from .ingest import SECONDS_PER_DAY, COMMUNICATION_KINDS, EventRecord, Kind
from .kvconfig import load_kv, parse_kv_text
from .spatial import GeoPoint, STATE_SCALE_KM, haversine, load_gazetteer

DEFAULT_START = 1577836800  # 2020-01-01T00:00:00Z
FLOW_TOP_PCT = 2.0

# Spread of well-separated cities; scenarios take the first n_locations.
DEFAULT_SCENARIO_CITIES = (
    "houston, tx",
    "dallas, tx",
    "chicago, il",
    "los angeles, ca",
    "new york, ny",
    "seattle, wa",
    "miami, fl",
    "denver, co",
    "atlanta, ga",
    "boston, ma",
)

_KIND_BY_INDEX = (Kind.POST, Kind.RETWEET, Kind.REPLY, Kind.QUOTE)
DRAWS_PER_DAY = 2


@dataclass(slots=True)
class ScenarioConfig:
    days: int
    n_users: int
    influence_alpha: float = 2.0
    activity_mixture: tuple[float, float, float, float] = (2.0, 6.0, 2.0, 2.0)
    repeat_prob: float = 0.1
    gravity_exponent: float = 1.5
    n_locations: int = 5
    delay_median_map: dict[str, float] = field(
        default_factory=lambda: {"same": 300.0, "near": 900.0, "far": 1800.0}
    )
    seed: int = 0
    start: int = DEFAULT_START
    topic: str = "stormwatch"
    delay_sigma: float = 0.25
    # Regularizes distance^-gamma at zero distance; also sets how strongly
    # same-city traffic dominates (smaller floor = fewer cross-city events).
    gravity_floor_km: float = 40.0

    def validate(self) -> None:
        if self.days < 1:
            raise ScenarioError("days must be >= 1")
        if self.n_users < 2:
            raise ScenarioError("n_users must be >= 2")
        if self.influence_alpha <= 1.0:
            raise ScenarioError("influence_alpha must exceed 1")
        if len(self.activity_mixture) != 4 or any(a <= 0 for a in self.activity_mixture):
            raise ScenarioError("activity_mixture needs 4 positive concentrations")
        if not 0.0 <= self.repeat_prob < 1.0:
            raise ScenarioError("repeat_prob must lie in [0, 1)")
        if self.gravity_exponent < 0.0:
            raise ScenarioError("gravity_exponent must be >= 0")
        if not 1 <= self.n_locations <= len(DEFAULT_SCENARIO_CITIES):
            raise ScenarioError(
                f"n_locations must lie in 1..{len(DEFAULT_SCENARIO_CITIES)}"
            )
        if self.n_users < self.n_locations:
            raise ScenarioError("need at least one user per location")
        for key in ("same", "near", "far"):
            if self.delay_median_map.get(key, 0) <= 0:
                raise ScenarioError(f"delay_median_map[{key!r}] must be positive")
        if self.delay_sigma <= 0:
            raise ScenarioError("delay_sigma must be positive")
        if self.gravity_floor_km <= 0:
            raise ScenarioError("gravity_floor_km must be positive")

    @property
    def attachment_strength(self) -> float:
        # Heavier target tails (smaller alpha) need a more concentrated
        # attachment kernel; the exact tail exponent is calibrated per
        # scenario, not promised analytically.
        return 1.0 / (self.influence_alpha - 1.0)

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "ScenarioConfig":
        known = {
            "days", "n_users", "influence_alpha", "activity_mixture",
            "repeat_prob", "gravity_exponent", "n_locations",
            "delay_median_same", "delay_median_near", "delay_median_far",
            "seed", "start", "topic", "delay_sigma", "gravity_floor_km",
        }
        unknown = sorted(set(kv) - known)
        if unknown:
            raise ScenarioError(f"unknown config keys: {', '.join(unknown)}")

        def _req(key: str) -> str:
            if key not in kv:
                raise ScenarioError(f"missing config key: {key}")
            return kv[key]

        mixture = tuple(
            float(x) for x in kv.get("activity_mixture", "2,6,2,2").split(",")
        )
        cfg = cls(
            days=int(_req("days")),
            n_users=int(_req("n_users")),
            influence_alpha=float(kv.get("influence_alpha", "2.0")),
            activity_mixture=mixture,  # type: ignore[arg-type]
            repeat_prob=float(kv.get("repeat_prob", "0.1")),
            gravity_exponent=float(kv.get("gravity_exponent", "1.5")),
            n_locations=int(kv.get("n_locations", "5")),
            delay_median_map={
                "same": float(kv.get("delay_median_same", "300")),
                "near": float(kv.get("delay_median_near", "900")),
                "far": float(kv.get("delay_median_far", "1800")),
            },
            seed=int(kv.get("seed", "0")),
            start=int(kv.get("start", str(DEFAULT_START))),
            topic=kv.get("topic", "stormwatch"),
            delay_sigma=float(kv.get("delay_sigma", "0.25")),
            gravity_floor_km=float(kv.get("gravity_floor_km", "40")),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        return cls.from_mapping(load_kv(path))

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        return cls.from_mapping(parse_kv_text(text))


def power_law_inverse_cdf(u, alpha: float, x_min: float):
    """Map uniform draws through x_min * (1 - u)^(-1 / (alpha - 1))."""
    if alpha <= 1.0:
        raise ScenarioError("alpha must exceed 1")
    if x_min <= 0.0:
        raise ScenarioError("x_min must be positive")
    return x_min * np.power(1.0 - np.asarray(u, dtype=np.float64), -1.0 / (alpha - 1.0))


def gen_power_law_samples(
    alpha: float, x_min: float, n: int, seed: int = 0
) -> np.ndarray:
    """n deterministic inverse-CDF draws from a continuous power law."""
    rng = np.random.default_rng(seed)
    return power_law_inverse_cdf(rng.random(n), alpha, x_min)


def _pair_class(distance_km: float, same: bool) -> str:
    if same:
        return "same"
    if distance_km <= STATE_SCALE_KM:
        return "near"
    return "far"


def gen_scenario(config: ScenarioConfig) -> tuple[list[EventRecord], dict]:
    """Generate the event stream and its ground-truth ledger.

    Events come back sorted by timestamp and are byte-stable for a given
    config: the same seed always yields the identical stream.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_users
    n_loc = config.n_locations
    strength = config.attachment_strength

    gazetteer = load_gazetteer()
    cities = list(DEFAULT_SCENARIO_CITIES[:n_loc])
    coords = [gazetteer[name] for name in cities]

    dist_km = np.zeros((n_loc, n_loc), dtype=np.float64)
    for i in range(n_loc):
        for j in range(n_loc):
            if i != j:
                dist_km[i, j] = haversine(coords[i], coords[j]) / 1000.0
    if config.gravity_exponent == 0.0:
        gravity = np.ones((n_loc, n_loc), dtype=np.float64)
    else:
        gravity = np.power(
            np.maximum(dist_km, config.gravity_floor_km), -config.gravity_exponent
        )
    class_matrix = [
        [_pair_class(dist_km[i, j], i == j) for j in range(n_loc)] for i in range(n_loc)
    ]
    mu_matrix = np.array(
        [
            [math.log(config.delay_median_map[class_matrix[i][j]]) for j in range(n_loc)]
            for i in range(n_loc)
        ]
    )

    user_loc = rng.integers(0, n_loc, size=n)
    # The first n_loc users pin one resident per city so every configured
    # location participates even in tiny scenarios.
    user_loc[:n_loc] = np.arange(n_loc)
    members_by_loc = [np.where(user_loc == L)[0] for L in range(n_loc)]

    mixtures = rng.dirichlet(np.asarray(config.activity_mixture, dtype=np.float64), size=n)
    mixture_cum = np.cumsum(mixtures, axis=1)

    user_ids = [f"u{i:06d}" for i in range(n)]
    loc_names = [cities[L] for L in user_loc]

    in_degree = np.zeros(n, dtype=np.float64)  # distinct in-neighbors
    out_sets: list[set[int]] = [set() for _ in range(n)]
    out_lists: list[list[int]] = [[] for _ in range(n)]
    anchor_ts = np.zeros(n, dtype=np.int64)
    anchor_id: list[str] = [""] * n

    study_end = config.start + config.days * SECONDS_PER_DAY
    events: list[tuple[int, int, EventRecord]] = []  # (ts, seq, record)
    seq = 0
    dropped_overflow = 0
    dropped_saturated = 0

    def _emit(ts: int, user: int, kind: Kind, target: int | None, tev: str | None) -> str:
        nonlocal seq
        eid = f"e{seq:08d}"
        record = EventRecord(
            event_id=eid,
            user_id=user_ids[user],
            kind=kind,
            timestamp=int(ts),
            target_user_id=None if target is None else user_ids[target],
            target_event_id=tev,
            profile_location=loc_names[user],
            text=f"{config.topic} day {int(ts - config.start) // SECONDS_PER_DAY}",
        )
        events.append((int(ts), seq, record))
        seq += 1
        return eid

    for day in range(config.days):
        day_start = config.start + day * SECONDS_PER_DAY

        # Anchor posts: everyone posts once at a uniform time of day.
        post_ts = day_start + rng.integers(0, SECONDS_PER_DAY, size=n)
        for u in range(n):
            anchor_ts[u] = post_ts[u]
            anchor_id[u] = _emit(int(post_ts[u]), u, Kind.POST, None, None)

        # Attachment weights frozen at day start, shared by both draws.
        weights = np.power(in_degree + 1.0, strength)
        loc_cum: list[np.ndarray] = []
        loc_tot = np.zeros(n_loc, dtype=np.float64)
        for L in range(n_loc):
            cum = np.cumsum(weights[members_by_loc[L]])
            loc_cum.append(cum)
            loc_tot[L] = cum[-1]
        loc_pick = gravity * loc_tot[None, :]
        loc_pick_cum = np.cumsum(loc_pick, axis=1)
        loc_pick_cum /= loc_pick_cum[:, -1][:, None]

        def _redraw(a_loc: int) -> int:
            lt = min(
                int(np.searchsorted(loc_pick_cum[a_loc], rng.random(), side="right")),
                n_loc - 1,
            )
            pos = min(
                int(np.searchsorted(loc_cum[lt], rng.random() * loc_tot[lt], side="right")),
                members_by_loc[lt].size - 1,
            )
            return int(members_by_loc[lt][pos])

        for _ in range(DRAWS_PER_DAY):
            kind_u = rng.random(n)
            kinds = np.minimum((kind_u[:, None] > mixture_cum).sum(axis=1), 3)
            extra_posts = np.where(kinds == 0)[0]
            extra_ts = day_start + rng.integers(0, SECONDS_PER_DAY, size=extra_posts.size)
            for u, ts in zip(extra_posts, extra_ts):
                _emit(int(ts), int(u), Kind.POST, None, None)

            actors = np.where(kinds > 0)[0]
            if actors.size == 0:
                continue
            repeat_u = rng.random(actors.size)
            loc_u = rng.random(actors.size)
            member_u = rng.random(actors.size)

            # Vectorized fresh-target proposal for every communication actor.
            actor_locs = user_loc[actors]
            tloc = np.zeros(actors.size, dtype=np.int64)
            for La in range(n_loc):
                sel = actor_locs == La
                if sel.any():
                    tloc[sel] = np.minimum(
                        np.searchsorted(loc_pick_cum[La], loc_u[sel], side="right"),
                        n_loc - 1,
                    )
            proposal = np.zeros(actors.size, dtype=np.int64)
            for Lt in range(n_loc):
                sel = tloc == Lt
                if sel.any():
                    pos = np.minimum(
                        np.searchsorted(loc_cum[Lt], member_u[sel] * loc_tot[Lt], side="right"),
                        members_by_loc[Lt].size - 1,
                    )
                    proposal[sel] = members_by_loc[Lt][pos]

            final_actor: list[int] = []
            final_target: list[int] = []
            final_kind: list[int] = []
            for i in range(actors.size):
                a = int(actors[i])
                neighbors = out_lists[a]
                if repeat_u[i] < config.repeat_prob and neighbors:
                    t = neighbors[int(member_u[i] * len(neighbors))]
                else:
                    t = int(proposal[i])
                    tries = 0
                    while t in out_sets[a]:
                        tries += 1
                        if tries > 64:
                            t = next(
                                (c for c in range(n) if c not in out_sets[a]), -1
                            )
                            break
                        t = _redraw(user_loc[a])
                    if t < 0:
                        dropped_saturated += 1
                        continue
                    out_sets[a].add(t)
                    out_lists[a].append(t)
                    in_degree[t] += 1.0
                final_actor.append(a)
                final_target.append(t)
                final_kind.append(int(kinds[a]))

            if not final_actor:
                continue
            actor_arr = np.array(final_actor, dtype=np.int64)
            target_arr = np.array(final_target, dtype=np.int64)
            mu = mu_matrix[user_loc[actor_arr], user_loc[target_arr]]
            delays = np.rint(rng.lognormal(mean=mu, sigma=config.delay_sigma)).astype(np.int64)
            react_ts = anchor_ts[target_arr] + delays
            for idx in range(actor_arr.size):
                ts = int(react_ts[idx])
                if ts >= study_end:
                    dropped_overflow += 1
                    continue
                t = int(target_arr[idx])
                _emit(
                    ts,
                    int(actor_arr[idx]),
                    _KIND_BY_INDEX[final_kind[idx]],
                    t,
                    anchor_id[t],
                )

    events.sort(key=lambda item: (item[0], item[1]))
    stream = [record for _, _, record in events]
    ledger = _build_ledger(
        stream,
        config,
        cities,
        coords,
        class_matrix,
        user_ids,
        np.bincount(user_loc, minlength=n_loc).tolist(),
        dropped_overflow,
        dropped_saturated,
    )
    return stream, ledger


def _build_ledger(
    stream: Sequence[EventRecord],
    config: ScenarioConfig,
    cities: list[str],
    coords: list[GeoPoint],
    class_matrix: list[list[str]],
    user_ids: list[str],
    loc_user_counts: list[int],
    dropped_overflow: int,
    dropped_saturated: int,
) -> dict:
    """Tally ground truth directly off the final event list."""
    n_loc = len(cities)
    loc_index = {name: i for i, name in enumerate(cities)}
    by_id: dict[str, EventRecord] = {ev.event_id: ev for ev in stream}

    kind_counts = {kind.value: 0 for kind in Kind}
    first_seen: dict[tuple[str, str], int] = {}
    day_rows: list[dict] = []
    seen_today: set[tuple[str, str]] = set()
    new_today = 0
    current_day = 0

    freq = np.zeros((n_loc, n_loc), dtype=np.int64)
    delay_values: dict[tuple[int, int], list[int]] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    referred: dict[str, int] = {}

    def _close_day(day: int) -> None:
        active = len(seen_today)
        day_rows.append(
            {
                "day": day,
                "new_pairs": new_today,
                "active_pairs": active,
                "ratio": (new_today / active) if active else None,
            }
        )

    for ev in stream:
        day = (ev.timestamp - config.start) // SECONDS_PER_DAY
        while day > current_day:
            _close_day(current_day)
            seen_today = set()
            new_today = 0
            current_day += 1
        kind_counts[ev.kind.value] += 1
        if ev.kind not in COMMUNICATION_KINDS:
            continue
        pair = (ev.user_id, ev.target_user_id)
        if pair not in seen_today:
            seen_today.add(pair)
            if pair not in first_seen:
                first_seen[pair] = day
                new_today += 1
        pair_counts[pair] = pair_counts.get(pair, 0) + 1
        referred[ev.target_user_id] = referred.get(ev.target_user_id, 0) + 1

        i = loc_index[ev.profile_location]
        origin = by_id[ev.target_event_id]
        j = loc_index[origin.profile_location]
        freq[i, j] += 1
        delay_values.setdefault((i, j), []).append(ev.timestamp - origin.timestamp)
    while current_day < config.days:
        _close_day(current_day)
        seen_today = set()
        new_today = 0
        current_day += 1

    # Flow ground truth: influential = top ceil(2%) users by times referred.
    k = math.ceil(FLOW_TOP_PCT / 100.0 * len(user_ids))
    ranked = sorted(user_ids, key=lambda u: (-referred.get(u, 0), u))
    influential = set(ranked[:k])
    sums = {"ii": 0, "io": 0, "oi": 0, "oo": 0}
    total = 0
    for (diffuser, origin_user), count in pair_counts.items():
        key = ("i" if origin_user in influential else "o") + (
            "i" if diffuser in influential else "o"
        )
        sums[key] += count
        total += count
    flow = {
        key: (100.0 * value / total if total else 0.0) for key, value in sums.items()
    }

    pair_median: list[list[float | None]] = [[None] * n_loc for _ in range(n_loc)]
    pair_n: list[list[int]] = [[0] * n_loc for _ in range(n_loc)]
    for (i, j), values in delay_values.items():
        pair_median[i][j] = float(np.median(values))
        pair_n[i][j] = len(values)

    cfg = asdict(config)
    cfg["activity_mixture"] = list(config.activity_mixture)
    return {
        "schema_version": 1,
        "config": cfg,
        "attachment_strength": config.attachment_strength,
        "locations": [
            {
                "name": cities[L],
                "lat": coords[L].lat,
                "lon": coords[L].lon,
                "users": int(loc_user_counts[L]),
            }
            for L in range(n_loc)
        ],
        "totals": {
            "events": len(stream),
            "kind_counts": kind_counts,
            "communications": total,
            "dropped_overflow": dropped_overflow,
            "dropped_saturated": dropped_saturated,
        },
        "memory": day_rows,
        "freq_matrix": freq.tolist(),
        "delay": {
            "sigma": config.delay_sigma,
            "class_medians": dict(config.delay_median_map),
            "pair_class": class_matrix,
            "pair_median": pair_median,
            "pair_count": pair_n,
        },
        "flow": {
            "top_pct": FLOW_TOP_PCT,
            "influential_count": k,
            **flow,
        },
    }


def write_scenario(
    events: Sequence[EventRecord], ledger: dict, events_path: str, ledger_path: str
) -> None:
    """Serialize the stream as JSONL plus the ledger sidecar."""
    from .ingest import write_events_jsonl

    write_events_jsonl(events, events_path)
    with open(ledger_path, "w", encoding="utf-8") as fh:
        json.dump(ledger, fh, sort_keys=True, indent=1)
        fh.write("\n")
