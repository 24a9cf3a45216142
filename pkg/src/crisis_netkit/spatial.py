"""Spatial aggregation: locations, distances, diffusion and response surfaces.

User coordinates come from free-text profile locations resolved offline
through a shipped gazetteer plus an append-only cache; an external geocoder
is optional and never required for the pipeline to finish. Distances are
great-circle meters on a spherical earth.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .ingest import COMMUNICATION_KINDS, EventRecord

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_TOP_LOCATIONS = 100
DEFAULT_CURVE_BINS = 20
DEFAULT_CURVE_LO_KM = 1.0
DEFAULT_CURVE_HI_KM = 20_000.0
CITY_SCALE_KM = 2.0
STATE_SCALE_KM = 100.0
WIDTH_MIN = 0.5
WIDTH_MAX = 5.0

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(slots=True)
class LocationStats:
    name: str
    tweet_count: int
    rank: int
    coordinates: GeoPoint | None = None


@dataclass(slots=True)
class DecayCurve:
    """Mean cell value per great-circle distance bin.

    ``same_location`` covers pairs at city scale (identical or sub-km); the
    log-spaced bins carry (lo_m, hi_m, mean) with mean None when no pair
    falls inside. ``excluded_pairs`` counts pairs without coordinates.
    """

    same_location: float | None
    bins: list[tuple[float, float, float | None]]
    excluded_pairs: int


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    phi_a = math.radians(a.lat)
    phi_b = math.radians(b.lat)
    d_phi = phi_b - phi_a
    d_lambda = math.radians(b.lon - a.lon)
    h = (
        math.sin(d_phi / 2.0) ** 2
        + math.cos(phi_a) * math.cos(phi_b) * math.sin(d_lambda / 2.0) ** 2
    )
    return EARTH_RADIUS_M * 2.0 * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def normalize_location(raw: str) -> str:
    """Trim, casefold, and collapse internal whitespace."""
    return _WHITESPACE.sub(" ", raw.strip().casefold())


def top_locations(
    events: Iterable[EventRecord], k: int = DEFAULT_TOP_LOCATIONS
) -> tuple[list[LocationStats], bool]:
    """Top-k locations by event count; ties break lexicographically.

    Returns the ranked list and a shortfall flag set when fewer than k
    distinct locations exist (all are returned in that case).
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    counts: dict[str, int] = {}
    for ev in events:
        if ev.profile_location is None:
            continue
        name = normalize_location(ev.profile_location)
        if not name:
            continue
        counts[name] = counts.get(name, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    shortfall = len(ranked) < k
    if shortfall:
        logger.warning("only %d distinct locations for top-%d request", len(ranked), k)
    top = ranked[:k]
    return (
        [
            LocationStats(name=name, tweet_count=count, rank=i + 1)
            for i, (name, count) in enumerate(top)
        ],
        shortfall,
    )


def default_gazetteer_path() -> str:
    return str(resources.files("crisis_netkit").joinpath("data/gazetteer.csv"))


def load_gazetteer(path: str | None = None) -> dict[str, GeoPoint]:
    """Load a location,lat,lon CSV keyed by normalized location name."""
    if path is None:
        path = default_gazetteer_path()
    table: dict[str, GeoPoint] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                point = GeoPoint(lat=float(row["lat"]), lon=float(row["lon"]))
            except (KeyError, TypeError, ValueError):
                logger.warning("skipping bad gazetteer row: %r", row)
                continue
            table[normalize_location(row["location"])] = point
    return table


class GeocodeCache:
    """Append-only file-backed cache of resolved locations."""

    def __init__(self, path: str | None = None):
        self.path = path
        self._table: dict[str, GeoPoint] = {}
        if path is not None and os.path.exists(path):
            self._table.update(load_gazetteer(path))

    def get(self, name: str) -> GeoPoint | None:
        return self._table.get(name)

    def put(self, name: str, point: GeoPoint) -> None:
        if name in self._table:
            return
        self._table[name] = point
        if self.path is not None:
            is_new = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
            with open(self.path, "a", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                if is_new:
                    writer.writerow(["location", "lat", "lon"])
                writer.writerow([name, point.lat, point.lon])


# An external geocoder is any callable name -> GeoPoint | None. Failures
# must degrade to None; the pipeline never depends on the network.
GeocoderClient = Callable[[str], "GeoPoint | None"]


def geocode(
    location: str,
    gazetteer: Mapping[str, GeoPoint],
    cache: GeocodeCache | None = None,
    client: GeocoderClient | None = None,
) -> GeoPoint | None:
    """Resolve a raw location string: cache, then gazetteer, then client."""
    name = normalize_location(location)
    if not name:
        return None
    if cache is not None:
        hit = cache.get(name)
        if hit is not None:
            return hit
    hit = gazetteer.get(name)
    if hit is not None:
        return hit
    if client is not None:
        try:
            found = client(name)
        except Exception as exc:  # client trouble is never fatal
            logger.warning("geocoder client failed for %r: %s", name, exc)
            return None
        if found is not None and cache is not None:
            cache.put(name, found)
        return found
    return None


def user_locations(events: Iterable[EventRecord]) -> dict[str, str]:
    """Most frequent non-empty profile location per user, ties to earliest."""
    tallies: dict[str, dict[str, list[int]]] = {}
    seq = 0
    for ev in events:
        if ev.profile_location is None:
            continue
        name = normalize_location(ev.profile_location)
        if not name:
            continue
        per_user = tallies.setdefault(ev.user_id, {})
        entry = per_user.get(name)
        if entry is None:
            per_user[name] = [1, seq]
            seq += 1
        else:
            entry[0] += 1
    resolved = {}
    for user, per_user in tallies.items():
        best = min(per_user.items(), key=lambda item: (-item[1][0], item[1][1]))
        resolved[user] = best[0]
    return resolved


def frequency_matrix(
    events: Iterable[EventRecord],
    locations: Sequence[str],
    user_location: Mapping[str, str],
) -> np.ndarray:
    """Communication counts, rows = acting user location, cols = target location.

    Only communication events whose actor and target both map into the given
    location list are counted; the total therefore never exceeds the number
    of communication events.
    """
    index = {name: i for i, name in enumerate(locations)}
    matrix = np.zeros((len(locations), len(locations)), dtype=np.int64)
    for ev in events:
        if ev.kind not in COMMUNICATION_KINDS:
            continue
        src_loc = user_location.get(ev.user_id)
        dst_loc = user_location.get(ev.target_user_id)
        if src_loc is None or dst_loc is None:
            continue
        i = index.get(src_loc)
        j = index.get(dst_loc)
        if i is None or j is None:
            continue
        matrix[i, j] += 1
    return matrix


def log_distance_edges(
    n_bins: int = DEFAULT_CURVE_BINS,
    lo_km: float = DEFAULT_CURVE_LO_KM,
    hi_km: float = DEFAULT_CURVE_HI_KM,
) -> np.ndarray:
    """Logarithmic bin edges in meters, n_bins + 1 of them."""
    return np.logspace(math.log10(lo_km * 1000.0), math.log10(hi_km * 1000.0), n_bins + 1)


def decay_curve(
    matrix: np.ndarray,
    coordinates: Sequence[GeoPoint | None],
    n_bins: int = DEFAULT_CURVE_BINS,
    lo_km: float = DEFAULT_CURVE_LO_KM,
    hi_km: float = DEFAULT_CURVE_HI_KM,
) -> DecayCurve:
    """Average cell value per distance bin between location pairs.

    Diagonal pairs (and any pair closer than the first edge) land in the
    same-location bucket. NaN cells mean "no observation" and are skipped;
    pairs missing coordinates are excluded and counted.
    """
    k = matrix.shape[0]
    if matrix.shape != (k, len(coordinates)):
        raise ValueError("matrix and coordinate list sizes disagree")
    edges = log_distance_edges(n_bins, lo_km, hi_km)
    sums = np.zeros(n_bins, dtype=np.float64)
    counts = np.zeros(n_bins, dtype=np.int64)
    same_sum = 0.0
    same_count = 0
    excluded = 0
    for i in range(k):
        for j in range(k):
            value = float(matrix[i, j])
            if math.isnan(value):
                continue
            a, b = coordinates[i], coordinates[j]
            if a is None or b is None:
                excluded += 1
                continue
            distance = 0.0 if i == j else haversine(a, b)
            if distance < edges[0]:
                same_sum += value
                same_count += 1
                continue
            idx = int(np.searchsorted(edges, distance, side="right")) - 1
            if idx >= n_bins:
                idx = n_bins - 1  # exactly at or beyond the last edge
            sums[idx] += value
            counts[idx] += 1
    bins: list[tuple[float, float, float | None]] = []
    for b in range(n_bins):
        mean = (sums[b] / counts[b]) if counts[b] else None
        bins.append((float(edges[b]), float(edges[b + 1]), mean))
    return DecayCurve(
        same_location=(same_sum / same_count) if same_count else None,
        bins=bins,
        excluded_pairs=excluded,
    )


@dataclass(slots=True)
class ResponseStats:
    samples: int
    unresolved: int
    clock_anomalies: int


def response_times(
    events: Sequence[EventRecord],
    locations: Sequence[str],
    user_location: Mapping[str, str],
) -> tuple[np.ndarray, ResponseStats]:
    """Median seconds from origin post to reaction, per location pair.

    Rows are the reacting user's location, columns the origin author's.
    Reactions whose target event is unknown are skipped and counted, as are
    negative deltas (clock anomalies). Cells with no samples are NaN.
    """
    index = {name: i for i, name in enumerate(locations)}
    by_event: dict[str, EventRecord] = {ev.event_id: ev for ev in events}
    cells: dict[tuple[int, int], list[float]] = {}
    unresolved = 0
    anomalies = 0
    samples = 0
    for ev in events:
        if ev.kind not in COMMUNICATION_KINDS or ev.target_event_id is None:
            continue
        origin = by_event.get(ev.target_event_id)
        if origin is None:
            unresolved += 1
            continue
        delta = ev.timestamp - origin.timestamp
        if delta < 0:
            anomalies += 1
            continue
        src_loc = user_location.get(ev.user_id)
        dst_loc = user_location.get(origin.user_id)
        if src_loc is None or dst_loc is None:
            continue
        i = index.get(src_loc)
        j = index.get(dst_loc)
        if i is None or j is None:
            continue
        cells.setdefault((i, j), []).append(float(delta))
        samples += 1
    matrix = np.full((len(locations), len(locations)), np.nan, dtype=np.float64)
    for (i, j), values in cells.items():
        matrix[i, j] = float(np.median(values))
    return matrix, ResponseStats(samples=samples, unresolved=unresolved, clock_anomalies=anomalies)


def surrogate_model(
    matrix: np.ndarray, inverse: bool = False
) -> list[tuple[int, int, float]]:
    """Edge widths for a location-pair sketch, min-max scaled to [0.5, 5].

    Width grows with the cell value, or with its reciprocal when ``inverse``
    is set (short response medians draw thick). Zero-frequency and NaN cells
    are omitted; a single surviving value takes the maximum width.
    """
    values: list[tuple[int, int, float]] = []
    k = matrix.shape[0]
    for i in range(k):
        for j in range(matrix.shape[1]):
            v = float(matrix[i, j])
            if math.isnan(v) or v <= 0.0:
                continue
            values.append((i, j, (1.0 / v) if inverse else v))
    if not values:
        return []
    raw = np.array([v for _, _, v in values], dtype=np.float64)
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        widths = np.full(raw.size, WIDTH_MAX)
    else:
        widths = WIDTH_MIN + (WIDTH_MAX - WIDTH_MIN) * (raw - lo) / (hi - lo)
    return [(i, j, float(w)) for (i, j, _), w in zip(values, widths)]
