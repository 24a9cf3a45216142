"""Per-user activity mix and its transform toward normality.

For each user with at least one activity we compute the proportion of each
activity kind, map proportions through a negative log, and fit a Box-Cox
transform whose exponent is chosen by maximizing the normal profile
log-likelihood. The transformed values are summarized with a fixed-bandwidth
Gaussian kernel density and a normal Q-Q pairing.

Proportions of exactly 0 or 1 carry no transformable information and are
excluded but counted, so user bookkeeping stays conservative:
excluded_low + excluded_high + n_transformed == users with activity.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DegenerateDistributionError, FlatLikelihoodError
from .ingest import EventRecord, Kind

KIND_ORDER = (Kind.POST, Kind.RETWEET, Kind.REPLY, Kind.QUOTE)

DEFAULT_BANDWIDTH = 0.3
DEFAULT_GRID_POINTS = 512
BOXCOX_SEARCH_LO = -5.0
BOXCOX_SEARCH_HI = 5.0
BOXCOX_SEARCH_TOL = 1e-5
MIN_TRANSFORM_SAMPLES = 10


@dataclass(slots=True)
class ActivityProfile:
    user_id: str
    counts: dict[Kind, int]
    proportions: dict[Kind, float]
    total: int


@dataclass(slots=True)
class TransformSummary:
    """Result of the proportion -> -log -> Box-Cox pipeline for one kind."""

    kind: Kind
    lam: float
    transformed: np.ndarray
    excluded_low: int
    excluded_high: int
    kde_grid: np.ndarray
    bandwidth: float


def activity_proportions(events: Iterable[EventRecord]) -> list[ActivityProfile]:
    """Proportion of each activity kind per user, over the given events.

    Users appear in first-activity order. Proportions of one user sum to 1;
    users that only ever appear as targets are not profiled.
    """
    counts: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    order: list[str] = []
    kind_pos = {kind: i for i, kind in enumerate(KIND_ORDER)}
    for ev in events:
        row = counts.get(ev.user_id)
        if row is None:
            order.append(ev.user_id)
        counts[ev.user_id][kind_pos[ev.kind]] += 1
    profiles = []
    for user in order:
        row = counts[user]
        total = sum(row)
        profiles.append(
            ActivityProfile(
                user_id=user,
                counts={kind: row[i] for i, kind in enumerate(KIND_ORDER)},
                proportions={kind: row[i] / total for i, kind in enumerate(KIND_ORDER)},
                total=total,
            )
        )
    return profiles


def neg_log_transform(r: float) -> float:
    """-ln(r) for a proportion r in (0, 1]."""
    if r <= 0.0:
        raise ValueError(f"proportion must be positive, got {r}")
    return -math.log(r)


def boxcox_transform(values: np.ndarray, lam: float) -> np.ndarray:
    """(v^lam - 1) / lam, continuous in lam with the log limit at lam = 0.

    Computed as expm1(lam * ln v) / lam, which stays within 1e-6 of ln v for
    |lam| <= 1e-8 instead of cancelling catastrophically.
    """
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise ValueError("box-cox input must be strictly positive")
    logs = np.log(values)
    if lam == 0.0:
        return logs
    return np.expm1(lam * logs) / lam


def boxcox_loglik(lam: float, values: np.ndarray, logs: np.ndarray | None = None) -> float:
    """Normal profile log-likelihood of the Box-Cox transform at ``lam``."""
    if logs is None:
        logs = np.log(np.asarray(values, dtype=np.float64))
    z = np.expm1(lam * logs) / lam if lam != 0.0 else logs
    var = float(np.var(z))
    if var <= 0.0 or not math.isfinite(var):
        return -math.inf
    n = z.size
    return float((lam - 1.0) * logs.sum() - 0.5 * n * math.log(var))


def _golden_section_max(
    fn: Callable[[float], float], lo: float, hi: float, tol: float
) -> float:
    """Golden-section search for the maximizer of a unimodal function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def boxcox_mle(
    values: Sequence[float] | np.ndarray,
    lo: float = BOXCOX_SEARCH_LO,
    hi: float = BOXCOX_SEARCH_HI,
    tol: float = BOXCOX_SEARCH_TOL,
) -> tuple[float, np.ndarray]:
    """Exponent maximizing the Box-Cox profile log-likelihood, plus transform.

    Requires at least 10 strictly positive values with some spread; constant
    input has a flat likelihood and is rejected.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < MIN_TRANSFORM_SAMPLES:
        raise ValueError(f"need at least {MIN_TRANSFORM_SAMPLES} values, got {arr.size}")
    if np.any(arr <= 0):
        raise ValueError("box-cox input must be strictly positive")
    if float(arr.min()) == float(arr.max()):
        raise FlatLikelihoodError("constant input: likelihood is flat in lambda")
    logs = np.log(arr)
    lam = _golden_section_max(lambda l: boxcox_loglik(l, arr, logs), lo, hi, tol)
    return lam, boxcox_transform(arr, lam)


def kde(
    values: Sequence[float] | np.ndarray,
    bandwidth: float = DEFAULT_BANDWIDTH,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> np.ndarray:
    """Gaussian kernel density on a uniform grid, shape (m, 2).

    The grid spans [min - 4h, max + 4h] with at least ``grid_points`` points,
    so the returned curve integrates to ~1 under the trapezoid rule.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("kde needs at least one value")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    m = max(int(grid_points), 2)
    grid = np.linspace(arr.min() - 4.0 * bandwidth, arr.max() + 4.0 * bandwidth, m)
    density = np.zeros(m, dtype=np.float64)
    # Chunk the exact kernel sum to bound the (m x n) intermediate.
    norm_const = 1.0 / (arr.size * bandwidth * math.sqrt(2.0 * math.pi))
    for start in range(0, arr.size, 8192):
        chunk = arr[start : start + 8192]
        z = (grid[:, None] - chunk[None, :]) / bandwidth
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density *= norm_const
    return np.column_stack([grid, density])


def qq_normal(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Normal Q-Q pairs (theoretical, standardized sample), shape (n, 2).

    The sample is standardized to mean 0 and unit population variance, then
    sorted against standard-normal quantiles at positions (i - 0.5) / n.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 3:
        raise ValueError("qq plot needs at least 3 values")
    sd = float(arr.std())
    if sd == 0.0:
        raise DegenerateDistributionError("zero variance sample has no qq spread")
    standardized = np.sort((arr - arr.mean()) / sd)
    positions = (np.arange(1, arr.size + 1) - 0.5) / arr.size
    theoretical = norm.ppf(positions)
    return np.column_stack([theoretical, standardized])


def transform_kind(
    profiles: Sequence[ActivityProfile],
    kind: Kind,
    bandwidth: float = DEFAULT_BANDWIDTH,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> TransformSummary:
    """Run the full transform chain for one activity kind.

    Users with proportion 0 (never this kind) or 1 (only this kind) are
    excluded and counted; the rest go through -ln and the fitted Box-Cox.
    """
    values = []
    excluded_low = 0
    excluded_high = 0
    for profile in profiles:
        r = profile.proportions[kind]
        if r == 0.0:
            excluded_low += 1
        elif r == 1.0:
            excluded_high += 1
        else:
            values.append(neg_log_transform(r))
    lam, transformed = boxcox_mle(np.asarray(values))
    grid = kde(transformed, bandwidth=bandwidth, grid_points=grid_points)
    return TransformSummary(
        kind=kind,
        lam=lam,
        transformed=transformed,
        excluded_low=excluded_low,
        excluded_high=excluded_high,
        kde_grid=grid,
        bandwidth=bandwidth,
    )
