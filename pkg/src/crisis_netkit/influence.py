"""Influence scoring and heavy-tail analysis of the daily graphs.

Scores come from a teleporting random walk over the unweighted directed
graph: each node splits its mass uniformly over its distinct out-neighbors,
dangling nodes spread theirs over everyone, and a (1 - beta) share teleports
uniformly. Power iteration starts from the uniform vector and stops when the
L1 change between rounds drops below epsilon.

Scores are then rescaled by the lower edge of the second-lowest occupied
histogram bin, the tail is fit with a continuous power law by maximum
likelihood, and goodness of fit is judged by a parametric bootstrap of the
Kolmogorov-Smirnov distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .errors import ConvergenceError, DegenerateDistributionError, InsufficientTailError
from .graph import NetworkSnapshot

DEFAULT_BETA = 0.85
DEFAULT_EPSILON = 1e-8
DEFAULT_MAX_ITER = 200
DEFAULT_BINS = 500
DEFAULT_REPLICATES = 1000
MIN_TAIL = 50
DEFAULT_TOP_PCT = 2.0


@dataclass(slots=True)
class InfluenceScores:
    scores: dict[str, float]
    beta: float
    epsilon: float
    iterations: int
    # Optional per-iteration (sum, L1 residual) pairs when tracing is on.
    trace: list[tuple[float, float]] | None = None


@dataclass(slots=True)
class PowerLawFit:
    alpha: float
    x_min: float
    n_tail: int
    ks_statistic: float
    p_value: float | None = None
    replicates: int = 0


@dataclass(slots=True)
class NormalizedScores:
    values: np.ndarray
    x_min_raw: float
    excluded: int


@dataclass(slots=True)
class FlowMatrix:
    """Percentages of communication volume by origin/diffuser class.

    Keys read origin then diffuser: ``oi`` is ordinary-origin content adopted
    by influential diffusers. The four entries sum to 100.
    """

    ii: float
    io: float
    oi: float
    oo: float
    top_pct: float
    influential_users: frozenset[str]


def pagerank_arrays(
    n: int,
    src: np.ndarray,
    dst: np.ndarray,
    beta: float = DEFAULT_BETA,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    keep_trace: bool = False,
) -> tuple[np.ndarray, int, list[tuple[float, float]] | None]:
    """Core power iteration over distinct directed edges given as index arrays."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if n == 0:
        raise ValueError("graph has no nodes")

    out_degree = np.bincount(src, minlength=n).astype(np.float64)
    dangling = out_degree == 0
    inv_deg = np.zeros(n, dtype=np.float64)
    inv_deg[~dangling] = 1.0 / out_degree[~dangling]
    # Column-stochastic transition: column j spreads 1/outdeg(j) to its targets.
    matrix = sparse.csr_matrix(
        (inv_deg[src], (dst, src)), shape=(n, n), dtype=np.float64
    )

    rank = np.full(n, 1.0 / n, dtype=np.float64)
    teleport = (1.0 - beta) / n
    trace: list[tuple[float, float]] | None = [] if keep_trace else None
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        dangling_mass = float(rank[dangling].sum())
        nxt = beta * (matrix @ rank + dangling_mass / n) + teleport
        residual = float(np.abs(nxt - rank).sum())
        rank = nxt
        if trace is not None:
            trace.append((float(rank.sum()), residual))
        if residual < epsilon:
            return rank, iteration, trace
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def pagerank(
    snapshot: NetworkSnapshot,
    beta: float = DEFAULT_BETA,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    keep_trace: bool = False,
) -> InfluenceScores:
    """Teleporting random-walk scores for every node of a snapshot.

    Edge weights are ignored; parallel structure is impossible since edges
    are distinct ordered pairs. Scores are positive and sum to 1.
    """
    order = sorted(snapshot.nodes)
    index = {node: i for i, node in enumerate(order)}
    m = len(snapshot.edges)
    src = np.fromiter((index[s] for s, _ in snapshot.edges), dtype=np.int64, count=m)
    dst = np.fromiter((index[t] for _, t in snapshot.edges), dtype=np.int64, count=m)
    rank, iterations, trace = pagerank_arrays(
        len(order), src, dst, beta=beta, epsilon=epsilon, max_iter=max_iter,
        keep_trace=keep_trace,
    )
    return InfluenceScores(
        scores={node: float(rank[i]) for node, i in index.items()},
        beta=beta,
        epsilon=epsilon,
        iterations=iterations,
        trace=trace,
    )


def normalize_scores(
    scores: Mapping[str, float] | Sequence[float] | np.ndarray,
    bins: int = DEFAULT_BINS,
) -> NormalizedScores:
    """Rescale scores by the lower edge of the second-lowest occupied bin.

    A linear histogram with ``bins`` cells spans the score range; the second
    occupied bin's lower edge becomes the raw cutoff. Scores at or above it
    are divided by it (so the kept minimum is ~1); the rest are excluded and
    counted.
    """
    if isinstance(scores, Mapping):
        arr = np.fromiter(scores.values(), dtype=np.float64, count=len(scores))
    else:
        arr = np.asarray(scores, dtype=np.float64)
    if np.unique(arr).size < 3:
        raise DegenerateDistributionError("need at least 3 distinct scores to normalize")
    counts, edges = np.histogram(arr, bins=bins)
    occupied = np.nonzero(counts)[0]
    if occupied.size < 2:
        raise DegenerateDistributionError(
            "scores collapse into a single histogram bin; no cutoff exists"
        )
    x_min_raw = float(edges[occupied[1]])
    kept = arr[arr >= x_min_raw] / x_min_raw
    return NormalizedScores(
        values=kept, x_min_raw=x_min_raw, excluded=int(arr.size - kept.size)
    )


def power_law_cdf(x: np.ndarray, alpha: float, x_min: float) -> np.ndarray:
    """CDF of the continuous power law with density ~ x^-alpha on [x_min, inf)."""
    return 1.0 - np.power(np.asarray(x, dtype=np.float64) / x_min, 1.0 - alpha)


def _ks_distance(sorted_values: np.ndarray, alpha: float, x_min: float) -> float:
    n = sorted_values.size
    model = power_law_cdf(sorted_values, alpha, x_min)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(np.maximum(np.abs(upper - model), np.abs(model - lower)).max())


def _fit_alpha(values: np.ndarray, x_min: float) -> float:
    return 1.0 + values.size / float(np.log(values / x_min).sum())


def fit_power_law(
    values: Sequence[float] | np.ndarray, x_min: float = 1.0
) -> PowerLawFit:
    """Continuous maximum-likelihood power-law fit with a fixed lower bound.

    alpha-hat = 1 + n / sum(ln(x_i / x_min)). Requires at least 50 tail
    values at or above x_min; smaller tails are rejected rather than fit.
    """
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[arr >= x_min]
    if arr.size < MIN_TAIL:
        raise InsufficientTailError(
            f"need at least {MIN_TAIL} values >= x_min, got {arr.size}"
        )
    log_sum = float(np.log(arr / x_min).sum())
    if log_sum <= 0.0:
        raise DegenerateDistributionError("all tail values equal x_min")
    alpha = 1.0 + arr.size / log_sum
    ks = _ks_distance(np.sort(arr), alpha, x_min)
    return PowerLawFit(alpha=alpha, x_min=x_min, n_tail=int(arr.size), ks_statistic=ks)


def sample_power_law(
    rng: np.random.Generator, alpha: float, x_min: float, n: int
) -> np.ndarray:
    """Inverse-CDF draws: x = x_min * (1 - u)^(-1 / (alpha - 1))."""
    u = rng.random(n)
    return x_min * np.power(1.0 - u, -1.0 / (alpha - 1.0))


def ks_gof(
    values: Sequence[float] | np.ndarray,
    fit: PowerLawFit,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
) -> float:
    """Parametric-bootstrap p-value for the fitted power law.

    Each replicate draws n_tail values from the fitted model on its own
    deterministic substream, refits alpha, and measures its own KS distance;
    the p-value is the share of replicate distances at or above the observed
    one. Identical seeds give identical p-values.
    """
    if replicates < 100:
        raise ValueError(f"need at least 100 replicates, got {replicates}")
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[arr >= fit.x_min]
    streams = np.random.SeedSequence(seed).spawn(replicates)
    observed = fit.ks_statistic
    hits = 0
    for child in streams:
        rng = np.random.default_rng(child)
        synthetic = np.sort(sample_power_law(rng, fit.alpha, fit.x_min, arr.size))
        alpha_rep = _fit_alpha(synthetic, fit.x_min)
        if _ks_distance(synthetic, alpha_rep, fit.x_min) >= observed:
            hits += 1
    return hits / replicates


def ccdf(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Empirical complementary CDF Pr(x >= X) over distinct values, (m, 2).

    Starts at 1 at the minimum and is strictly decreasing across distinct
    values, which keeps it honest on a log-log plot.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("ccdf needs at least one value")
    distinct, first_idx = np.unique(arr, return_index=True)
    tail = (arr.size - first_idx) / arr.size
    return np.column_stack([distinct, tail])


def top_influential(
    scores: Mapping[str, float], top_pct: float
) -> frozenset[str]:
    """Ids of the ceil(top_pct% * n) highest-scoring users, ties by id."""
    if not 0.0 <= top_pct <= 100.0:
        raise ValueError(f"top_pct must lie in [0, 100], got {top_pct}")
    k = math.ceil(top_pct / 100.0 * len(scores))
    if k == 0:
        return frozenset()
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return frozenset(user for user, _ in ranked[:k])


def flow_matrix(
    snapshot: NetworkSnapshot,
    scores: InfluenceScores | Mapping[str, float],
    top_pct: float = DEFAULT_TOP_PCT,
) -> FlowMatrix:
    """Share of communication volume by origin and diffuser class.

    Each unit of edge weight is one adoption event: the edge target is the
    origin whose content was taken up, the edge source the diffuser acting
    on it. Entries are percentages of total weight and sum to 100.
    """
    mapping = scores.scores if isinstance(scores, InfluenceScores) else scores
    influential = top_influential(mapping, top_pct)
    sums = {"ii": 0, "io": 0, "oi": 0, "oo": 0}
    total = 0
    for (diffuser, origin), weight in snapshot.edges.items():
        key = ("i" if origin in influential else "o") + (
            "i" if diffuser in influential else "o"
        )
        sums[key] += weight
        total += weight
    if total == 0:
        raise ValueError("snapshot has no communication volume")
    return FlowMatrix(
        ii=100.0 * sums["ii"] / total,
        io=100.0 * sums["io"] / total,
        oi=100.0 * sums["oi"] / total,
        oo=100.0 * sums["oo"] / total,
        top_pct=top_pct,
        influential_users=influential,
    )
