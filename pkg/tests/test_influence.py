import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crisis_netkit.errors import (
    ConvergenceError,
    DegenerateDistributionError,
    InsufficientTailError,
)
from crisis_netkit.graph import NetworkSnapshot
from crisis_netkit.influence import (
    ccdf,
    fit_power_law,
    flow_matrix,
    ks_gof,
    normalize_scores,
    pagerank,
    pagerank_arrays,
    top_influential,
)


def snap(edges, extra_nodes=()):
    nodes = set(extra_nodes)
    for s, t in edges:
        nodes.update((s, t))
    return NetworkSnapshot(
        day_index=0,
        nodes=nodes,
        edges={e: edges[e] if isinstance(edges, dict) else 1 for e in edges},
        first_seen={e: 0 for e in edges},
    )


def dense_oracle(nodes, edges, beta):
    """Solve (I - beta * M) r = (1 - beta)/n on the dangling-patched matrix."""
    order = sorted(nodes)
    index = {u: i for i, u in enumerate(order)}
    n = len(order)
    out_deg = {u: 0 for u in order}
    for s, _ in edges:
        out_deg[s] += 1
    m = np.zeros((n, n))
    for s, t in edges:
        m[index[t], index[s]] += 1.0 / out_deg[s]
    for u in order:
        if out_deg[u] == 0:
            m[:, index[u]] = 1.0 / n
    r = np.linalg.solve(np.eye(n) - beta * m, np.full(n, (1.0 - beta) / n))
    return {u: r[index[u]] for u in order}


# -- pagerank ----------------------------------------------------------------

def test_two_node_cycle_is_symmetric():
    s = snap([("a", "b"), ("b", "a")])
    for beta in (0.8, 0.85, 0.9):
        scores = pagerank(s, beta=beta).scores
        assert scores["a"] == pytest.approx(0.5, abs=1e-12)
        assert scores["b"] == pytest.approx(0.5, abs=1e-12)


def test_three_node_chain_matches_dense_solve():
    edges = [("a", "b"), ("b", "c")]
    s = snap(edges)
    scores = pagerank(s, epsilon=1e-12).scores
    oracle = dense_oracle(s.nodes, edges, 0.85)
    for u in s.nodes:
        assert scores[u] == pytest.approx(oracle[u], abs=1e-8)


def test_star_hub_dominates():
    edges = [(f"leaf{i}", "hub") for i in range(10)]
    scores = pagerank(snap(edges)).scores
    assert max(scores, key=scores.get) == "hub"


def test_random_digraphs_match_dense_oracle():
    rng = random.Random(1)
    for _ in range(10):
        n = rng.randrange(2, 21)
        users = [f"u{i}" for i in range(n)]
        edges = {
            (s, t)
            for s in users
            for t in users
            if rng.random() < 0.2
        }
        s = snap(edges, extra_nodes=users)
        scores = pagerank(s, epsilon=1e-12).scores
        oracle = dense_oracle(s.nodes, edges, 0.85)
        worst = max(abs(scores[u] - oracle[u]) for u in users)
        assert worst < 1e-8


def test_scores_sum_to_one_every_iteration():
    edges = [("a", "b"), ("b", "c"), ("c", "a"), ("d", "a")]
    result = pagerank(snap(edges, extra_nodes={"e"}), keep_trace=True)
    assert result.trace, "trace requested but empty"
    for total, _ in result.trace:
        assert total == pytest.approx(1.0, abs=1e-9)
    # residuals decrease monotonically until the stop
    residuals = [r for _, r in result.trace]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(residuals, residuals[1:]))


def test_relabeling_permutes_scores():
    edges = [("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")]
    base = pagerank(snap(edges), epsilon=1e-12).scores
    mapping = {"a": "x", "b": "y", "c": "z"}
    relabeled = pagerank(
        snap([(mapping[s], mapping[t]) for s, t in edges]), epsilon=1e-12
    ).scores
    for u, v in mapping.items():
        assert relabeled[v] == pytest.approx(base[u], abs=1e-12)


def test_isolated_only_graph_is_uniform():
    s = snap([], extra_nodes={"a", "b", "c", "d"})
    scores = pagerank(s).scores
    for v in scores.values():
        assert v == pytest.approx(0.25, abs=1e-9)


def test_non_convergence_error_carries_state():
    # star graphs start far from their fixed point, unlike cycles whose
    # uniform start is already stationary
    edges = [(f"u{i}", "hub") for i in range(1, 30)]
    with pytest.raises(ConvergenceError) as err:
        pagerank(snap(edges), max_iter=2, epsilon=1e-15)
    assert err.value.iterations == 2
    assert err.value.residual > 0


def test_pagerank_validation():
    with pytest.raises(ValueError):
        pagerank_arrays(0, np.array([], dtype=np.int64), np.array([], dtype=np.int64))
    with pytest.raises(ValueError):
        pagerank_arrays(
            2, np.array([0]), np.array([1]), beta=1.0
        )


# -- normalization -----------------------------------------------------------

def test_normalize_second_occupied_bin_rule():
    # bins of width 0.18 over [0.05, 0.95]: occupied bins are 0, 1, 4
    values = [0.05, 0.25, 0.90, 0.95]
    result = normalize_scores(values, bins=5)
    assert result.x_min_raw == pytest.approx(0.23, abs=1e-12)
    assert result.excluded == 1
    assert np.all(result.values >= 1.0)
    assert result.values == pytest.approx(
        np.array([0.25, 0.90, 0.95]) / result.x_min_raw
    )


def test_normalize_point_mass_exclusion():
    rng = np.random.default_rng(6)
    tail = rng.uniform(0.5, 1.0, 200)
    values = np.concatenate([np.full(17, 0.001), tail])
    result = normalize_scores(values, bins=500)
    assert result.excluded == 17
    assert result.values.size == 200


def test_normalize_degenerate_inputs():
    with pytest.raises(DegenerateDistributionError):
        normalize_scores([0.5, 0.5, 0.5])
    with pytest.raises(DegenerateDistributionError):
        normalize_scores([0.1, 0.2])


# -- power-law fit -------------------------------------------------------------

def test_fit_hand_case_closed_form():
    values = [1.0, 2.0, 4.0] * 20  # padded to clear the 50-value floor
    fit = fit_power_law(values)
    assert fit.alpha == pytest.approx(1.0 + 1.0 / math.log(2.0), abs=1e-9)
    assert fit.n_tail == 60


def test_fit_matches_numeric_likelihood_maximization():
    rng = np.random.default_rng(3)
    values = np.power(1.0 - rng.random(5000), -1.0 / 1.4)  # alpha = 2.4
    fit = fit_power_law(values)
    # independent numeric maximizer of l(a) = n ln(a-1) - a * sum(ln x)
    log_sum = float(np.log(values).sum())
    n = values.size

    def nll(a):
        return -(n * math.log(a - 1.0) - a * log_sum)

    from scipy.optimize import minimize_scalar

    best = minimize_scalar(nll, bounds=(1.0001, 20.0), method="bounded",
                           options={"xatol": 1e-10})
    assert fit.alpha == pytest.approx(best.x, abs=1e-6)


def test_fit_recovers_tail_exponent():
    rng = np.random.default_rng(11)
    values = np.power(1.0 - rng.random(20_000), -1.0 / 1.5)  # alpha = 2.5
    fit = fit_power_law(values)
    assert 2.45 <= fit.alpha <= 2.55


def test_fit_ks_statistic_matches_scipy():
    from scipy.stats import kstest

    rng = np.random.default_rng(8)
    values = np.power(1.0 - rng.random(500), -1.0)  # alpha = 2
    fit = fit_power_law(values)
    ref = kstest(values, lambda x: 1.0 - np.power(x, 1.0 - fit.alpha))
    assert fit.ks_statistic == pytest.approx(ref.statistic, abs=1e-12)


def test_fit_small_tail_rejected():
    with pytest.raises(InsufficientTailError):
        fit_power_law([1.5] * 49)
    with pytest.raises(DegenerateDistributionError):
        fit_power_law([1.0] * 60)


# -- bootstrap ----------------------------------------------------------------

def test_ks_gof_deterministic_and_in_range():
    rng = np.random.default_rng(21)
    values = np.power(1.0 - rng.random(400), -1.0 / 1.2)
    fit = fit_power_law(values)
    p1 = ks_gof(values, fit, replicates=200, seed=77)
    p2 = ks_gof(values, fit, replicates=200, seed=77)
    assert p1 == p2
    assert 0.0 <= p1 <= 1.0
    assert p1 > 0.01  # data drawn from the model family itself


def test_ks_gof_rejects_gross_misfit():
    rng = np.random.default_rng(5)
    values = 1.0 + rng.exponential(1.0, 3000)
    fit = fit_power_law(values)
    assert ks_gof(values, fit, replicates=200, seed=1) <= 0.01


def test_ks_gof_replicate_floor():
    rng = np.random.default_rng(2)
    values = np.power(1.0 - rng.random(100), -1.0)
    fit = fit_power_law(values)
    with pytest.raises(ValueError):
        ks_gof(values, fit, replicates=99, seed=0)


# -- ccdf ----------------------------------------------------------------------

def test_ccdf_hand_case():
    curve = ccdf([1.0, 1.0, 2.0])
    assert curve.tolist() == [[1.0, 1.0], [2.0, 1.0 / 3.0]]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=0.1, max_value=1e6), min_size=1, max_size=200))
def test_ccdf_starts_at_one_and_decreases(values):
    curve = ccdf(values)
    assert curve[0, 1] == 1.0
    assert np.all(np.diff(curve[:, 1]) < 0)


def test_ccdf_loglog_slope_tracks_alpha():
    rng = np.random.default_rng(13)
    alpha = 2.5
    values = np.power(1.0 - rng.random(20_000), -1.0 / (alpha - 1.0))
    curve = ccdf(values)
    keep = curve[:, 0] <= 20.0  # drop the noisy extreme tail
    slope = np.polyfit(np.log(curve[keep, 0]), np.log(curve[keep, 1]), 1)[0]
    assert slope == pytest.approx(-(alpha - 1.0), abs=0.1)


# -- flows ----------------------------------------------------------------------

def test_top_influential_ceiling_and_ties():
    scores = {"a": 0.3, "b": 0.3, "c": 0.4}
    assert top_influential(scores, 34.0) == {"c", "a"}
    assert top_influential(scores, 0.0) == frozenset()
    with pytest.raises(ValueError):
        top_influential(scores, 101.0)


def test_flow_matrix_equal_channels():
    edges = {
        ("i1", "i2"): 5,  # influential diffuser, influential origin
        ("i1", "o1"): 5,  # influential diffuser, ordinary origin
        ("o1", "i1"): 5,
        ("o1", "o2"): 5,
    }
    scores = {"i1": 0.4, "i2": 0.3, "o1": 0.2, "o2": 0.1}
    flow = flow_matrix(snap(edges), scores, top_pct=50.0)
    assert flow.ii == flow.io == flow.oi == flow.oo == 25.0
    assert flow.influential_users == {"i1", "i2"}


def test_flow_matrix_zero_top_pct_all_ordinary():
    edges = {("a", "b"): 3, ("b", "c"): 2}
    flow = flow_matrix(snap(edges), {"a": 0.5, "b": 0.3, "c": 0.2}, top_pct=0.0)
    assert flow.oo == 100.0 and flow.ii == flow.io == flow.oi == 0.0


def test_flow_matrix_sums_to_100():
    rng = random.Random(30)
    users = [f"u{i}" for i in range(40)]
    edges = {}
    for _ in range(300):
        edges[(rng.choice(users), rng.choice(users))] = rng.randrange(1, 5)
    scores = {u: rng.random() for u in users}
    total = sum(scores.values())
    scores = {u: v / total for u, v in scores.items()}
    flow = flow_matrix(snap(edges, extra_nodes=users), scores)
    assert flow.ii + flow.io + flow.oi + flow.oo == pytest.approx(100.0, abs=1e-9)


def test_flow_matrix_empty_volume_rejected():
    with pytest.raises(ValueError):
        flow_matrix(snap([], extra_nodes={"a", "b"}), {"a": 0.6, "b": 0.4})
