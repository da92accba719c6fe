import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypercoop.game import (ContributionMatrix, GameInstance, InvalidInstanceError,
                            check_productivity, delta_star, deviation_payoffs, equal_contributions,
                            equal_endowments, grim_is_equilibrium, node_thresholds, payoff,
                            payoffs, threshold_report)
from hypercoop.hypergraph import GeneratorConfig, Hypergraph, fully_connected, generate_er, two_edge


def test_equal_contributions_rows():
    H = two_edge()
    x = equal_contributions(H)
    assert x.to_dense().tolist() == [[1, 0], [0.5, 0.5], [0.5, 0.5], [0, 1]]
    assert np.allclose(x.row_sums(), 1)
    assert np.allclose(equal_contributions(fully_connected(4)).values, 1 / 3)


def test_from_dense_rejects_off_support():
    H = two_edge()
    with pytest.raises(InvalidInstanceError):
        ContributionMatrix.from_dense(H, [[1, 0.5], [0.5, 0.5], [0.5, 0.5], [0, 1]])


def test_triplets_roundtrip():
    H = two_edge()
    x = equal_contributions(H)
    y = ContributionMatrix.from_triplets(H, list(x.triplets()))
    assert np.array_equal(x.values, y.values)


def test_payoff_single_edge_full_cooperation():
    H = Hypergraph(3, [[0, 1, 2]])
    e, r = equal_endowments(3), np.full(3, 2.0)
    u = payoffs(H, e, r, equal_contributions(H))
    assert np.allclose(u, 2 / 3)


def test_payoff_all_defect_is_endowment():
    H = two_edge()
    e = np.array([0.1, 0.2, 0.3, 0.4])
    x = ContributionMatrix(H, np.zeros(H.edges.shape))
    assert np.allclose(payoffs(H, e, np.full(4, 2.0), x), e)


def test_payoff_scalar_matches_vector():
    H = two_edge()
    G = GameInstance(H, equal_endowments(4), np.full(4, 2.0), equal_contributions(H))
    assert payoff(G, 1) == pytest.approx(payoffs(G.H, G.e, G.r, G.x)[1])
    with pytest.raises(IndexError):
        payoff(G, 4)


def test_two_edge_thresholds_by_hand():
    H = two_edge()
    d = node_thresholds(H, equal_endowments(4), np.full(4, 1.38), equal_contributions(H))
    assert d[0] == pytest.approx(1.62 / 1.38, abs=1e-12)
    assert d[1] == pytest.approx(0.25 * 1.62 / (1.38 * 0.25 * (1 + 0.5 + 1 / 2 * 1 + 1)), abs=1e-12)
    assert d[0] == d[3] and d[1] == d[2]


def test_threshold_conventions_zero_and_inf():
    H = two_edge()
    # node 0 alone funds nothing from others: x of nodes 1,2 on edge 0 is zero
    x = ContributionMatrix.from_dense(H, [[1, 0], [0, 1], [0, 1], [0, 1]])
    d = node_thresholds(H, equal_endowments(4), np.full(4, 2.0), x)
    assert math.isinf(d[0])
    e = np.array([0.0, 0.5, 0.5, 0.0])
    d = node_thresholds(H, e, np.full(4, 2.0), equal_contributions(H))
    assert d[0] == 0.0 and d[3] == 0.0
    # zero-endowment nodes are excluded from the max
    assert delta_star(H, e, np.full(4, 2.0), x) < math.inf


def test_report_csv_writes_inf():
    H = two_edge()
    x = ContributionMatrix.from_dense(H, [[1, 0], [0, 1], [0, 1], [0, 1]])
    rep = threshold_report(GameInstance(H, equal_endowments(4), np.full(4, 2.0), x))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "node_id,e_i,r_i,k_i,delta_i_star"
    assert lines[1].endswith(",inf")
    assert rep.feasibility == "Infeasible"


def test_validation_errors():
    H = two_edge()
    x = equal_contributions(H)
    with pytest.raises(InvalidInstanceError, match="sum"):
        GameInstance(H, [0.25, 0.25, 0.25, 0.23], np.full(4, 2.0), x)
    with pytest.raises(InvalidInstanceError, match="dilemma"):
        GameInstance(H, equal_endowments(4), np.full(4, 3.5), x)
    with pytest.warns(UserWarning):
        GameInstance(H, equal_endowments(4), np.full(4, 3.5), x, relaxed=True)
    with pytest.raises(InvalidInstanceError):
        GameInstance(H, equal_endowments(4), 2.0, x, delta=1.5)


def test_relaxed_r_above_sigma_gives_zero_threshold():
    H = two_edge()
    with pytest.warns(UserWarning):
        r = check_productivity(3.5, 3, 4, relaxed=True)
    assert np.all(node_thresholds(H, equal_endowments(4), r, equal_contributions(H)) == 0)


def test_deviation_payoffs_consistent():
    H = two_edge()
    G = GameInstance(H, equal_endowments(4), np.full(4, 2.0), equal_contributions(H))
    full, solo, e_i = deviation_payoffs(G, 0)
    assert solo > full > e_i


# -- properties --

@st.composite
def instances(draw):
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    N = int(rng.integers(4, 16))
    H = generate_er(GeneratorConfig("ER", N, float(rng.uniform(3, 5)), seed=seed))
    e = rng.dirichlet(np.ones(N))
    r = rng.uniform(1.05, 2.95, N)
    w = rng.uniform(0.01, 1, H.edges.shape)
    rows = np.bincount(H.edges.ravel(), weights=w.ravel(), minlength=N)
    return H, e, r, ContributionMatrix(H, w / rows[H.edges])


@settings(max_examples=60, deadline=None)
@given(instances())
def test_budget_accounting(inst):
    H, e, r, x = inst
    assert payoffs(H, e, r, x).sum() == pytest.approx(float(r @ e), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(instances(), st.floats(0, 1))
def test_grim_matches_threshold(inst, delta):
    H, e, r, x = inst
    ds = delta_star(H, e, r, x)
    G = GameInstance(H, e, r, x, delta)
    if abs(delta - ds) > 1e-12:
        assert grim_is_equilibrium(G) == (delta >= ds)


@settings(max_examples=40, deadline=None)
@given(instances(), st.floats(0.1, 10))
def test_threshold_scale_free_in_productivity_sum(inst, c):
    # scaling all endowments together leaves every delta_i* unchanged
    H, e, r, x = inst
    a = node_thresholds(H, e, r, x)
    b = node_thresholds(H, e * c, r, x)
    np.testing.assert_allclose(a, b, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(instances())
def test_feasibility_monotone_in_delta(inst):
    H, e, r, x = inst
    ds = delta_star(H, e, r, x)
    verdicts = [grim_is_equilibrium(GameInstance(H, e, r, x, d)) for d in np.linspace(0, 1, 21)]
    # once feasible, stays feasible
    assert verdicts == sorted(verdicts)
    if ds <= 1:
        assert verdicts[-1]
