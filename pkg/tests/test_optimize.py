import numpy as np
import pytest

from hypercoop.game import ContributionMatrix, delta_star, equal_contributions, equal_endowments
from hypercoop.hypergraph import GeneratorConfig, Hypergraph, chain6, fully_connected, generate, two_edge
from hypercoop.optimize import (InterventionConfig, StructuralInfeasibility, apply_interventions,
                                co_member_degree, nudge_contributions, optimize_contributions,
                                optimize_endowments, redistribute_endowments)


def test_endowment_optimum_two_edge_r138():
    H = two_edge()
    res = optimize_endowments(H, np.full(4, 1.38), equal_contributions(H))
    assert res.delta_star_opt == pytest.approx(0.5869565, abs=1e-6)
    assert res.gap <= 1e-9
    np.testing.assert_allclose(res.witness, [1 / 6, 1 / 3, 1 / 3, 1 / 6], atol=1e-6)


def test_endowment_optimum_symmetric_is_equal():
    H = fully_connected(5)
    res = optimize_endowments(H, np.full(5, 2.0), equal_contributions(H))
    assert res.delta_star_opt == pytest.approx(0.25, abs=1e-6)


def test_endowment_bad_tolerance():
    H = two_edge()
    with pytest.raises(ValueError):
        optimize_endowments(H, np.full(4, 2.0), equal_contributions(H), tolerance=0)


def test_endowment_infinite_baseline_recovers():
    H = chain6()
    # players 1 and 2 put nothing into h1, so player 0 cannot be rewarded
    x = ContributionMatrix.from_dense(H, [[1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0.5, 0.5],
                                          [0, 0, 1], [0, 0, 1]])
    assert np.isinf(delta_star(H, equal_endowments(6), np.full(6, 2.0), x))
    res = optimize_endowments(H, np.full(6, 2.0), x)
    assert np.isfinite(res.delta_star_opt)
    assert res.witness[0] <= 1e-9


def test_contribution_structural_infeasibility():
    H = two_edge()
    e = np.array([0.5, 0.0, 0.0, 0.5])
    with pytest.raises(StructuralInfeasibility):
        optimize_contributions(H, np.full(4, 2.0), e)


def test_contribution_optimum_never_worse_than_equal():
    rng = np.random.default_rng(0)
    for seed in range(5):
        H = generate(GeneratorConfig("ER", 12, 4, seed=seed))
        e = rng.dirichlet(np.ones(12))
        r = rng.uniform(1.2, 2.8, 12)
        res = optimize_contributions(H, r, e)
        assert res.delta_star_opt <= res.delta_star_baseline + 1e-12
        assert res.witness.is_full_cooperation()
        assert delta_star(H, e, r, res.witness) == pytest.approx(res.delta_star_opt, abs=1e-12)


def test_redistribution_shares():
    H = generate(GeneratorConfig("ER", 100, 6, seed=4))
    e = redistribute_endowments(H)
    assert e.sum() == pytest.approx(1.0, abs=1e-12)
    order = np.lexsort((np.arange(100), H.degrees))
    low = order[:25]
    assert e[low].sum() == pytest.approx(0.10, abs=1e-12)
    assert np.allclose(e[low], 0.004)
    assert np.allclose(e[order[25:]], 0.012)


def test_redistribution_tiny_graph_falls_back():
    with pytest.warns(UserWarning):
        e = redistribute_endowments(fully_connected(3))
    assert np.allclose(e, 1 / 3)


def test_nudge_preserves_rows_and_direction():
    H = chain6()
    x = equal_contributions(H)
    y = nudge_contributions(H, x, 0.3)
    assert np.array_equal(y.row_sums(), x.row_sums())
    cm = co_member_degree(H)
    # player 1 sits in h1 (co-members 0, 2: degrees 1, 2) and h2 (2, 3: degrees 2, 2)
    assert cm[0, list(H.edges[0]).index(1)] < cm[1, list(H.edges[1]).index(1)]
    assert y.entry(1, 0) == pytest.approx(0.8)
    assert y.entry(1, 1) == pytest.approx(0.2)


def test_nudge_toward_low_degree_lowers_chain_threshold():
    H = chain6()
    e, r = equal_endowments(6), np.full(6, 2.0)
    x = equal_contributions(H)
    assert delta_star(H, e, r, nudge_contributions(H, x, 0.3)) < delta_star(H, e, r, x)


def test_nudge_skips_when_clamping():
    H = chain6()
    x = ContributionMatrix.from_dense(H, [[1, 0, 0], [1, 0, 0], [0.5, 0.5, 0], [0, 0.5, 0.5],
                                          [0, 0, 1], [0, 0, 1]])
    y = nudge_contributions(H, x, 0.1)
    assert y.entry(1, 0) == 1.0 and y.entry(1, 1) == 0.0   # would leave [0, 1]
    assert y.entry(2, 0) == pytest.approx(0.6)


def test_nudge_zero_is_identity():
    H = chain6()
    x = equal_contributions(H)
    assert np.array_equal(nudge_contributions(H, x, 0.0).values, x.values)


def test_interventions_outcome_fields():
    H = generate(GeneratorConfig("ER", 90, 8, seed=11))
    o = apply_interventions(H, np.full(90, 2.0))
    assert set(o.lowered()) == {"redistribution", "nudge", "combined"}
    oi = apply_interventions(H, np.full(90, 2.0), InterventionConfig(iterate=True, max_passes=5))
    assert oi.nudge <= o.nudge + 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        InterventionConfig(low_quantile=0)
    with pytest.raises(ValueError):
        InterventionConfig(nudge=-1)
