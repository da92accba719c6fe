import json

import numpy as np
import pytest

from hypercoop.empirical import (DataError, UndefinedCorrelation, allocation_pipeline,
                                 authorship_pipeline, authorship_weight, contribution_score,
                                 gdp_based_endowment, load_attributes, load_endowments,
                                 load_memberships, pearson, read_fixture, rescale_productivity,
                                 score_by_degree_band)
from hypercoop.hypergraph import Hypergraph


def test_weights():
    assert authorship_weight(3) == 0.25
    assert authorship_weight(1) == 1.0
    assert authorship_weight(4, True) == 0.5
    assert authorship_weight(7) == 2.0 ** -6
    w = [authorship_weight(p) for p in range(1, 12)]
    assert w == sorted(w, reverse=True)
    with pytest.raises(ValueError):
        authorship_weight(0)


def test_pearson():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(UndefinedCorrelation):
        pearson([1, 1, 1], [1, 2, 3])
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert pearson(x, y) == pytest.approx(pearson(y, x))
    assert pearson(3 * x + 1, 0.5 * y - 2) == pytest.approx(pearson(x, y))
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1])


def test_contribution_score():
    assert contribution_score(0.3, 1.0) == 0.3
    assert contribution_score(1.0, 1.0) == 1.0
    assert contribution_score(0, 0.5) == 0
    with pytest.raises(ValueError):
        contribution_score(0.1, 0)


def test_gdp_endowment():
    assert gdp_based_endowment("low", 1000, 0) == pytest.approx(3.0)
    assert gdp_based_endowment("middle", 1000, 5) == pytest.approx(15.0)
    assert gdp_based_endowment("high", 0, 7) == 7.0
    with pytest.raises(ValueError):
        gdp_based_endowment("upper", 1, 1)


def _star():
    # focal 0 with hyperedges {0,1,2} and {0,3,4}; nodes 3,4 get high degree
    edges = [[0, 1, 2], [0, 3, 4]] + [[3, 4, 5 + j] for j in range(8)]
    return Hypergraph(13, edges)


def test_band_grouping():
    H = _star()
    k = H.degrees
    assert (k[1] + k[2]) / 2 == 1 and (k[3] + k[4]) / 2 == 9
    b = score_by_degree_band(H, 0, {0: 0.6, 1: 0.4}, 8)
    assert (b.mean_low, b.mean_high) == (0.6, 0.4)
    b = score_by_degree_band(H, 0, {0: 0.6}, 8)
    assert b.mean_high is None and b.count_high == 0
    # reordering the score map does not matter
    assert score_by_degree_band(H, 0, {1: 0.4, 0: 0.6}, 8) == score_by_degree_band(H, 0, {0: 0.6, 1: 0.4}, 8)


def test_band_requires_membership():
    with pytest.raises(ValueError):
        score_by_degree_band(_star(), 1, {1: 0.5}, 8)


def test_memberships_reject_missing_fields():
    text = "actor,hyperedge,position,corresponding\na,p1,1,0\nb,p1,,0\nc,p1,3,nan\n"
    with pytest.raises(DataError, match="line 3.*line 4"):
        load_memberships(text)


def test_memberships_positions_contiguous():
    with pytest.raises(DataError, match="contiguous"):
        load_memberships("actor,hyperedge,position,corresponding\na,p,1,0\nb,p,3,0\n")


def test_endowments_and_allocations():
    e = load_endowments("actor,total,hyperedge,allocation\na,1.0,h1,0.4\na,1.0,h2,0.6\nb,2.0,,\n")
    assert e.total == {"a": 1.0, "b": 2.0}
    assert e.alloc[("a", "h2")] == 0.6
    with pytest.raises(DataError, match="exceed"):
        load_endowments("actor,total,hyperedge,allocation\na,1.0,h1,0.7\na,1.0,h2,0.6\n")
    with pytest.raises(DataError, match="both"):
        load_endowments("actor,total,hyperedge,allocation\na,1.0,h1,\n")
    with pytest.raises(DataError, match="line 2"):
        load_endowments("actor,total\na,NaN\n")


def test_attributes():
    at = load_attributes(read_fixture("water_attributes.csv"))
    assert len(at) == 40
    with pytest.raises(DataError):
        load_attributes("actor,income_class,gdp,assistance,productivity\na,upper,1,0,0\n")


def test_rescale():
    r, params = rescale_productivity([-2.0, 0.0, 2.0], 3)
    assert r.min() == pytest.approx(1.1) and r.max() == pytest.approx(2.9)
    assert np.all((r > 1) & (r < 3))
    assert params["source_min"] == -2.0


def test_authorship_pipeline_on_fixture():
    m = load_memberships(read_fixture("coauthor_memberships.csv"))
    e = load_endowments(read_fixture("coauthor_funding.csv"))
    rep = authorship_pipeline(m, e)
    groups = {g: (mean, n) for g, mean, n in rep.groups}
    assert groups["all:low"][0] > groups["all:high"][0]
    assert rep.summary["n_actors"] == 30
    assert rep.groups_csv().splitlines()[0] == "group,mean,count"
    assert json.loads(rep.summary_json())["rho"] == pytest.approx(rep.summary["rho"])


def test_allocation_pipeline_on_fixture():
    e = load_endowments(read_fixture("water_allocations.csv"))
    at = load_attributes(read_fixture("water_attributes.csv"))
    rep = allocation_pipeline(e, at, use_gdp=True, band_cut=4, min_degree=3, size=3)
    s = rep.summary
    assert s["sigma"] == 3
    assert 1 < s["productivity"]["target_min"] < s["productivity"]["target_max"] < 3
    assert "delta_star" in s
    rep2 = allocation_pipeline(e, None, band_cut=4, min_degree=3, size=3, productivity=2.0)
    assert rep2.summary["productivity"] == {"constant": 2.0}
