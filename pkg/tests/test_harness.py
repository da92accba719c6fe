import csv
import json

import numpy as np
import pytest

from hypercoop.cli import float_list, main
from hypercoop.harness import (SWEEP_COLUMNS, SweepSpec, derive_seed, fmt, read_contributions,
                               run_figure, run_sweep, validate_instance)
from hypercoop.hypergraph import read_hyperedge_file, two_edge, write_hyperedge_file


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def instance(tmp_path):
    p = tmp_path / "h.txt"
    write_hyperedge_file(two_edge(), p)
    return p


def test_seed_mixing_is_stable_and_distinct():
    assert derive_seed(2024, 3, 1) == derive_seed(2024, 3, 1)
    seeds = {derive_seed(2024, c, r) for c in range(10) for r in range(10)}
    assert len(seeds) == 100


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(float("inf")) == "inf"
    assert fmt(True) == "1"
    assert fmt(3) == "3"


def test_float_list():
    assert float_list("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert float_list("1,2.5") == [1.0, 2.5]


def _small_spec(**kw):
    base = dict(experiment="threshold", n_min=20, n_max=30,
                k_grid=tuple(float(k) for k in range(4, 14)), replicates=5)
    base.update(kw)
    return SweepSpec(**base)


def test_sweep_row_count_and_determinism(tmp_path):
    spec = _small_spec()
    a = run_sweep(spec, tmp_path / "a")
    b = run_sweep(spec, tmp_path / "b", jobs=2)
    assert len(a.rows) == 50
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    rows = _rows(tmp_path / "a" / "results.csv")
    assert list(rows[0]) == SWEEP_COLUMNS
    assert len({r["seed"] for r in rows}) == 50
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert SweepSpec.from_json(man["spec"]) == spec


def test_sweep_resume_and_manifest_conflict(tmp_path):
    spec = _small_spec(k_grid=(4.0, 6.0), replicates=2)
    out = tmp_path / "s"
    first = (run_sweep(spec, out), (out / "results.csv").read_bytes())
    (out / "results.csv").unlink()
    run_sweep(spec, out)
    assert (out / "results.csv").read_bytes() == first[1]
    with pytest.raises(ValueError):
        run_sweep(_small_spec(k_grid=(4.0,), replicates=2), out)


def test_cli_generate_threshold(tmp_path, instance):
    g = tmp_path / "g.txt"
    assert main(["generate", "--N", "30", "--k", "5", "--seed", "3", "--out", str(g)]) == 0
    H = read_hyperedge_file(g)
    assert H.N == 30 and H.sigma == 3
    out = tmp_path / "t.csv"
    assert main(["threshold", "--hypergraph", str(instance), "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 4


def test_cli_exit_codes(tmp_path, instance):
    assert main(["threshold", "--hypergraph", str(tmp_path / "missing.txt")]) == 1
    assert main(["threshold", "--hypergraph", str(instance), "--r", "3.5"]) == 1
    bad = tmp_path / "e.csv"
    bad.write_text("node,value\n0,0.5\n1,0.5\n2,0.5\n3,0.5\n")
    assert main(["optimize-x", "--hypergraph", str(instance), "--endowments", str(bad),
                 "--out", str(tmp_path / "o")]) == 1


def test_cli_config_overrides_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# generator\nN = 25\nk = 4\n")
    g = tmp_path / "g.txt"
    assert main(["generate", "--N", "90", "--k", "6", "--out", str(g), "--config", str(cfg)]) == 0
    assert read_hyperedge_file(g).N == 25


def test_cli_sweep_and_manifest(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", "--experiment", "threshold", "--n-min", "20", "--n-max", "25",
            "--k-grid", "4,8", "--replicates", "2", "--out", str(out)]
    assert main(args) == 0
    first = (out / "results.csv").read_bytes()
    out2 = tmp_path / "sw2"
    assert main(["sweep", "--manifest", str(out / "manifest.json"), "--out", str(out2)]) == 0
    assert (out2 / "results.csv").read_bytes() == first


def test_validate_messages(tmp_path, instance):
    H = two_edge()
    issues = validate_instance(H, e=[0.5, 0.5, 0.5, 0.5], r=[2, 2, 3.2, 2])
    assert any("simplex violation" in s for s in issues)
    assert any("dilemma-range violation" in s and "3.2" in s for s in issues)
    x = tmp_path / "x.csv"
    x.write_text("node,edge,value\n0,0,1.0\n1,0,0.6\n1,1,0.6\n2,1,1.0\n3,0,1.0\n")
    issues = validate_instance(H, x_path=x)
    assert any("support violation" in s for s in issues)
    assert any("row-sum violation" in s for s in issues)
    assert validate_instance(H, e=[0.25] * 4, r=2.0) == []
    assert main(["validate", "--hypergraph", str(instance), "--r", "2"]) == 0
    assert main(["validate", "--hypergraph", str(instance), "--contributions", str(x)]) == 1


def test_contributions_roundtrip(tmp_path, instance):
    H = read_hyperedge_file(instance)
    assert main(["optimize-x", "--hypergraph", str(instance), "--out", str(tmp_path / "opt")]) == 0
    cm, bad = read_contributions(tmp_path / "opt" / "witness_contributions.csv", H)
    assert not bad
    np.testing.assert_allclose(cm.row_sums(), 1.0, atol=1e-9)


def test_figure_fig2(tmp_path):
    run_figure("fig2", tmp_path, samples=2000, seed=1)
    marks = _rows(tmp_path / "fig2c.csv")
    assert len(marks) == 8
    for m in marks:
        if m["r"] == "symmetric":
            assert float(m["delta_star_equal"]) == pytest.approx(0.25, abs=1e-12)
        assert float(m["delta_star_opt"]) <= float(m["delta_star_equal"]) + 1e-9


def test_figure_fig5(tmp_path):
    run_figure("fig5", tmp_path, samples=2000, seed=1)
    pts = {p["point"]: p for p in _rows(tmp_path / "fig5c.csv")}
    assert pts["equal"]["feasible_at_0.9"] == "0"
    assert pts["optimized"]["feasible_at_0.9"] == "1"


def test_figure_ed3(tmp_path):
    run_figure("ed3", tmp_path)
    d = json.loads((tmp_path / "ed3_chain.json").read_text())
    assert d["state_count"] == 36


def test_figure_ed6(tmp_path):
    run_figure("ed6", tmp_path)
    for row in _rows(tmp_path / "ed6.csv"):
        assert float(row["delta_star"]) == pytest.approx(float(row["closed_form"]), rel=1e-12)


def test_unknown_recipe(tmp_path):
    with pytest.raises(ValueError):
        run_figure("fig9", tmp_path)


def test_cli_empirical_defaults_to_fixtures(tmp_path):
    for pipeline in ("authorship", "allocation"):
        out = tmp_path / pipeline
        assert main(["empirical", pipeline, "--out", str(out)]) == 0
        assert _rows(out / "groups.csv")
        assert json.loads((out / "summary.json").read_text())
