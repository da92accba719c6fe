"""Reproducible runs: file I/O, seeded sweeps, figure recipes and instance validation.

Seeds: each (cell, replicate) task gets
``SeedSequence([base_seed, cell, replicate]).generate_state(1, uint64)[0]``.
That value seeds both the draw of N and the hypergraph generator, and is
written into every output row.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from time import perf_counter

import numpy as np

from . import __version__
from .evolution import BIAS_PRESETS, EvolutionParams, robustness_sweep, run_chain
from .game import (ROW_TOL, SIMPLEX_TOL, ContributionMatrix, InvalidInstanceError,
                   delta_star, equal_contributions, equal_endowments)
from .hypergraph import (CoverageError, GeneratorConfig, Hypergraph, chain6, circulant,
                         fully_connected, generate, ring6, two_edge)
from .optimize import (InterventionConfig, apply_interventions, optimize_contributions,
                       optimize_endowments)
from .region import BiasAssignment, SimplexSampler, biased_contributions, feasible_proportion

SWEEP_EXPERIMENTS = ("threshold", "intervene")
DESK_K_GRID = tuple(range(4, 161, 8))
GEOMETRIC_K_GRID = (4, 8, 16, 32, 64, 128, 160)

# fixed structures and bias assignments used by the figure recipes (0-based)
RING_PRIMARY = {0: 0, 1: 1, 2: 1, 3: 2, 4: 3, 5: 3}
CHAIN_PRIMARY = {1: 0, 2: 0, 3: 2}
RING_DELTA = 0.6
CHAIN_DELTA = 0.9


def derive_seed(base: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([base, cell, rep]).generate_state(1, np.uint64)[0])


def fmt(v) -> str:
    """Stable text form for CSV cells."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            vals = [row[h] for h in header] if isinstance(row, dict) else row
            w.writerow([fmt(v) for v in vals])


# -- per-node files --

def _label_index(H: Hypergraph) -> dict[str, int]:
    return {H.label(i): i for i in range(H.N)}


def read_node_values(path, H: Hypergraph) -> np.ndarray:
    """``node,value`` CSV, one row per node (labels as in the hypergraph)."""
    idx = _label_index(H)
    out = np.full(H.N, np.nan)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["node", "value"]:
        raise InvalidInstanceError(f"{path}: header must be 'node,value'")
    for ln, row in enumerate(rows[1:], 2):
        if len(row) != 2:
            raise InvalidInstanceError(f"{path}: line {ln}: expected 2 fields")
        node, val = row[0].strip(), row[1].strip()
        if node not in idx:
            raise InvalidInstanceError(f"{path}: line {ln}: unknown node {node!r}")
        try:
            out[idx[node]] = float(val)
        except ValueError:
            raise InvalidInstanceError(f"{path}: line {ln}: bad value {val!r}") from None
    if np.isnan(out).any():
        raise InvalidInstanceError(f"{path}: no value for node {H.label(int(np.flatnonzero(np.isnan(out))[0]))}")
    return out


def write_node_values(path, H: Hypergraph, v) -> None:
    write_csv(path, ["node", "value"], [(H.label(i), float(v[i])) for i in range(H.N)])


def read_contributions(path, H: Hypergraph, check_support: bool = True):
    """``node,edge,value`` triplets; ``edge`` is the 0-based hyperedge line index.

    Returns (ContributionMatrix, list of support violations). Off-support
    entries are reported and dropped.
    """
    idx = _label_index(H)
    vals = np.zeros(H.edges.shape)
    bad = []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["node", "edge", "value"]:
        raise InvalidInstanceError(f"{path}: header must be 'node,edge,value'")
    for ln, row in enumerate(rows[1:], 2):
        if len(row) != 3:
            raise InvalidInstanceError(f"{path}: line {ln}: expected 3 fields")
        node, edge, val = (c.strip() for c in row)
        if node not in idx:
            raise InvalidInstanceError(f"{path}: line {ln}: unknown node {node!r}")
        try:
            k, x = int(edge), float(val)
        except ValueError:
            raise InvalidInstanceError(f"{path}: line {ln}: bad edge or value") from None
        if not 0 <= k < H.M:
            raise InvalidInstanceError(f"{path}: line {ln}: hyperedge {k} out of range")
        hit = H.edges[k] == idx[node]
        if not hit.any():
            bad.append((node, k))
            continue
        vals[k, hit] = x
    if bad and check_support:
        node, k = bad[0]
        raise InvalidInstanceError(f"support violation: node {node} is not in hyperedge {k}")
    return ContributionMatrix(H, vals), bad


def write_contributions(path, x: ContributionMatrix) -> None:
    H = x.H
    write_csv(path, ["node", "edge", "value"],
              [(H.label(i), k, v) for i, k, v in x.triplets()])


# -- sweeps --

@dataclass
class SweepSpec:
    experiment: str = "intervene"
    kind: str = "ER"
    n_min: int = 80
    n_max: int = 160
    k_grid: tuple = DESK_K_GRID
    sigma: int = 3
    replicates: int = 25
    r: float = 2.0
    gamma: float = 2.5
    base_seed: int = 2024
    low_quantile: float = 0.25
    low_share: float = 0.10
    nudge: float = 1e-4
    iterate: bool = False

    def __post_init__(self):
        self.k_grid = tuple(float(k) if not float(k).is_integer() else int(k) for k in self.k_grid)
        if self.experiment not in SWEEP_EXPERIMENTS:
            raise ValueError(f"sweep experiment must be one of {SWEEP_EXPERIMENTS}; "
                             "use the dedicated subcommand for the others")
        if not self.k_grid:
            raise ValueError("k grid must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")

    @property
    def cells(self) -> list[dict]:
        return [{"cell": c, "k": k} for c, k in enumerate(self.k_grid)]

    def to_json(self) -> dict:
        d = asdict(self)
        d["k_grid"] = list(self.k_grid)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SweepSpec":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if k == "k_grid" else v) for k, v in d.items() if k in names})


SWEEP_COLUMNS = ["cell", "replicate", "seed", "kind", "k", "N", "M", "sigma", "r",
                 "delta_baseline", "delta_redistribution", "delta_nudge", "delta_combined",
                 "feasible_baseline", "lowered_redistribution", "lowered_nudge",
                 "lowered_combined", "error"]


def run_task(spec: SweepSpec, cell: int, rep: int) -> tuple[dict, float]:
    t0 = perf_counter()
    k = spec.k_grid[cell]
    seed = derive_seed(spec.base_seed, cell, rep)
    row = {c: None for c in SWEEP_COLUMNS}
    row.update(cell=cell, replicate=rep, seed=seed, kind=spec.kind, k=k,
               sigma=spec.sigma, r=spec.r, error="")
    try:
        rng = np.random.default_rng(seed)
        N = int(rng.integers(spec.n_min, spec.n_max + 1))
        row["N"] = N
        H = generate(GeneratorConfig(spec.kind, N, k, spec.sigma, spec.gamma, seed=seed))
        row["M"] = H.M
        if spec.experiment == "threshold":
            d = delta_star(H, equal_endowments(N), np.full(N, spec.r), equal_contributions(H))
            row.update(delta_baseline=d, feasible_baseline=d <= 1.0)
        else:
            cfg = InterventionConfig(spec.low_quantile, spec.low_share, spec.nudge, spec.iterate)
            out = apply_interventions(H, np.full(N, spec.r), cfg)
            low = out.lowered()
            row.update(delta_baseline=out.baseline, delta_redistribution=out.redistribution,
                       delta_nudge=out.nudge, delta_combined=out.combined,
                       feasible_baseline=out.baseline <= 1.0,
                       lowered_redistribution=low["redistribution"],
                       lowered_nudge=low["nudge"], lowered_combined=low["combined"])
    except (CoverageError, InvalidInstanceError, ValueError, RuntimeError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row, perf_counter() - t0


def _run_cell(args):
    spec, cell = args
    return cell, [run_task(spec, cell, rep) for rep in range(spec.replicates)]


def _part_path(out: Path, cell: int) -> Path:
    return out / "parts" / f"cell_{cell:05d}.csv"


def _write_part(out: Path, cell: int, results) -> None:
    tmp = _part_path(out, cell).with_suffix(".tmp")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS + ["seconds"])
    for row, sec in results:
        w.writerow([fmt(row[c]) for c in SWEEP_COLUMNS] + [f"{sec:.6f}"])
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, _part_path(out, cell))


def _read_part(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class SweepResult:
    out: Path
    rows: list[dict]
    failed: int
    summary: dict = field(default_factory=dict)


def summarize(rows: list[dict]) -> dict:
    ok = [r for r in rows if not r["error"]]
    out = {"rows": len(rows), "failed": len(rows) - len(ok)}
    for col in ("feasible_baseline", "lowered_redistribution", "lowered_nudge", "lowered_combined"):
        vals = [r[col] for r in ok if r[col] != ""]
        if vals:
            out[col] = sum(v == "1" for v in vals) / len(vals)
    return out


def run_sweep(spec: SweepSpec, out, jobs: int = 1, resume: bool = True) -> SweepResult:
    """Run every (cell, replicate) task; one part file per cell, merged on completion.

    Cells whose part file already exists are skipped when ``resume`` is set.
    results.csv has no timing column so reruns are byte-identical; per-row
    wall time goes to timing.csv.
    """
    out = Path(out)
    (out / "parts").mkdir(parents=True, exist_ok=True)
    manifest = {"spec": spec.to_json(), "code_version": __version__,
                "seed_mix": "SeedSequence([base_seed, cell, replicate]).generate_state(1, uint64)[0]",
                "cells": spec.cells}
    man_path = out / "manifest.json"
    if resume and man_path.exists():
        old = json.loads(man_path.read_text(encoding="utf-8"))
        if old.get("spec") != manifest["spec"]:
            raise ValueError(f"{man_path} was written for a different spec; use a fresh --out")
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    todo = [c for c in range(len(spec.k_grid))
            if not (resume and _part_path(out, c).exists())]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for cell, res in ex.map(_run_cell, [(spec, c) for c in todo]):
                _write_part(out, cell, res)
    else:
        for c in todo:
            _write_part(out, *_run_cell((spec, c)))

    rows = []
    for c in range(len(spec.k_grid)):
        rows += _read_part(_part_path(out, c))
    rows.sort(key=lambda r: (int(r["cell"]), int(r["replicate"])))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r[c] for c in SWEEP_COLUMNS])
    (out / "results.csv").write_text(buf.getvalue(), encoding="utf-8")
    write_csv(out / "timing.csv", ["cell", "replicate", "seconds"],
              [(r["cell"], r["replicate"], r["seconds"]) for r in rows])
    summary = summarize(rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return SweepResult(out, rows, summary["failed"], summary)


# -- figure recipes --

RECIPES = ("fig2", "fig3", "fig4", "fig5", "ed3", "ed5", "ed6")
REGION_COLUMNS = ["delta", "p", "proportion", "stderr", "samples", "seed"]


def _region_rows(H, r, x, deltas, sampler, p=None, extra=None):
    rows = []
    for d, prop in zip(deltas, feasible_proportion(H, r, x, deltas, sampler)):
        row = dict(extra or {})
        row.update(delta=d, p=p, proportion=prop.estimate, stderr=prop.stderr,
                   samples=prop.samples, seed=sampler.seed)
        rows.append(row)
    return rows


def _p_sweep(H, r, primary, delta, ps, sampler):
    E = sampler.sample()
    rows = []
    for p in ps:
        x = biased_contributions(H, BiasAssignment(primary, float(p)))
        prop = feasible_proportion(H, r, x, delta, E=E)
        rows.append({"delta": delta, "p": float(p), "proportion": prop.estimate,
                     "stderr": prop.stderr, "samples": prop.samples, "seed": sampler.seed})
    return rows


def fig4_setups():
    H = ring6()
    eq = equal_endowments(6)
    return H, {
        "b": (eq, np.full(6, 2.0)),
        "c": (np.array([0.3] + [0.14] * 5), np.full(6, 2.0)),
        "d": (eq, np.array([2.5] + [1.9] * 5)),
    }


def run_figure(recipe: str, out, samples: int = 200_000, seed: int = 0) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, header, rows):
        p = out / name
        write_csv(p, header, rows)
        written.append(p)

    deltas = [round(0.02 * i, 10) for i in range(51)]
    if recipe == "fig2":
        rows, marks = [], []
        for N in range(3, 7):
            H = fully_connected(N)
            x = equal_contributions(H)
            rows += _region_rows(H, np.full(N, 2.0), x, deltas,
                                 SimplexSampler(N, samples, seed), extra={"N": N})
            for name, r in (("symmetric", np.full(N, 2.0)),
                            ("asymmetric", np.array([1.5, 2, 2.5, 2, 2, 2][:N]))):
                res = optimize_endowments(H, r, x)
                marks.append({"N": N, "r": name, "delta_star_equal": res.delta_star_baseline,
                              "delta_star_opt": res.delta_star_opt,
                              "gap": res.delta_star_baseline - res.delta_star_opt,
                              "iterations": res.iterations,
                              "witness": " ".join(fmt(v) for v in res.witness)})
        emit("fig2b.csv", ["N"] + REGION_COLUMNS, rows)
        emit("fig2c.csv", ["N", "r", "delta_star_equal", "delta_star_opt", "gap",
                           "iterations", "witness"], marks)
    elif recipe == "fig3":
        H = ring6()
        ps = np.linspace(0.5, 1.0, 7)
        emit("fig3a.csv", REGION_COLUMNS,
             _p_sweep(H, np.full(6, 2.0), RING_PRIMARY, RING_DELTA, ps, SimplexSampler(6, samples, seed)))
    elif recipe == "fig4":
        H, setups = fig4_setups()
        rows = []
        for name, (e, r) in setups.items():
            res = optimize_contributions(H, r, e)
            rows.append({"setup": name, "delta_star_equal": res.delta_star_baseline,
                         "delta_star_opt": res.delta_star_opt, "gap": res.gap,
                         "iterations": res.iterations})
            p = out / f"fig4{name}_contributions.csv"
            write_contributions(p, res.witness)
            written.append(p)
        emit("fig4.csv", ["setup", "delta_star_equal", "delta_star_opt", "gap", "iterations"], rows)
    elif recipe == "fig5":
        H = two_edge()
        r = np.full(4, 1.38)
        x = equal_contributions(H)
        eq = equal_endowments(4)
        res = optimize_endowments(H, r, x)
        pts = []
        for name, e in (("equal", eq), ("optimized", res.witness)):
            d = delta_star(H, e, r, x)
            pts.append({"point": name, "e1": e[0], "e2": e[1], "e3": e[2], "e4": e[3],
                        "delta_star": d, "feasible_at_0.9": d <= 0.9})
        emit("fig5c.csv", ["point", "e1", "e2", "e3", "e4", "delta_star", "feasible_at_0.9"], pts)
        ps = np.round(np.linspace(0.0, 1.0, 21), 10)
        emit("fig5d.csv", REGION_COLUMNS,
             _p_sweep(chain6(), np.full(6, 2.0), CHAIN_PRIMARY, CHAIN_DELTA, ps,
                      SimplexSampler(6, samples, seed)))
    elif recipe == "ed3":
        rep = run_chain(two_edge(), equal_endowments(4), np.full(4, 2.0),
                        EvolutionParams(beta=1.0, eps=0.01, delta=0.9))
        p = out / "ed3_chain.json"
        p.write_text(rep.to_json() + "\n", encoding="utf-8")
        written.append(p)
    elif recipe == "ed5":
        rows = robustness_sweep(two_edge(), np.full(4, 2.0), betas=(0.0, 0.5, 1.0, 2.0, 5.0, 10.0),
                                epss=(0.0, 0.01, 0.05, 0.1), horizons=(2, 5, 10, 20, 50),
                                presets=tuple(BIAS_PRESETS))
        emit("ed5.csv", ["endowment", "beta", "eps", "horizon", "delta", "Pi_total"], rows)
    elif recipe == "ed6":
        rows = []
        N = 100
        for m in (1, 2, 4, 8, 16, 33):
            H = circulant(N, [(0, j, 2 * j) for j in range(1, m + 1)])
            for r in (1.5, 2.0, 2.5):
                d = delta_star(H, equal_endowments(N), np.full(N, r), equal_contributions(H))
                rows.append({"N": N, "k": int(H.degrees[0]), "r": r, "delta_star": d,
                             "closed_form": (3 - r) / (r * 2)})
        emit("ed6.csv", ["N", "k", "r", "delta_star", "closed_form"], rows)
    else:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {RECIPES}")
    return written


# -- validation --

def validate_instance(H: Hypergraph, e=None, r=None, x_path=None, relaxed: bool = False) -> list[str]:
    """Every invariant violation as one line; empty list means valid."""
    issues = []
    if len(H.isolated):
        issues.append(f"isolated nodes: {', '.join(H.label(int(i)) for i in H.isolated)}")
    if e is not None:
        e = np.asarray(e, dtype=float)
        for i in np.flatnonzero((e < 0) | (e > 1)):
            issues.append(f"endowment out of [0,1] at node {H.label(int(i))}: {e[i]}")
        gap = abs(e.sum() - 1.0)
        if gap > SIMPLEX_TOL:
            issues.append(f"simplex violation: endowments sum to {e.sum():.12g} (off by {gap:.3g})")
    if r is not None:
        r = np.broadcast_to(np.asarray(r, dtype=float), (H.N,))
        for i in np.flatnonzero((r <= 1) | (r >= H.sigma)):
            issues.append(f"dilemma-range violation at node {H.label(int(i))}: r={r[i]} not in (1, {H.sigma})")
    if x_path is not None:
        x, bad = read_contributions(x_path, H, check_support=False)
        for node, k in bad:
            issues.append(f"support violation: node {node} is not a member of hyperedge {k}")
        v = x.values
        for k, c in zip(*np.nonzero((v < 0) | (v > 1))):
            issues.append(f"contribution out of [0,1] at node {H.label(int(H.edges[k, c]))}, hyperedge {k}")
        rs = x.row_sums()
        for i in np.flatnonzero(np.abs(rs - 1.0) > ROW_TOL):
            issues.append(f"row-sum violation at node {H.label(int(i))}: {rs[i]:.12g}")
    return issues
