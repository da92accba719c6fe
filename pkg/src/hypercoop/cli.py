"""hypercoop command line.

Exit codes: 0 ok, 1 invalid input, 2 numerical failure, 3 sweep finished
with failed rows.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import empirical as emp
from .evolution import BIAS_PRESETS, EvolutionParams, StateSpaceTooLarge, robustness_sweep, run_chain
from .game import (GameInstance, InvalidInstanceError, check_endowments, check_productivity,
                   equal_contributions, equal_endowments, threshold_report)
from .harness import (DESK_K_GRID, RECIPES, REGION_COLUMNS, SweepSpec, fmt, read_contributions,
                      read_node_values, run_figure, run_sweep, validate_instance, write_contributions,
                      write_csv, write_node_values)
from .hypergraph import (CoverageError, GeneratorConfig, HyperedgeFormatError, generate,
                         read_hyperedge_file, write_hyperedge_file)
from .optimize import (InterventionConfig, OptimizationError, apply_interventions,
                       optimize_contributions, optimize_endowments)
from .region import BiasAssignment, SimplexSampler, biased_contributions, feasible_proportion

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3


def float_list(text: str) -> list[float]:
    """'0.1,0.2' or 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        a, b, s = (float(t) for t in text.split(":"))
        if s <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        n = int(np.floor((b - a) / s + 1e-9)) + 1
        return [round(a + i * s, 12) for i in range(n)]
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- instance loading shared by several subcommands --

def _instance(args, need_e=True, need_x=True):
    H = read_hyperedge_file(args.hypergraph, args.dimension)
    e = check_endowments(read_node_values(args.endowments, H), H.N) \
        if getattr(args, "endowments", None) else equal_endowments(H.N)
    if getattr(args, "productivity", None):
        r = read_node_values(args.productivity, H)
    else:
        r = np.full(H.N, args.r)
    r = check_productivity(r, H.sigma, H.N, getattr(args, "relaxed", False))
    x = None
    if need_x:
        x = read_contributions(args.contributions, H)[0] if getattr(args, "contributions", None) \
            else equal_contributions(H)
    return H, e, r, x


def _add_instance(p, endowments=True, contributions=True):
    p.add_argument("--hypergraph", required=True, help="hyperedge-list file")
    p.add_argument("--dimension", type=int, help="keep only hyperedges of this size")
    p.add_argument("--r", type=float, default=2.0, help="symmetric productivity")
    p.add_argument("--productivity", help="node,value CSV of per-node productivity")
    p.add_argument("--relaxed", action="store_true", help="warn instead of fail outside 1 < r < sigma")
    if endowments:
        p.add_argument("--endowments", help="node,value CSV (default: equal)")
    if contributions:
        p.add_argument("--contributions", help="node,edge,value CSV (default: equal)")


# -- subcommands --

def cmd_generate(args):
    cfg = GeneratorConfig(args.kind, args.N, args.k, args.sigma, args.gamma, args.seed)
    H = generate(cfg)
    if args.out:
        write_hyperedge_file(H, args.out)
    else:
        from .hypergraph import dump_hyperedge_list
        sys.stdout.write(dump_hyperedge_list(H))
    return EXIT_OK


def cmd_threshold(args):
    H, e, r, x = _instance(args)
    G = GameInstance(H, e, r, x, relaxed=args.relaxed)
    rep = threshold_report(G)
    _emit(args, rep.to_csv())
    print(f"delta*={fmt(rep.delta_star)} {rep.feasibility}", file=sys.stderr)
    return EXIT_OK


def _parse_bias(text: str) -> dict[int, int]:
    out = {}
    for part in text.split(","):
        node, edge = part.split(":")
        out[int(node)] = int(edge)
    return out


def cmd_region(args):
    H, _, r, x = _instance(args, need_e=False)
    sampler = SimplexSampler(H.N, args.samples, args.seed)
    rows = []
    if args.bias:
        E = sampler.sample()
        for p in args.p_grid:
            xb = biased_contributions(H, BiasAssignment(_parse_bias(args.bias), p))
            for d, pr in zip(args.delta_grid, feasible_proportion(H, r, xb, args.delta_grid, E=E)):
                rows.append((d, p, pr.estimate, pr.stderr, pr.samples, args.seed))
    else:
        for d, pr in zip(args.delta_grid, feasible_proportion(H, r, x, args.delta_grid, sampler)):
            rows.append((d, None, pr.estimate, pr.stderr, pr.samples, args.seed))
    out = _out(args, "region.csv")
    write_csv(out, REGION_COLUMNS, rows)
    return EXIT_OK


def _result_json(res, kind):
    return {"program": kind, "delta_star_equal": res.delta_star_baseline,
            "delta_star_opt": res.delta_star_opt, "gap": res.gap,
            "iterations": res.iterations, "bracket": list(res.bracket)}


def _write_result(out: Path, res, kind, H, witness_writer):
    out.mkdir(parents=True, exist_ok=True)
    d = _result_json(res, kind)
    (out / "result.json").write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")
    write_csv(out / "result.csv", list(d)[:-1], [d])
    witness_writer(out)


def cmd_optimize_e(args):
    H, _, r, x = _instance(args, need_e=False)
    res = optimize_endowments(H, r, x, args.tolerance)
    _write_result(_out(args, "optimize_e"), res, "endowments", H,
                  lambda o: write_node_values(o / "witness_endowments.csv", H, res.witness))
    print(f"delta*_equal={fmt(res.delta_star_baseline)} delta*_opt={fmt(res.delta_star_opt)}",
          file=sys.stderr)
    return EXIT_OK


def cmd_optimize_x(args):
    H, e, r, _ = _instance(args, need_x=False)
    res = optimize_contributions(H, r, e, args.tolerance)
    _write_result(_out(args, "optimize_x"), res, "contributions", H,
                  lambda o: write_contributions(o / "witness_contributions.csv", res.witness))
    print(f"delta*_equal={fmt(res.delta_star_baseline)} delta*_opt={fmt(res.delta_star_opt)}",
          file=sys.stderr)
    return EXIT_OK


def cmd_intervene(args):
    H, _, r, _ = _instance(args, need_x=False)
    cfg = InterventionConfig(args.low_quantile, args.low_share, args.nudge, args.iterate)
    o = apply_interventions(H, r, cfg)
    low = o.lowered()
    row = {"delta_baseline": o.baseline, "delta_redistribution": o.redistribution,
           "delta_nudge": o.nudge, "delta_combined": o.combined,
           **{f"lowered_{k}": v for k, v in low.items()}}
    _emit(args, ",".join(row) + "\n" + ",".join(fmt(v) for v in row.values()) + "\n")
    return EXIT_OK


def cmd_evolve(args):
    H, e, r, _ = _instance(args, need_x=False)
    if args.bias_preset:
        from .evolution import biased_endowments
        e = biased_endowments(H.N, BIAS_PRESETS[args.bias_preset], args.bias)
    if args.beta_grid or args.eps_grid or args.horizon_grid:
        rows = robustness_sweep(H, r, args.beta_grid or [args.beta], args.eps_grid or [args.eps],
                                args.horizon_grid or [1.0 / (1.0 - args.delta)],
                                presets=tuple(args.presets.split(",")), bias=args.bias)
        write_csv(_out(args, "evolve_sweep.csv"),
                  ["endowment", "beta", "eps", "horizon", "delta", "Pi_total"], rows)
        return EXIT_OK
    rep = run_chain(H, e, r, EvolutionParams(args.beta, args.eps, args.delta))
    _emit(args, rep.to_json() + "\n")
    return EXIT_OK


def cmd_empirical(args):
    out = _out(args, "empirical")
    out.mkdir(parents=True, exist_ok=True)
    # bundled synthetic fixtures stand in for missing inputs
    fx = emp.read_fixture
    if args.pipeline == "authorship":
        m = emp.load_memberships(args.memberships or fx("coauthor_memberships.csv"))
        e = emp.load_endowments(args.endowments or fx("coauthor_funding.csv"))
        focal = args.focal.split(",") if args.focal else None
        cut = 50.0 if args.band_cut is None else args.band_cut
        rep = emp.authorship_pipeline(m, e, focal, args.n_focal, cut, args.weighting)
    else:
        e = emp.load_endowments(args.endowments or fx("water_allocations.csv"))
        if args.attributes:
            at = emp.load_attributes(args.attributes)
        else:
            at = None if args.endowments else emp.load_attributes(fx("water_attributes.csv"))
        cut = 8.0 if args.band_cut is None else args.band_cut
        rep = emp.allocation_pipeline(e, at, args.use_gdp, cut, args.min_degree,
                                      args.dimension, args.constant_r)
    (out / "groups.csv").write_text(rep.groups_csv(), encoding="utf-8")
    (out / "summary.json").write_text(rep.summary_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args):
    if args.manifest:
        spec = SweepSpec.from_json(json.loads(Path(args.manifest).read_text())["spec"])
    else:
        spec = SweepSpec(args.experiment, args.kind, args.n_min, args.n_max, tuple(args.k_grid),
                         args.sigma, args.replicates, args.r, args.gamma, args.seed,
                         args.low_quantile, args.low_share, args.nudge, args.iterate)
    res = run_sweep(spec, _out(args, "sweep"), args.jobs, resume=not args.fresh)
    print(json.dumps(res.summary, sort_keys=True), file=sys.stderr)
    return EXIT_PARTIAL if res.failed else EXIT_OK


def cmd_figure(args):
    for p in run_figure(args.recipe, _out(args, f"figure_{args.recipe}"), args.samples, args.seed):
        print(p, file=sys.stderr)
    return EXIT_OK


def cmd_validate(args):
    H = read_hyperedge_file(args.hypergraph, args.dimension)
    e = read_node_values(args.endowments, H) if args.endowments else None
    r = read_node_values(args.productivity, H) if args.productivity else \
        (args.r if args.r is not None else None)
    issues = validate_instance(H, e, r, args.contributions)
    for line in issues:
        print(line)
    if not issues:
        print(f"ok: N={H.N} M={H.M} sigma={H.sigma}")
    return EXIT_INPUT if issues else EXIT_OK


# -- parser --

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypercoop", description="cooperation thresholds on hypergraphs")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=fn)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--config", help="flat key=value file; its values override flags")
        return p

    p = add("generate", cmd_generate, "random ER / scale-free hypergraph")
    p.add_argument("--kind", choices=["ER", "BA"], default="ER")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=float, required=True, help="mean hyperdegree")
    p.add_argument("--sigma", type=int, default=3)
    p.add_argument("--gamma", type=float, default=2.5)

    p = add("threshold", cmd_threshold, "per-node thresholds and delta*")
    _add_instance(p)

    p = add("region", cmd_region, "feasible share of the endowment simplex")
    _add_instance(p, endowments=False)
    p.add_argument("--delta-grid", type=float_list, default=float_list("0:1:0.05"))
    p.add_argument("--p-grid", type=float_list, default=float_list("0.5:1:0.1"))
    p.add_argument("--bias", help="primary hyperedges as node:edge,node:edge (enables the p sweep)")
    p.add_argument("--samples", type=int, default=200_000)

    p = add("optimize-e", cmd_optimize_e, "optimal endowments for fixed contributions")
    _add_instance(p, endowments=False)
    p.add_argument("--tolerance", type=float, default=1e-9)

    p = add("optimize-x", cmd_optimize_x, "optimal contributions for fixed endowments")
    _add_instance(p, contributions=False)
    p.add_argument("--tolerance", type=float, default=1e-9)

    p = add("intervene", cmd_intervene, "redistribution / nudge / combined")
    _add_instance(p, endowments=False, contributions=False)
    p.add_argument("--low-quantile", type=float, default=0.25)
    p.add_argument("--low-share", type=float, default=0.10)
    p.add_argument("--nudge", type=float, default=1e-4)
    p.add_argument("--iterate", action="store_true")

    p = add("evolve", cmd_evolve, "discounted state distribution of the strategy chain")
    _add_instance(p, contributions=False)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--beta-grid", type=float_list)
    p.add_argument("--eps-grid", type=float_list)
    p.add_argument("--horizon-grid", type=float_list, help="values of 1/(1-delta)")
    p.add_argument("--bias-preset", choices=sorted(BIAS_PRESETS))
    p.add_argument("--presets", default="equal")
    p.add_argument("--bias", type=float, default=1.0)

    p = add("empirical", cmd_empirical, "authorship / allocation pipelines on CSV tables")
    p.add_argument("pipeline", choices=["authorship", "allocation"])
    p.add_argument("--memberships")
    p.add_argument("--endowments")
    p.add_argument("--attributes")
    p.add_argument("--focal", help="comma-separated focal actors")
    p.add_argument("--n-focal", type=int, default=3)
    p.add_argument("--band-cut", type=float, help="degree cut (default 50 authorship, 8 allocation)")
    p.add_argument("--weighting", choices=["edge", "none"], default="edge")
    p.add_argument("--use-gdp", action="store_true")
    p.add_argument("--min-degree", type=int, default=1)
    p.add_argument("--dimension", type=int)
    p.add_argument("--constant-r", type=float)

    p = add("sweep", cmd_sweep, "seeded sweep over random hypergraphs")
    p.add_argument("--experiment", choices=["threshold", "intervene"], default="intervene")
    p.add_argument("--kind", choices=["ER", "BA"], default="ER")
    p.add_argument("--n-min", type=int, default=80)
    p.add_argument("--n-max", type=int, default=160)
    p.add_argument("--k-grid", type=float_list, default=list(DESK_K_GRID))
    p.add_argument("--sigma", type=int, default=3)
    p.add_argument("--replicates", type=int, default=25)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=2.5)
    p.add_argument("--low-quantile", type=float, default=0.25)
    p.add_argument("--low-share", type=float, default=0.10)
    p.add_argument("--nudge", type=float, default=1e-4)
    p.add_argument("--iterate", action="store_true")
    p.add_argument("--manifest", help="rerun from an existing manifest.json")
    p.add_argument("--fresh", action="store_true", help="ignore existing part files")
    p.set_defaults(seed=2024)

    p = add("figure", cmd_figure, "plot-ready CSV for a figure recipe")
    p.add_argument("recipe", choices=RECIPES)
    p.add_argument("--samples", type=int, default=200_000)

    p = add("validate", cmd_validate, "check instance files")
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--dimension", type=int)
    p.add_argument("--endowments")
    p.add_argument("--productivity")
    p.add_argument("--r", type=float)
    p.add_argument("--contributions")
    return ap


def read_config(path) -> list[str]:
    """Turn ``key = value`` lines into extra argv; ``#`` comments allowed."""
    extra = []
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {ln}: expected key=value")
        key, val = (t.strip() for t in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if val.lower() in ("true", "yes", "on"):
            extra.append(flag)
        elif val.lower() in ("false", "no", "off"):
            continue
        else:
            extra += [flag, val]
    return extra


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.config:
            # later occurrences win in argparse, so config values override flags
            args = ap.parse_args(argv + read_config(args.config))
        return args.func(args)
    except (InvalidInstanceError, HyperedgeFormatError, emp.DataError, CoverageError,
            StateSpaceTooLarge, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OptimizationError, np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
