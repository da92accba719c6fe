"""Empirical pipelines: authorship weights, degree/endowment correlation and
contribution scores grouped by co-member hyperdegree.

Three CSV tables are understood:

* memberships: ``actor,hyperedge,position,corresponding``
* endowments:  ``actor,total[,hyperedge,allocation]`` (one row per allocation;
  a row may leave both ``hyperedge`` and ``allocation`` empty to state the
  total only)
* attributes:  ``actor,income_class,gdp,assistance,productivity``

Any other empty or NaN field rejects the whole file with line numbers.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .game import ContributionMatrix, delta_star, node_thresholds
from .hypergraph import Hypergraph

GDP_RATES = {"low": 0.003, "middle": 0.01, "high": 0.005}
CORRESPONDING_WEIGHT = 0.5


class DataError(ValueError):
    pass


class UndefinedCorrelation(ValueError):
    pass


def authorship_weight(position: int, is_corresponding: bool = False) -> float:
    if position < 1:
        raise ValueError("position must be >= 1")
    w = 2.0 ** -(position - 1)
    return max(w, CORRESPONDING_WEIGHT) if is_corresponding else w


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("need two 1-d sequences of equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("zero variance; correlation undefined")
    return float(np.clip(dx @ dy / math.sqrt(sxx * syy), -1.0, 1.0))


def contribution_score(e_alloc: float, e_total: float) -> float:
    if e_total <= 0:
        raise ValueError("total endowment must be positive")
    if e_alloc < 0 or e_alloc > e_total * (1 + 1e-9):
        raise ValueError("allocation must lie in [0, total]")
    return e_alloc / e_total


def gdp_based_endowment(income_class: str, gdp: float, assistance: float) -> float:
    try:
        rate = GDP_RATES[income_class]
    except KeyError:
        raise ValueError(f"unknown income class {income_class!r}") from None
    return rate * gdp + assistance


@dataclass
class BandMeans:
    mean_low: float | None
    mean_high: float | None
    count_low: int
    count_high: int


def co_member_means(H: Hypergraph, focal: int, edges, weights=None) -> np.ndarray:
    """Mean hyperdegree of each hyperedge's members other than ``focal``.

    ``weights`` maps (node, edge) -> weight; they are normalised within the
    hyperedge. Without weights the plain mean is used.
    """
    k = H.degrees
    out = []
    for h in edges:
        mem = [int(j) for j in H.edges[h] if j != focal]
        if len(mem) == len(H.edges[h]):
            raise ValueError(f"node {focal} is not a member of hyperedge {h}")
        if weights is None:
            out.append(float(np.mean(k[mem])))
        else:
            w = np.array([weights[(j, h)] for j in mem], dtype=float)
            if w.sum() <= 0:
                raise ValueError(f"hyperedge {h} has zero co-member weight")
            out.append(float(w @ k[mem] / w.sum()))
    return np.array(out)


def score_by_degree_band(H: Hypergraph, focal: int, scores: dict, band_cut: float,
                         weights=None) -> BandMeans:
    edges = sorted(scores)
    means = co_member_means(H, focal, edges, weights)
    s = np.array([scores[h] for h in edges], dtype=float)
    low = means < band_cut
    mean = lambda a: float(a.mean()) if len(a) else None  # noqa: E731
    return BandMeans(mean(s[low]), mean(s[~low]), int(low.sum()), int((~low).sum()))


# -- CSV ingestion --

def _read_rows(src, required, optional=()):
    if hasattr(src, "read"):
        text = src.read()
    elif isinstance(src, str) and "\n" in src:
        text = src
    else:
        with open(src, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    cols = reader.fieldnames or []
    missing = [c for c in required if c not in cols]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")
    rows, errors = [], []
    for lineno, row in enumerate(reader, 2):
        bad = [c for c in required
               if row.get(c) is None or row[c].strip() == "" or row[c].strip().lower() == "nan"]
        bad += [c for c in optional if c in cols and row.get(c) is not None
                and row[c].strip().lower() == "nan"]
        if bad:
            errors.append(f"line {lineno}: missing or NaN {', '.join(bad)}")
            continue
        rows.append((lineno, {k: (v.strip() if v is not None else "") for k, v in row.items()}))
    if errors:
        raise DataError("; ".join(errors))
    return rows


def _num(row, col, lineno, cast=float):
    try:
        v = cast(row[col])
    except ValueError:
        raise DataError(f"line {lineno}: {col} is not a number: {row[col]!r}") from None
    if isinstance(v, float) and not math.isfinite(v):
        raise DataError(f"line {lineno}: {col} is not finite")
    return v


@dataclass
class Membership:
    actor: str
    hyperedge: str
    position: int
    corresponding: bool


def load_memberships(src) -> list[Membership]:
    out = []
    for ln, row in _read_rows(src, ("actor", "hyperedge", "position", "corresponding")):
        pos = _num(row, "position", ln, int)
        if pos < 1:
            raise DataError(f"line {ln}: position must be >= 1")
        flag = row["corresponding"].lower()
        if flag not in ("0", "1", "true", "false", "yes", "no"):
            raise DataError(f"line {ln}: corresponding must be a boolean")
        out.append(Membership(row["actor"], row["hyperedge"], pos, flag in ("1", "true", "yes")))
    by_edge = defaultdict(list)
    for m in out:
        by_edge[m.hyperedge].append(m.position)
    for h, pos in by_edge.items():
        if sorted(pos) != list(range(1, len(pos) + 1)):
            raise DataError(f"hyperedge {h}: positions must be distinct and contiguous from 1")
    return out


@dataclass
class Endowments:
    total: dict[str, float]
    alloc: dict[tuple[str, str], float] = field(default_factory=dict)


def load_endowments(src) -> Endowments:
    total, alloc = {}, {}
    for ln, row in _read_rows(src, ("actor", "total"), ("hyperedge", "allocation")):
        a = row["actor"]
        t = _num(row, "total", ln)
        if t < 0:
            raise DataError(f"line {ln}: negative total")
        if a in total and total[a] != t:
            raise DataError(f"line {ln}: conflicting total for {a}")
        total[a] = t
        h, v = row.get("hyperedge", ""), row.get("allocation", "")
        if bool(h) != bool(v):
            raise DataError(f"line {ln}: hyperedge and allocation must both be given or both empty")
        if h:
            x = _num(row, "allocation", ln)
            if x < 0:
                raise DataError(f"line {ln}: negative allocation")
            alloc[(a, h)] = alloc.get((a, h), 0.0) + x
    spent = defaultdict(float)
    for (a, _), x in alloc.items():
        spent[a] += x
    for a, s in spent.items():
        if s > total[a] * (1 + 1e-9) + 1e-300:
            raise DataError(f"allocations of {a} exceed its total ({s} > {total[a]})")
    return Endowments(total, alloc)


@dataclass
class Attributes:
    income_class: str
    gdp: float
    assistance: float
    productivity: float


def load_attributes(src) -> dict[str, Attributes]:
    out = {}
    for ln, row in _read_rows(src, ("actor", "income_class", "gdp", "assistance", "productivity")):
        cls = row["income_class"].lower()
        if cls not in GDP_RATES:
            raise DataError(f"line {ln}: unknown income class {row['income_class']!r}")
        out[row["actor"]] = Attributes(cls, _num(row, "gdp", ln), _num(row, "assistance", ln),
                                       _num(row, "productivity", ln))
    return out


def hypergraph_from_pairs(pairs, size: int | None = None):
    """Build a uniform hypergraph from (actor, hyperedge) pairs.

    Hyperedges whose size differs from ``size`` (default: the most common
    size) are dropped. Node and hyperedge labels are sorted.
    """
    members = defaultdict(list)
    for a, h in pairs:
        if a not in members[h]:
            members[h].append(a)
    sizes = [len(v) for v in members.values()]
    if not sizes:
        raise DataError("no hyperedges")
    if size is None:
        vals, counts = np.unique(sizes, return_counts=True)
        size = int(vals[np.argmax(counts)])
    kept = sorted(h for h, v in members.items() if len(v) == size)
    if not kept:
        raise DataError(f"no hyperedges of size {size}")
    index = {a: i for i, a in enumerate(sorted({a for h in kept for a in members[h]}))}
    edges = np.array([[index[a] for a in members[h]] for h in kept])
    return Hypergraph(len(index), edges, tuple(index), tuple(kept))


# -- report --

@dataclass
class Report:
    groups: list[tuple[str, float | None, int]]
    summary: dict

    def groups_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "mean", "count"])
        for g, m, c in self.groups:
            w.writerow([g, "" if m is None else repr(float(m)), c])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True)


def degree_endowment_correlation(pairs, totals: dict[str, float]) -> tuple[float, list, list]:
    """Pearson rho between hyperedge count and total endowment over actors with a total."""
    deg = defaultdict(set)
    for a, h in pairs:
        deg[a].add(h)
    actors = sorted(a for a in totals if a in deg)
    xs = [len(deg[a]) for a in actors]
    ys = [totals[a] for a in actors]
    return pearson(xs, ys), xs, ys


def authorship_pipeline(memberships: list[Membership], endowments: Endowments | None = None,
                        focal=None, n_focal: int = 3, band_cut: float = 50.0,
                        weighting: str = "edge") -> Report:
    """Degree-band analysis on a co-authorship table.

    The focal author's score for a paper is its authorship weight; co-author
    hyperdegrees are averaged with their authorship weights (normalised per
    paper when ``weighting == 'edge'``, unweighted when ``'none'``). Sizes are
    not filtered here: hyperdegree counts every paper.
    """
    if weighting not in ("edge", "none"):
        raise ValueError("weighting must be 'edge' or 'none'")
    papers = defaultdict(list)
    for m in memberships:
        papers[m.hyperedge].append(m)
    deg = defaultdict(int)
    for m in memberships:
        deg[m.actor] += 1
    if focal is None:
        focal = sorted(deg, key=lambda a: (-deg[a], a))[:n_focal]
    groups, summary = [], {"band_cut": band_cut, "weighting": weighting, "focal": list(focal)}
    all_low, all_high = [], []
    for f in focal:
        low, high = [], []
        for h in sorted(papers):
            auth = papers[h]
            me = [m for m in auth if m.actor == f]
            if not me:
                continue
            others = [m for m in auth if m.actor != f]
            if not others:
                continue
            w = np.array([authorship_weight(m.position, m.corresponding) for m in others])
            if weighting == "none":
                w = np.ones_like(w)
            kk = np.array([deg[m.actor] for m in others], dtype=float)
            mean_k = float(w @ kk / w.sum())
            score = authorship_weight(me[0].position, me[0].corresponding)
            (low if mean_k < band_cut else high).append(score)
        groups += [(f"{f}:low", float(np.mean(low)) if low else None, len(low)),
                   (f"{f}:high", float(np.mean(high)) if high else None, len(high))]
        all_low += low
        all_high += high
    groups += [("all:low", float(np.mean(all_low)) if all_low else None, len(all_low)),
               ("all:high", float(np.mean(all_high)) if all_high else None, len(all_high))]
    if endowments is not None:
        rho, xs, _ = degree_endowment_correlation(
            [(m.actor, m.hyperedge) for m in memberships], endowments.total)
        summary["rho"] = rho
        summary["n_actors"] = len(xs)
    return Report(groups, summary)


def rescale_productivity(values, sigma: int, margin: float | None = None):
    """Affine map of raw scores into [1 + m, sigma - m]; returns (r, params)."""
    v = np.asarray(values, dtype=float)
    m = 0.05 * (sigma - 1) if margin is None else margin
    lo_t, hi_t = 1.0 + m, sigma - m
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        r = np.full_like(v, 0.5 * (lo_t + hi_t))
        scale = 0.0
    else:
        scale = (hi_t - lo_t) / (hi - lo)
        r = lo_t + (v - lo) * scale
    return r, {"source_min": lo, "source_max": hi, "target_min": lo_t,
               "target_max": hi_t, "scale": scale}


def allocation_pipeline(endowments: Endowments, attributes: dict[str, Attributes] | None = None,
                        use_gdp: bool = False, band_cut: float = 8.0, min_degree: int = 1,
                        size: int | None = None, productivity: float | None = None) -> Report:
    """Degree-band analysis on an allocation table.

    Contribution scores are allocation / total for every actor with more
    than ``min_degree`` hyperedges, grouped by the plain mean hyperdegree of
    the co-members. delta* is evaluated on the uniform sub-hypergraph of the
    requested ``size`` with normalised endowments and contributions.
    """
    totals = dict(endowments.total)
    if use_gdp:
        if attributes is None:
            raise ValueError("use_gdp needs an attributes table")
        for a in totals:
            if a not in attributes:
                raise DataError(f"no attributes for actor {a}")
            at = attributes[a]
            totals[a] = gdp_based_endowment(at.income_class, at.gdp, at.assistance)
    pairs = sorted(endowments.alloc)
    H = hypergraph_from_pairs(pairs, size)
    labels, elabels = H.labels, H.edge_labels

    # scores on the full (non-uniform) membership
    members = defaultdict(set)
    for a, h in pairs:
        members[h].add(a)
    deg = defaultdict(int)
    for a, h in pairs:
        deg[a] += 1
    raw_total = endowments.total
    low, high = [], []
    for a in sorted(deg):
        if deg[a] <= min_degree or raw_total[a] <= 0:
            continue
        for (b, h) in pairs:
            if b != a:
                continue
            co = [deg[c] for c in members[h] if c != a]
            if not co:
                continue
            s = contribution_score(endowments.alloc[(a, h)], raw_total[a])
            (low if np.mean(co) < band_cut else high).append(s)
    groups = [("low", float(np.mean(low)) if low else None, len(low)),
              ("high", float(np.mean(high)) if high else None, len(high))]

    rho, _, _ = degree_endowment_correlation(pairs, totals)
    summary = {"rho": rho, "band_cut": band_cut, "min_degree": min_degree,
               "sigma": H.sigma, "N": H.N, "M": H.M}

    e = np.array([totals.get(a, 0.0) for a in labels])
    if e.sum() > 0:
        e = e / e.sum()
        if productivity is not None:
            r = np.full(H.N, float(productivity))
            summary["productivity"] = {"constant": float(productivity)}
        else:
            if attributes is None:
                raise ValueError("need attributes or a constant productivity")
            r, params = rescale_productivity([attributes[a].productivity for a in labels], H.sigma)
            summary["productivity"] = params
        vals = np.zeros(H.edges.shape)
        for k in range(H.M):
            for c, j in enumerate(H.edges[k]):
                vals[k, c] = endowments.alloc.get((labels[j], elabels[k]), 0.0)
        rs = np.bincount(H.edges.ravel(), weights=vals.ravel(), minlength=H.N)
        for j in np.flatnonzero(rs <= 0):
            for k in H.node_edges[j]:
                vals[k, H.edges[k] == j] = 1.0 / H.degrees[j]
        rs = np.bincount(H.edges.ravel(), weights=vals.ravel(), minlength=H.N)
        vals = vals / rs[H.edges]
        x = ContributionMatrix(H, vals)
        d = delta_star(H, e, r, x)
        summary["delta_star"] = d if math.isfinite(d) else "inf"
        summary["n_infinite_nodes"] = int(np.isinf(node_thresholds(H, e, r, x)).sum())
    return Report(groups, summary)


# -- shipped fixtures --

def fixture_path(name: str):
    return resources.files("hypercoop") / "data" / name


def read_fixture(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")
