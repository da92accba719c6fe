"""Minimising the global threshold delta* over endowments or contributions.

Endowments: for a fixed level t the set ``{e in simplex : n_i e_i <= t (B e)_i}``
is a polytope, so ``min_e max_i delta_i*(e)`` is found by bisection on t with
a linear feasibility oracle.

Contributions: the numerators do not depend on X and the denominators are
linear in X, so ``max z  s.t.  D_i(X) >= z n_i`` is a single linear program
and the optimum is ``1/z*``. Optimal contribution matrices are rarely unique;
among them the Euclidean projection of equal contributions onto the optimal
face is returned (an L1 linear program stands in for large instances).

Both interventions for large hypergraphs (hyperdegree-based redistribution
and the small contribution nudge) live here as well.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, minimize

from .game import (THRESHOLD_TOL, ContributionMatrix, InvalidInstanceError, delta_star,
                   equal_contributions, equal_endowments)
from .hypergraph import Hypergraph
from .region import denominator_matrix

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


class OptimizationError(RuntimeError):
    def __init__(self, msg, bracket=None):
        super().__init__(msg)
        self.bracket = bracket


class StructuralInfeasibility(OptimizationError):
    """Some player can never be dissuaded from defecting."""


@dataclass
class OptimizationResult:
    delta_star_opt: float
    witness: object
    iterations: int
    gap: float
    bracket: tuple[float, float] = (0.0, 0.0)
    delta_star_baseline: float = float("nan")
    history: list = field(default_factory=list, repr=False)


def _numerators(H, r):
    return np.clip(H.sigma - np.asarray(r, dtype=float), 0.0, None)


# -- program 1: endowments --

def endowment_feasibility(n: np.ndarray, B: np.ndarray, t: float):
    """Find e on the simplex with n_i e_i <= t (B e)_i for all i, or report none.

    Solves ``min s  s.t.  (n_i e_i - t (B e)_i) / w_i <= s`` over the simplex.
    Returns ``(ok, e, s)`` where ``ok`` means ``s <= 0``; callers confirm by
    evaluating delta* at ``e`` directly.
    """
    N = len(n)
    C = np.diag(n) - t * B
    w = n + t * B.sum(axis=1)
    w[w <= 0] = 1.0
    C = C / w[:, None]
    # variables y = N*e (order 1), then s
    A_ub = np.hstack([C / N, -np.ones((N, 1))])
    A_eq = np.hstack([np.ones((1, N)), np.zeros((1, 1))])
    res = linprog(np.r_[np.zeros(N), 1.0], A_ub=A_ub, b_ub=np.zeros(N),
                  A_eq=A_eq, b_eq=[float(N)],
                  bounds=[(0, None)] * N + [(None, None)], method="highs")
    if res.status != 0:
        raise OptimizationError(f"feasibility LP failed at t={t}: {res.message}")
    e = np.clip(res.x[:N], 0.0, None)
    e /= e.sum()
    return res.fun <= 0.0, e, float(res.fun)


def optimize_endowments(H: Hypergraph, r, x: ContributionMatrix,
                        tolerance: float = DEFAULT_TOL, max_iter: int = 200) -> OptimizationResult:
    """Minimise max_i delta_i*(e) over the endowment simplex for fixed r and X."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if not x.is_full_cooperation():
        raise InvalidInstanceError("optimize_endowments needs a full-cooperation matrix")
    r = np.asarray(r, dtype=float)
    n = _numerators(H, r)
    B = denominator_matrix(H, r, x)
    e_eq = equal_endowments(H.N)
    base = delta_star(H, e_eq, r, x)
    best_e, high = e_eq, base
    hist = []

    if not np.isfinite(high):
        t = 1.0
        while True:
            ok, e, _ = endowment_feasibility(n, B, t)
            hist.append((t, ok))
            d = delta_star(H, e, r, x)
            if ok and np.isfinite(d):
                best_e, high = e, d
                break
            t *= 2.0
            if t > 1e12:
                raise StructuralInfeasibility("no endowment vector gives a finite delta*",
                                              (0.0, np.inf))
    low = 0.0
    ok0, e0, _ = endowment_feasibility(n, B, 0.0)
    if ok0 and delta_star(H, e0, r, x) == 0.0:
        return OptimizationResult(0.0, e0, 1, 0.0, (0.0, 0.0), base, [(0.0, True)])

    it = 0
    while high - low > tolerance:
        if it >= max_iter:
            raise OptimizationError("bisection did not converge", (low, high))
        it += 1
        mid = 0.5 * (low + high)
        ok, e, s = endowment_feasibility(n, B, mid)
        hist.append((mid, ok))
        d = delta_star(H, e, r, x)
        if ok and d <= mid + tolerance:
            best_e = e
            high = min(mid, d) if d < high else mid
        else:
            low = mid
    return OptimizationResult(high, best_e, it, high - low, (low, high), base, hist)


# -- program 2: contributions --

def _incidence_operator(H: Hypergraph, e, r):
    """Sparse G with D = G @ vec(x_values); also the row-sum operator R."""
    re = np.asarray(r, dtype=float) * np.asarray(e, dtype=float)
    M, s = H.edges.shape
    rows, cols, vals = [], [], []
    var = np.arange(M * s).reshape(M, s)
    for a in range(s):
        for b in range(s):
            if a != b:
                rows.append(H.edges[:, a])
                cols.append(var[:, b])
                vals.append(re[H.edges[:, b]])
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(H.N, M * s))
    R = sp.csr_matrix((np.ones(M * s), (H.edges.ravel(), var.ravel())), shape=(H.N, M * s))
    return G, R


def contribution_feasibility(H: Hypergraph, r, e, t: float):
    """Is there a full-cooperation X with (sigma - r_i) e_i <= t D_i(X) for all i?"""
    n = _numerators(H, r) * np.asarray(e, dtype=float)
    G, R = _incidence_operator(H, e, r)
    act = n > 0
    nv = G.shape[1]
    A_ub = sp.hstack([-t * (sp.diags(1.0 / n[act]) @ G[act]),
                      -sp.csr_matrix(np.ones((act.sum(), 1)))])
    res = linprog(np.r_[np.zeros(nv), 1.0], A_ub=A_ub.tocsr(), b_ub=-np.ones(act.sum()),
                  A_eq=sp.hstack([R, sp.csr_matrix((H.N, 1))]).tocsr(), b_eq=np.ones(H.N),
                  bounds=[(0, 1)] * nv + [(0, None)], method="highs")
    if res.status != 0:
        raise OptimizationError(f"feasibility LP failed at t={t}: {res.message}")
    x = _renormalize(H, res.x[:nv].reshape(H.edges.shape))
    # a feasible verdict must come with a witness that meets the level exactly
    ok = res.fun <= 1e-10 and delta_star(H, e, r, x) <= t + THRESHOLD_TOL
    return ok, x


def _renormalize(H: Hypergraph, xv: np.ndarray) -> ContributionMatrix:
    xv = np.clip(xv, 0.0, 1.0)
    rows = np.bincount(H.edges.ravel(), weights=xv.ravel(), minlength=H.N)
    return ContributionMatrix(H, xv / rows[H.edges])


QP_MAX_VARS = 600


def _project_on_face(Gs, R, xe, z_floor, x0):
    """Euclidean projection of ``xe`` onto {Gs x >= z_floor, R x = 1, 0 <= x <= 1}."""
    cons = [LinearConstraint(Gs, z_floor, np.inf), LinearConstraint(R, 1.0, 1.0)]
    res = minimize(lambda v: 0.5 * np.dot(v - xe, v - xe), x0, jac=lambda v: v - xe,
                   bounds=Bounds(0.0, 1.0), constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 500})
    if not res.success:
        log.debug("projection failed: %s", res.message)
        return None
    return res.x


def _l1_on_face(Ga, na, R, xe, z_floor, nv):
    I = sp.identity(nv, format="csr")
    A = sp.vstack([
        sp.hstack([-sp.diags(1.0 / na) @ Ga, sp.csr_matrix((len(na), nv))]),
        sp.hstack([I, -I]),
        sp.hstack([-I, -I]),
    ]).tocsr()
    b = np.r_[-z_floor * np.ones(len(na)), xe, -xe]
    res = linprog(np.r_[np.zeros(nv), np.ones(nv)], A_ub=A, b_ub=b,
                  A_eq=sp.hstack([R, sp.csr_matrix((R.shape[0], nv))]).tocsr(),
                  b_eq=np.ones(R.shape[0]), bounds=[(0, 1)] * nv + [(0, None)] * nv,
                  method="highs")
    return res.x[:nv] if res.status == 0 else None


def optimize_contributions(H: Hypergraph, r, e, tolerance: float = DEFAULT_TOL) -> OptimizationResult:
    """Minimise max_i delta_i*(X) over full-cooperation contribution matrices."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if len(H.isolated):
        raise InvalidInstanceError(f"isolated node {H.isolated[0]}")
    r = np.asarray(r, dtype=float)
    e = np.asarray(e, dtype=float)
    n = _numerators(H, r) * e
    x_eq = equal_contributions(H)
    base = delta_star(H, e, r, x_eq)
    act = n > 0
    if not act.any():
        return OptimizationResult(0.0, x_eq, 0, 0.0, (0.0, 0.0), base)

    G, R = _incidence_operator(H, e, r)
    reach = np.asarray(G.max(axis=1).todense()).ravel()
    stuck = np.flatnonzero(act & (reach <= 0))
    if len(stuck):
        raise StructuralInfeasibility(
            f"player {stuck[0]} has a positive deviation gain but no co-member "
            f"with positive endowment", (np.inf, np.inf))

    nv = G.shape[1]
    Ga = G[act]
    na = n[act]
    A_eq = sp.hstack([R, sp.csr_matrix((H.N, 1))]).tocsr()
    bounds = [(0, 1)] * nv
    # stage 1: max z  s.t.  z n_i - D_i(X) <= 0   (rows scaled by n_i)
    A1 = sp.hstack([-sp.diags(1.0 / na) @ Ga, sp.csr_matrix(np.ones((len(na), 1)))]).tocsr()
    res = linprog(np.r_[np.zeros(nv), -1.0], A_ub=A1, b_ub=np.zeros(len(na)),
                  A_eq=A_eq, b_eq=np.ones(H.N), bounds=bounds + [(0, None)], method="highs")
    if res.status != 0:
        raise OptimizationError(f"contribution LP failed: {res.message}")
    z = -res.fun
    if z <= 0:
        raise StructuralInfeasibility("no contribution matrix gives a finite delta*")

    # stage 2: the optimal face is usually not a single point; pick the member
    # closest to equal contributions
    z_floor = z * (1.0 - 1e-10)
    xe = x_eq.values.ravel()
    xv = None
    if nv <= QP_MAX_VARS:
        xv = _project_on_face(Ga.toarray() / na[:, None], R.toarray(), xe, z_floor, res.x[:nv])
    if xv is None:
        xv = _l1_on_face(Ga, na, R, xe, z_floor, nv)
    if xv is None:
        xv = res.x[:nv]
    witness = _renormalize(H, xv.reshape(H.edges.shape))
    d = delta_star(H, e, r, witness)
    if d > base:
        witness, d = x_eq, base

    # certificate: nothing below d - tolerance is attainable
    it = 2
    for _ in range(50):
        low = max(0.0, d - tolerance)
        it += 1
        ok, xw = contribution_feasibility(H, r, e, low)
        if not ok or low == 0.0:
            break
        witness, d = xw, delta_star(H, e, r, xw)
    else:
        raise OptimizationError("could not certify the contribution optimum", (low, d))
    return OptimizationResult(d, witness, it, d - low, (low, d), base)


# -- interventions --

@dataclass(frozen=True)
class InterventionConfig:
    low_quantile: float = 0.25
    low_share: float = 0.10
    nudge: float = 1e-4
    iterate: bool = False
    max_passes: int = 1000

    def __post_init__(self):
        if not 0 < self.low_quantile < 1:
            raise ValueError("low_quantile must lie in (0, 1)")
        if not 0 <= self.low_share <= 1:
            raise ValueError("low_share must lie in [0, 1]")
        if self.nudge < 0:
            raise ValueError("nudge must be >= 0")


def redistribute_endowments(H: Hypergraph, cfg: InterventionConfig = InterventionConfig()) -> np.ndarray:
    """Give the lowest-hyperdegree quantile a fixed share of the total, split evenly.

    Nodes are ordered by (hyperdegree, node id); the first floor(q N) form the
    low group.
    """
    if H.N < 2:
        raise ValueError("need at least two nodes")
    order = np.lexsort((np.arange(H.N), H.degrees))
    n_low = int(np.floor(cfg.low_quantile * H.N))
    if n_low == 0 or n_low == H.N:
        warnings.warn("empty endowment group; falling back to equal endowments", stacklevel=2)
        return equal_endowments(H.N)
    e = np.empty(H.N)
    e[order[:n_low]] = cfg.low_share / n_low
    e[order[n_low:]] = (1.0 - cfg.low_share) / (H.N - n_low)
    return e


def co_member_degree(H: Hypergraph) -> np.ndarray:
    """(M, sigma) array: mean hyperdegree of the other members, per incidence."""
    k = H.degrees.astype(float)
    tot = k[H.edges].sum(axis=1)
    return (tot[:, None] - k[H.edges]) / (H.sigma - 1)


def nudge_contributions(H: Hypergraph, x: ContributionMatrix, delta: float = 1e-4) -> ContributionMatrix:
    """Shift ``delta`` of each player's contribution toward its lowest-degree hyperedge.

    Every player with k_i >= 2 ranks its hyperedges by the mean hyperdegree of
    the co-members (ties by hyperedge id), adds ``delta`` to the lowest-ranked
    one and removes it from the highest-ranked one. Players whose extremes tie,
    or whose entries would leave [0, 1], are left unchanged.
    """
    if not x.is_full_cooperation():
        raise InvalidInstanceError("nudge_contributions needs a full-cooperation matrix")
    M, s = H.edges.shape
    node = H.edges.ravel()
    edge = np.repeat(np.arange(M), s)
    co = co_member_degree(H).ravel()
    order = np.lexsort((edge, co, node))
    node_sorted = node[order]
    starts = np.flatnonzero(np.r_[True, node_sorted[1:] != node_sorted[:-1]])
    ends = np.r_[starts[1:], len(order)] - 1
    lo, hi = order[starts], order[ends]
    players = node_sorted[starts]
    flat = x.values.ravel().copy()
    movable = (H.degrees[players] >= 2) & (co[lo] < co[hi])
    movable &= (flat[lo] + delta <= 1.0) & (flat[hi] - delta >= 0.0)
    flat[lo[movable]] += delta
    flat[hi[movable]] -= delta
    return ContributionMatrix(H, flat.reshape(M, s))


@dataclass
class InterventionOutcome:
    baseline: float
    redistribution: float
    nudge: float
    combined: float

    def lowered(self, tol: float = THRESHOLD_TOL) -> dict[str, bool]:
        return {k: getattr(self, k) < self.baseline - tol
                for k in ("redistribution", "nudge", "combined")}


def apply_interventions(H: Hypergraph, r, cfg: InterventionConfig = InterventionConfig()) -> InterventionOutcome:
    """delta* at baseline (equal e, equal X) and after each intervention.

    The combined variant redistributes endowments first and then nudges
    contributions.
    """
    r = np.asarray(r, dtype=float)
    x0 = equal_contributions(H)
    e0 = equal_endowments(H.N)
    e1 = redistribute_endowments(H, cfg)
    if cfg.iterate:
        nudge = _nudge_until_flat(H, e0, r, x0, cfg)
        combined = _nudge_until_flat(H, e1, r, x0, cfg)
    else:
        x1 = nudge_contributions(H, x0, cfg.nudge)
        nudge = delta_star(H, e0, r, x1)
        combined = delta_star(H, e1, r, x1)
    return InterventionOutcome(
        baseline=delta_star(H, e0, r, x0),
        redistribution=delta_star(H, e1, r, x0),
        nudge=nudge,
        combined=combined,
    )


def _nudge_until_flat(H, e, r, x, cfg: InterventionConfig) -> float:
    # repeat single passes while delta* strictly drops
    best = delta_star(H, e, r, x)
    for _ in range(cfg.max_passes):
        x = nudge_contributions(H, x, cfg.nudge)
        d = delta_star(H, e, r, x)
        if not d < best - THRESHOLD_TOL:
            break
        best = d
    return best
