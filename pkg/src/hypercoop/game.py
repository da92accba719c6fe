"""Linear public goods games on a hypergraph.

Payoff of player i for endowments e, productivities r and contributions X::

    u_i = sum_k a_ik / sigma * sum_j r_j x_jk e_j + (1 - sum_k x_ik) e_i

Under full cooperation (every row of X sums to 1) the Grim profile is a
subgame perfect equilibrium iff, for every player with e_i > 0,

    delta >= delta_i* = (sigma - r_i) e_i / D_i,
    D_i = sum_k a_ik sum_{j != i} r_j x_jk e_j.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hypergraph import Hypergraph

SIMPLEX_TOL = 1e-12
ROW_TOL = 1e-12
THRESHOLD_TOL = 1e-12


class InvalidInstanceError(ValueError):
    pass


class ContributionMatrix:
    """Contribution fractions stored per incidence.

    ``values[k, m]`` is the fraction that node ``H.edges[k, m]`` sends to
    hyperedge ``k``. Entries off the incidence cannot be represented, so the
    support constraint holds by construction.
    """

    __slots__ = ("H", "values")

    def __init__(self, H: Hypergraph, values):
        values = np.array(values, dtype=float)
        if values.shape != H.edges.shape:
            raise ValueError(f"values shape {values.shape} != edges shape {H.edges.shape}")
        self.H = H
        self.values = values

    @classmethod
    def from_dense(cls, H: Hypergraph, x, atol: float = 0.0) -> "ContributionMatrix":
        x = np.asarray(x, dtype=float)
        if x.shape != (H.N, H.M):
            raise ValueError(f"dense matrix must be {(H.N, H.M)}, got {x.shape}")
        vals = x[H.edges, np.arange(H.M)[:, None]]
        off = x.copy()
        off[H.edges, np.arange(H.M)[:, None]] = 0.0
        bad = np.argwhere(np.abs(off) > atol)
        if len(bad):
            i, k = bad[0]
            raise InvalidInstanceError(
                f"contribution on non-incident pair (node {i}, hyperedge {k})")
        return cls(H, vals)

    @classmethod
    def from_triplets(cls, H: Hypergraph, triplets) -> "ContributionMatrix":
        """Build from ``(node, hyperedge, value)`` triples; unspecified entries are 0."""
        vals = np.zeros(H.edges.shape)
        for i, k, v in triplets:
            i, k = int(i), int(k)
            if not 0 <= k < H.M:
                raise InvalidInstanceError(f"hyperedge {k} out of range")
            pos = np.flatnonzero(H.edges[k] == i)
            if len(pos) == 0:
                raise InvalidInstanceError(
                    f"contribution on non-incident pair (node {i}, hyperedge {k})")
            vals[k, pos[0]] = float(v)
        return cls(H, vals)

    def to_dense(self) -> np.ndarray:
        x = np.zeros((self.H.N, self.H.M))
        x[self.H.edges, np.arange(self.H.M)[:, None]] = self.values
        return x

    def triplets(self):
        for k, row in enumerate(self.H.edges):
            for m, i in enumerate(row):
                yield int(i), k, float(self.values[k, m])

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.H.edges.ravel(), weights=self.values.ravel(),
                           minlength=self.H.N)

    def entry(self, i: int, k: int) -> float:
        pos = np.flatnonzero(self.H.edges[k] == i)
        return float(self.values[k, pos[0]]) if len(pos) else 0.0

    def copy(self) -> "ContributionMatrix":
        return ContributionMatrix(self.H, self.values.copy())

    def is_full_cooperation(self, tol: float = ROW_TOL) -> bool:
        return bool(np.all(np.abs(self.row_sums() - 1.0) <= tol))

    def __repr__(self):
        return f"ContributionMatrix({self.H!r})"


def equal_contributions(H: Hypergraph) -> ContributionMatrix:
    """Every node splits its endowment evenly: x_ik = 1/k_i."""
    if len(H.isolated):
        raise InvalidInstanceError(f"isolated node {H.isolated[0]} cannot contribute")
    return ContributionMatrix(H, 1.0 / H.degrees[H.edges])


def equal_endowments(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def check_endowments(e, n: int | None = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.ndim != 1 or (n is not None and len(e) != n):
        raise InvalidInstanceError(f"endowment vector must have length {n}")
    if np.any(~np.isfinite(e)) or np.any(e < 0) or np.any(e > 1):
        raise InvalidInstanceError("endowments must lie in [0, 1]")
    if abs(e.sum() - 1.0) > tol:
        raise InvalidInstanceError(f"endowments sum to {e.sum():.15g}, not 1")
    return e


def check_productivity(r, sigma: int, n: int | None = None, relaxed: bool = False) -> np.ndarray:
    """Broadcast r to a vector and enforce the social-dilemma range 1 < r_i < sigma."""
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        if n is None:
            raise ValueError("need n to broadcast a scalar productivity")
        r = np.full(n, float(r))
    if n is not None and len(r) != n:
        raise InvalidInstanceError(f"productivity vector must have length {n}")
    if np.any(r <= 0):
        raise InvalidInstanceError("productivities must be positive")
    outside = np.flatnonzero((r <= 1) | (r >= sigma))
    if len(outside):
        msg = (f"productivity r[{outside[0]}]={r[outside[0]]} outside the dilemma range "
               f"(1, {sigma})")
        if not relaxed:
            raise InvalidInstanceError(msg)
        warnings.warn(msg, stacklevel=2)
    return r


@dataclass
class GameInstance:
    H: Hypergraph
    e: np.ndarray
    r: np.ndarray
    x: ContributionMatrix
    delta: float = 1.0
    relaxed: bool = False

    def __post_init__(self):
        self.e = check_endowments(self.e, self.H.N)
        self.r = check_productivity(self.r, self.H.sigma, self.H.N, self.relaxed)
        if self.x.H is not self.H and not np.array_equal(self.x.H.edges, self.H.edges):
            raise InvalidInstanceError("contribution matrix built on a different hypergraph")
        v = self.x.values
        if np.any(v < 0) or np.any(v > 1):
            raise InvalidInstanceError("contributions must lie in [0, 1]")
        if np.any(self.x.row_sums() > 1 + ROW_TOL):
            raise InvalidInstanceError("a contribution row sums above 1")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidInstanceError("continuation probability must lie in [0, 1]")

    def require_full_cooperation(self):
        if not self.x.is_full_cooperation():
            rs = self.x.row_sums()
            i = int(np.argmax(np.abs(rs - 1.0)))
            raise InvalidInstanceError(
                f"not a full-cooperation profile: row {i} sums to {rs[i]:.15g}")


# -- payoffs --

def edge_pools(H: Hypergraph, e, r, xvals) -> np.ndarray:
    """c_k = sum_j r_j x_jk e_j for every hyperedge."""
    re = np.asarray(r) * np.asarray(e)
    return (re[H.edges] * xvals).sum(axis=1)


def payoffs(H: Hypergraph, e, r, x: ContributionMatrix) -> np.ndarray:
    """Payoff of every player (vectorised form of the linear payoff)."""
    e = np.asarray(e, dtype=float)
    pools = edge_pools(H, e, r, x.values)
    shared = np.bincount(H.edges.ravel(), weights=np.repeat(pools, H.sigma),
                         minlength=H.N) / H.sigma
    return shared + (1.0 - x.row_sums()) * e


def payoff(G: GameInstance, player: int) -> float:
    if not 0 <= player < G.H.N:
        raise IndexError(f"player {player} out of range [0, {G.H.N})")
    return float(payoffs(G.H, G.e, G.r, G.x)[player])


def deviation_payoffs(G: GameInstance, player: int) -> tuple[float, float, float]:
    """(u under X, u when only ``player`` withholds everything, u when all withhold)."""
    if not 0 <= player < G.H.N:
        raise IndexError(f"player {player} out of range [0, {G.H.N})")
    G.require_full_cooperation()
    u_full = payoffs(G.H, G.e, G.r, G.x)[player]
    solo = G.x.copy()
    solo.values[G.H.edges == player] = 0.0
    u_solo = payoffs(G.H, G.e, G.r, solo)[player]
    return float(u_full), float(u_solo), float(G.e[player])


# -- thresholds --

def denominators(H: Hypergraph, e, r, xvals) -> np.ndarray:
    """D_i = sum over i's hyperedges of what the other members put in (scaled by r)."""
    re = np.asarray(r, dtype=float) * np.asarray(e, dtype=float)
    own = re[H.edges] * xvals
    pools = own.sum(axis=1)
    return np.bincount(H.edges.ravel(), weights=(pools[:, None] - own).ravel(),
                       minlength=H.N)


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    safe = np.where(den > 0, den, 1.0)
    return np.where(num > 0, np.where(den > 0, num / safe, np.inf), 0.0)


def node_thresholds(H: Hypergraph, e, r, x: ContributionMatrix) -> np.ndarray:
    """delta_i* for every node.

    0 when the numerator vanishes (including when D_i = 0); +inf when the
    numerator is positive and D_i = 0. A negative ``sigma - r_i`` (only
    possible in relaxed mode) is clamped to 0.
    """
    e = np.asarray(e, dtype=float)
    num = np.clip(H.sigma - np.asarray(r, dtype=float), 0.0, None) * e
    return _ratio(num, denominators(H, e, r, x.values))


def delta_star(H: Hypergraph, e, r, x: ContributionMatrix) -> float:
    e = np.asarray(e, dtype=float)
    d = node_thresholds(H, e, r, x)
    pos = e > 0
    return float(d[pos].max()) if pos.any() else 0.0


def node_threshold(G: GameInstance, player: int) -> float:
    G.require_full_cooperation()
    if not 0 <= player < G.H.N:
        raise IndexError(f"player {player} out of range [0, {G.H.N})")
    return float(node_thresholds(G.H, G.e, G.r, G.x)[player])


@dataclass
class ThresholdReport:
    per_node: np.ndarray
    delta_star: float
    feasible: bool
    e: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    labels: tuple[str, ...] | None = field(default=None, repr=False)

    @property
    def feasibility(self) -> str:
        return "FeasibleBelowOne" if self.feasible else "Infeasible"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "e_i", "r_i", "k_i", "delta_i_star"])
        for i, d in enumerate(self.per_node):
            node = self.labels[i] if self.labels is not None else i
            w.writerow([node, repr(float(self.e[i])), repr(float(self.r[i])), int(self.k[i]),
                        "inf" if math.isinf(d) else repr(float(d))])
        return buf.getvalue()


def threshold_report(G: GameInstance) -> ThresholdReport:
    G.require_full_cooperation()
    per = node_thresholds(G.H, G.e, G.r, G.x)
    pos = G.e > 0
    ds = float(per[pos].max()) if pos.any() else 0.0
    return ThresholdReport(per, ds, ds <= 1.0 + THRESHOLD_TOL, G.e, G.r,
                           np.array(G.H.degrees), G.H.labels)


def grim_is_equilibrium(G: GameInstance, tol: float = THRESHOLD_TOL) -> bool:
    """Check the one-shot-deviation condition for every player with e_i > 0.

    delta * (u_solo - u_all_defect) >= u_solo - u_full, evaluated from the
    payoff function directly rather than from the threshold formula.
    """
    G.require_full_cooperation()
    u_full = payoffs(G.H, G.e, G.r, G.x)
    for i in np.flatnonzero(G.e > 0):
        solo = G.x.copy()
        solo.values[G.H.edges == i] = 0.0
        u_solo = payoffs(G.H, G.e, G.r, solo)[i]
        future_loss = u_solo - G.e[i]
        gain = u_solo - u_full[i]
        # tolerance is expressed on the delta scale
        if G.delta * future_loss < gain - tol * max(future_loss, 0.0):
            return False
    return True
