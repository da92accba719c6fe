"""Introspection dynamics over pure contribution states.

Each player either withholds everything or puts its whole endowment into one
of its hyperedges, so player i has k_i + 1 options and the chain has
prod_i (k_i + 1) states, enumerated in mixed-radix order with player 0 the
fastest digit.

Per step one player is picked uniformly, considers one of its other options
uniformly, and adopts it with probability ``logistic(beta * gain)``; with
probability ``eps`` that decision is inverted. The discounted state
distribution is ``v = (1 - delta) v0 (I - delta P)^-1``.

The exact update rule behind the original analysis is not published in the
main text; the logistic/inversion rule here is one reading and can be
swapped through ``adoption``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .hypergraph import Hypergraph

MAX_STATES = 10**6
DENSE_LIMIT = 4096
FIXED_POINT_TOL = 1e-10

PayoffFn = Callable[[Hypergraph, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class StateSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class StrategySpace:
    H: Hypergraph
    radices: np.ndarray
    strides: np.ndarray

    @property
    def size(self) -> int:
        return int(np.prod(self.radices))

    def options(self, i: int) -> list[int | None]:
        """Option 0 is 'withhold'; option o >= 1 is the o-th incident hyperedge."""
        return [None] + [int(k) for k in self.H.node_edges[i]]

    def digits(self) -> np.ndarray:
        """(S, N) option index of every player in every state."""
        idx = np.arange(self.size)[:, None]
        return (idx // self.strides[None, :]) % self.radices[None, :]

    def choices(self) -> np.ndarray:
        """(S, N) hyperedge each player funds in each state, -1 for none."""
        d = self.digits()
        out = np.full(d.shape, -1, dtype=np.int64)
        for i, edges in enumerate(self.H.node_edges):
            sel = d[:, i] > 0
            out[sel, i] = np.asarray(edges)[d[sel, i] - 1]
        return out

    def state_index(self, digits) -> int:
        return int(np.dot(np.asarray(digits), self.strides))

    def contribution_matrix(self, state: int) -> np.ndarray:
        """Dense N x M 0/1 matrix of one state."""
        ch = self.choices()[state] if self.size <= DENSE_LIMIT else \
            self._choices_one(state)
        x = np.zeros((self.H.N, self.H.M))
        funded = ch >= 0
        x[np.flatnonzero(funded), ch[funded]] = 1.0
        return x

    def _choices_one(self, state):
        d = (state // self.strides) % self.radices
        return np.array([self.H.node_edges[i][d[i] - 1] if d[i] else -1
                         for i in range(self.H.N)])


def build_state_space(H: Hypergraph, max_states: int = MAX_STATES) -> StrategySpace:
    radices = np.asarray(H.degrees, dtype=np.int64) + 1
    size = 1
    for r in radices:
        size *= int(r)
        if size > max_states:
            raise StateSpaceTooLarge(
                f"state space exceeds {max_states} states; instance too large for an exact chain")
    strides = np.r_[1, np.cumprod(radices)[:-1]].astype(np.int64)
    return StrategySpace(H, radices, strides)


def linear_state_payoffs(H: Hypergraph, e, r, choices) -> np.ndarray:
    """(S, N) payoffs for pure states given as funded-hyperedge indices (-1 = none)."""
    e = np.asarray(e, dtype=float)
    re = np.asarray(r, dtype=float) * e
    S, N = choices.shape
    pools = np.zeros((S, H.M))
    srow, pl = np.nonzero(choices >= 0)
    np.add.at(pools, (srow, choices[srow, pl]), re[pl])
    A = H.incidence()
    return pools @ A.T / H.sigma + (choices < 0) * e[None, :]


def logistic_adoption(gain: np.ndarray, beta: float, eps: float) -> np.ndarray:
    phi = expit(beta * gain)
    return (1.0 - eps) * phi + eps * (1.0 - phi)


@dataclass(frozen=True)
class EvolutionParams:
    beta: float = 1.0
    eps: float = 0.0
    delta: float = 0.9
    v0: np.ndarray | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if self.v0 is not None and abs(np.sum(self.v0) - 1) > 1e-12:
            raise ValueError("v0 must sum to 1")

    def initial(self, size: int) -> np.ndarray:
        if self.v0 is None:
            return np.full(size, 1.0 / size)
        v0 = np.asarray(self.v0, dtype=float)
        if len(v0) != size:
            raise ValueError(f"v0 has length {len(v0)}, expected {size}")
        return v0


def build_transition_matrix(H: Hypergraph, S: StrategySpace, e, r, params: EvolutionParams,
                            payoff_fn: PayoffFn = linear_state_payoffs,
                            adoption=logistic_adoption):
    """Row-stochastic P; dense for small chains, CSR otherwise."""
    choices = S.choices()
    u = payoff_fn(H, np.asarray(e, float), np.asarray(r, float), choices)
    digits = S.digits()
    n_states = S.size
    rows, cols, vals = [], [], []
    for i in range(H.N):
        k = int(S.radices[i]) - 1
        if k == 0:
            continue
        for o in range(k + 1):
            cur = digits[:, i]
            sel = np.flatnonzero(cur != o)
            tgt = sel + (o - cur[sel]) * S.strides[i]
            gain = u[tgt, i] - u[sel, i]
            p = adoption(gain, params.beta, params.eps) / (H.N * k)
            rows.append(sel)
            cols.append(tgt)
            vals.append(p)
    rows = np.concatenate(rows) if rows else np.zeros(0, int)
    cols = np.concatenate(cols) if cols else np.zeros(0, int)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    off = np.bincount(rows, weights=vals, minlength=n_states)
    diag = np.arange(n_states)
    rows = np.r_[rows, diag]
    cols = np.r_[cols, diag]
    vals = np.r_[vals, 1.0 - off]
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    return P.toarray() if n_states <= DENSE_LIMIT else P


def steady_state(P, params: EvolutionParams) -> np.ndarray:
    """Solve v (I - delta P) = (1 - delta) v0 for the discounted distribution."""
    n = P.shape[0]
    d = params.delta
    v0 = params.initial(n)
    if not sp.issparse(P):
        return np.linalg.solve((np.eye(n) - d * P).T, (1.0 - d) * v0)
    v = v0.copy()
    PT = P.T.tocsr()
    for _ in range(100_000):
        nxt = (1.0 - d) * v0 + d * (PT @ v)
        if np.abs(nxt - v).max() <= FIXED_POINT_TOL * (1.0 - d):
            return nxt
        v = nxt
    raise RuntimeError("fixed-point iteration did not converge")


def expected_total_payoff(S: StrategySpace, v, e, r,
                          payoff_fn: PayoffFn = linear_state_payoffs) -> float:
    u = payoff_fn(S.H, np.asarray(e, float), np.asarray(r, float), S.choices())
    return float(np.dot(v, u.sum(axis=1)))


@dataclass
class ChainReport:
    state_count: int
    params: EvolutionParams
    v: np.ndarray
    total_payoff: float
    residual: float

    def to_json(self, floor: float = 1e-12) -> str:
        nz = np.flatnonzero(self.v >= floor)
        return json.dumps({
            "state_count": self.state_count,
            "params": {"beta": self.params.beta, "eps": self.params.eps,
                       "delta": self.params.delta},
            "update_rule": "logistic adoption with inversion error (interpretive)",
            "v": {str(int(s)): float(self.v[s]) for s in nz},
            "Pi_total": self.total_payoff,
            "residual": self.residual,
        }, indent=2)


def run_chain(H: Hypergraph, e, r, params: EvolutionParams, **kw) -> ChainReport:
    S = build_state_space(H)
    P = build_transition_matrix(H, S, e, r, params, **kw)
    v = steady_state(P, params)
    lhs = v - params.delta * (P.T @ v)
    res = float(np.abs(lhs - (1 - params.delta) * params.initial(S.size)).max())
    pf = kw.get("payoff_fn", linear_state_payoffs)
    return ChainReport(S.size, params, v, expected_total_payoff(S, v, e, r, pf), res)


def biased_endowments(n: int, favoured, bias: float = 1.0) -> np.ndarray:
    """Weight 1 + bias for the favoured players and 1 for the rest, normalised."""
    w = np.ones(n)
    w[list(favoured)] += bias
    return w / w.sum()


# endowment distributions compared in the robustness panels (0-based players)
BIAS_PRESETS = {
    "equal": (),
    "p1": (0,),
    "p2": (1,),
    "p1p2": (0, 1),
    "p1p4": (0, 3),
    "p2p3": (1, 2),
}


def robustness_sweep(H: Hypergraph, r, betas, epss, horizons,
                     presets=("equal",), bias: float = 1.0, **kw) -> list[dict]:
    """Pi_total over (preset, beta, eps, horizon) with delta = 1 - 1/horizon."""
    S = build_state_space(H)
    rows = []
    for name in presets:
        e = biased_endowments(H.N, BIAS_PRESETS[name], bias)
        for beta in betas:
            for eps in epss:
                for T in horizons:
                    if T < 1:
                        raise ValueError("horizon 1/(1-delta) must be >= 1")
                    p = EvolutionParams(beta=float(beta), eps=float(eps), delta=1.0 - 1.0 / T)
                    P = build_transition_matrix(H, S, e, r, p, **kw)
                    v = steady_state(P, p)
                    rows.append({"endowment": name, "beta": float(beta), "eps": float(eps),
                                 "horizon": float(T), "delta": p.delta,
                                 "Pi_total": expected_total_payoff(S, v, e, r, kw.get("payoff_fn", linear_state_payoffs))})
    return rows
