"""Monte Carlo estimates of the feasible share of the endowment simplex.

For fixed (H, r, X) the denominators are linear in e: ``D = B @ e`` with
``B_ij = r_j * sum_k a_ik x_jk`` for j != i. Each sampled endowment vector
therefore costs one small matrix product.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .game import (THRESHOLD_TOL, ContributionMatrix, InvalidInstanceError, _ratio,
                   equal_contributions)  # noqa: F401  (re-exported)
from .hypergraph import Hypergraph

DEFAULT_SAMPLES = 200_000
CHUNK = 20_000


@dataclass(frozen=True)
class SimplexSampler:
    N: int
    sample_count: int = DEFAULT_SAMPLES
    seed: int = 0
    chunk: int = CHUNK

    def chunks(self) -> Iterator[np.ndarray]:
        """Uniform points on the simplex, in chunks with per-chunk derived seeds."""
        if self.N < 1:
            raise ValueError("N must be >= 1")
        n_chunks = -(-self.sample_count // self.chunk)
        children = np.random.SeedSequence(self.seed).spawn(n_chunks)
        left = self.sample_count
        for ss in children:
            size = min(self.chunk, left)
            left -= size
            g = np.random.default_rng(ss).standard_exponential((size, self.N))
            yield g / g.sum(axis=1, keepdims=True)

    def sample(self) -> np.ndarray:
        return np.vstack(list(self.chunks()))


def sample_simplex(s: SimplexSampler) -> Iterator[np.ndarray]:
    """Stream of endowment vectors (one row each)."""
    for block in s.chunks():
        yield from block


def simplex_grid(N: int, step: float = 0.01) -> np.ndarray:
    """All barycentric grid points with spacing ``step`` (meant for N <= 4)."""
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-12:
        raise ValueError("1/step must be an integer")
    if N > 4:
        raise ValueError("grid mode is limited to N <= 4")
    pts = [c for c in itertools.product(range(n + 1), repeat=N - 1) if sum(c) <= n]
    pts = np.array([list(c) + [n - sum(c)] for c in pts], dtype=float)
    return pts / n


# -- contribution matrices --

@dataclass(frozen=True)
class BiasAssignment:
    primary_edge: Mapping[int, int]
    p: float


def biased_contributions(H: Hypergraph, b: BiasAssignment) -> ContributionMatrix:
    """Hyperdegree-2 nodes send p to their primary hyperedge and 1-p to the other."""
    if not 0.0 <= b.p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    vals = np.zeros(H.edges.shape)
    for i, edges in enumerate(H.node_edges):
        if len(edges) == 0:
            raise InvalidInstanceError(f"isolated node {i}")
        if len(edges) > 2:
            raise InvalidInstanceError(
                f"node {i} has hyperdegree {len(edges)}; supply an explicit matrix")
        if len(edges) == 1:
            vals[edges[0], H.edges[edges[0]] == i] = 1.0
            continue
        if i not in b.primary_edge:
            raise InvalidInstanceError(f"node {i} has hyperdegree 2 but no primary edge")
        prim = b.primary_edge[i]
        if prim not in edges:
            raise InvalidInstanceError(f"node {i} is not a member of hyperedge {prim}")
        other = edges[0] if edges[1] == prim else edges[1]
        vals[prim, H.edges[prim] == i] = b.p
        vals[other, H.edges[other] == i] = 1.0 - b.p
    return ContributionMatrix(H, vals)


def denominator_matrix(H: Hypergraph, r, x: ContributionMatrix) -> np.ndarray:
    """B with D(e) = B @ e; zero diagonal."""
    r = np.asarray(r, dtype=float)
    B = np.zeros((H.N, H.N))
    vals = x.values
    for a in range(H.sigma):
        for b in range(H.sigma):
            if a != b:
                # member a of edge k receives from member b
                np.add.at(B, (H.edges[:, a], H.edges[:, b]), vals[:, b])
    return B * r[None, :]


def thresholds_for_samples(H: Hypergraph, r, x: ContributionMatrix, E: np.ndarray,
                           B: np.ndarray | None = None) -> np.ndarray:
    """delta* for each row of E (same conventions as the game module)."""
    if B is None:
        B = denominator_matrix(H, r, x)
    num = np.clip(H.sigma - np.asarray(r, dtype=float), 0.0, None)[None, :] * E
    per = _ratio(num, E @ B.T)
    return per.max(axis=1)


@dataclass
class Proportion:
    estimate: float
    stderr: float
    samples: int


def _proportion(hits: int, n: int) -> Proportion:
    p = hits / n
    return Proportion(p, float(np.sqrt(p * (1 - p) / n)), n)


def feasible_proportion(H: Hypergraph, r, x: ContributionMatrix, delta,
                        s: SimplexSampler | None = None, *, E: np.ndarray | None = None,
                        tol: float = THRESHOLD_TOL):
    """Fraction of endowment vectors whose delta* is <= delta.

    ``delta`` may be a scalar or a sequence; for a sequence the same samples
    are reused for every value, so the curve is monotone by construction.
    Pass ``E`` to evaluate on an explicit point set (e.g. ``simplex_grid``).
    """
    if not x.is_full_cooperation():
        raise InvalidInstanceError("feasible_proportion needs a full-cooperation matrix")
    scalar = np.ndim(delta) == 0
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    hits = np.zeros(len(deltas), dtype=np.int64)
    B = denominator_matrix(H, r, x)
    blocks = [E] if E is not None else (s or SimplexSampler(H.N)).chunks()
    n = 0
    for block in blocks:
        d = np.sort(thresholds_for_samples(H, r, x, block, B))
        hits += np.searchsorted(d, deltas + tol, side="right")
        n += len(block)
    out = [_proportion(int(h), n) for h in hits]
    return out[0] if scalar else out
