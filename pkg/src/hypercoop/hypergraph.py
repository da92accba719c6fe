"""Uniform hypergraphs: construction, random generators and hyperedge-list I/O.

A hypergraph is stored as an ``(M, sigma)`` integer array of member indices,
one row per hyperedge with members sorted ascending. Every other quantity
(incidence matrix, hyperdegrees) is derived from that array.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_RETRIES = 1000


class CoverageError(RuntimeError):
    """Raised when a generator cannot produce a hypergraph without isolated nodes."""


class HyperedgeFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hypergraph:
    n_nodes: int
    edges: np.ndarray
    labels: tuple[str, ...] | None = None
    edge_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64)
        if edges.ndim != 2:
            raise ValueError("edges must be a 2-d (M, sigma) array")
        if edges.shape[0] < 1:
            raise ValueError("a hypergraph needs at least one hyperedge")
        if edges.shape[1] < 2:
            raise ValueError("hyperedge size sigma must be >= 2")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if edges.min() < 0 or edges.max() >= self.n_nodes:
            raise ValueError("hyperedge member out of range [0, N)")
        edges = np.sort(edges, axis=1)
        if np.any(edges[:, 1:] == edges[:, :-1]):
            bad = int(np.nonzero(np.any(edges[:, 1:] == edges[:, :-1], axis=1))[0][0])
            raise ValueError(f"hyperedge {bad} has a repeated member")
        if self.labels is not None and len(self.labels) != self.n_nodes:
            raise ValueError("labels must have one entry per node")
        if self.edge_labels is not None and len(self.edge_labels) != edges.shape[0]:
            raise ValueError("edge_labels must have one entry per hyperedge")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def N(self) -> int:
        return self.n_nodes

    @property
    def M(self) -> int:
        return self.edges.shape[0]

    @property
    def sigma(self) -> int:
        return self.edges.shape[1]

    @cached_property
    def degrees(self) -> np.ndarray:
        k = np.bincount(self.edges.ravel(), minlength=self.n_nodes)
        k.setflags(write=False)
        return k

    @property
    def isolated(self) -> np.ndarray:
        """Indices of nodes that belong to no hyperedge."""
        return np.flatnonzero(self.degrees == 0)

    def incidence(self) -> np.ndarray:
        """Dense ``N x M`` 0/1 incidence matrix."""
        a = np.zeros((self.n_nodes, self.M))
        a[self.edges, np.arange(self.M)[:, None]] = 1.0
        return a

    @cached_property
    def node_edges(self) -> tuple[np.ndarray, ...]:
        """For every node, the ascending ids of the hyperedges containing it."""
        flat = self.edges.ravel()
        edge_of = np.repeat(np.arange(self.M), self.sigma)
        order = np.lexsort((edge_of, flat))
        splits = np.cumsum(self.degrees)[:-1]
        return tuple(np.split(edge_of[order], splits))

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    def permuted(self, perm: Sequence[int]) -> "Hypergraph":
        """Relabel node ``i`` as ``perm[i]``; hyperedge order is kept."""
        perm = np.asarray(perm)
        labels = None
        if self.labels is not None:
            labels = [""] * self.n_nodes
            for i, p in enumerate(perm):
                labels[p] = self.labels[i]
            labels = tuple(labels)
        return Hypergraph(self.n_nodes, perm[self.edges], labels, self.edge_labels)

    def __repr__(self):
        return f"Hypergraph(N={self.N}, M={self.M}, sigma={self.sigma})"


def hyperdegrees(H: Hypergraph) -> np.ndarray:
    return np.array(H.degrees)


# -- named small structures (0-based: the "player 1" of a figure is node 0) --

def fully_connected(n: int, sigma: int = 3) -> Hypergraph:
    return Hypergraph(n, np.array(list(itertools.combinations(range(n), sigma))))


def two_edge() -> Hypergraph:
    """Players {1,2,3} and {2,3,4}."""
    return Hypergraph(4, [[0, 1, 2], [1, 2, 3]])


def ring6() -> Hypergraph:
    """Six players, four games: h1={1,2,3}, h2={2,3,4}, h3={4,5,6}, h4={5,6,1}."""
    return Hypergraph(6, [[0, 1, 2], [1, 2, 3], [3, 4, 5], [4, 5, 0]])


def chain6() -> Hypergraph:
    """Six players, three games: h1={1,2,3}, h2={2,3,4}, h3={4,5,6}."""
    return Hypergraph(6, [[0, 1, 2], [1, 2, 3], [3, 4, 5]])


def circulant(n: int, patterns: Iterable[Sequence[int]]) -> Hypergraph:
    """Regular hypergraph from offset patterns.

    Each pattern ``(0, a, b, ...)`` contributes the ``n`` hyperedges
    ``{i, i+a, i+b, ...} mod n``, so every node has hyperdegree
    ``sigma * len(patterns)``.
    """
    edges = []
    for pat in patterns:
        pat = np.asarray(pat)
        if len(set((pat % n).tolist())) != len(pat):
            raise ValueError(f"pattern {tuple(pat)} repeats a node modulo {n}")
        edges.append((np.arange(n)[:, None] + pat[None, :]) % n)
    return Hypergraph(n, np.vstack(edges))


# -- random generators --

@dataclass(frozen=True)
class GeneratorConfig:
    kind: str
    N: int
    mean_degree: float
    sigma: int = 3
    gamma: float = 2.5
    seed: int = 0
    max_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self):
        if self.kind not in ("ER", "BA"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.N < 1 or self.sigma < 2 or self.mean_degree <= 0:
            raise ValueError("need N >= 1, sigma >= 2 and mean_degree > 0")
        if self.kind == "BA" and self.gamma <= 2:
            raise ValueError("BA needs gamma > 2")
        if self.n_edges < 1:
            raise ValueError("N * mean_degree / sigma rounds to zero hyperedges")

    @property
    def n_edges(self) -> int:
        # round half up
        return int(math.floor(self.N * self.mean_degree / self.sigma + 0.5))

    @property
    def alpha(self) -> float:
        return 1.0 / (self.gamma - 1.0)


def _draw_until_covered(cfg: GeneratorConfig, draw) -> Hypergraph:
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.max_retries):
        edges = draw(rng)
        if np.bincount(edges.ravel(), minlength=cfg.N).min() > 0:
            return Hypergraph(cfg.N, edges)
    raise CoverageError(
        f"cannot cover all nodes: {cfg.max_retries} draws of {cfg.n_edges} hyperedges "
        f"on N={cfg.N} left isolated nodes (mean degree {cfg.mean_degree} too small)"
    )


def generate_er(cfg: GeneratorConfig) -> Hypergraph:
    """Each hyperedge is sigma distinct nodes chosen uniformly at random."""
    if cfg.kind != "ER":
        raise ValueError("config kind must be ER")
    if cfg.N < cfg.sigma:
        raise ValueError("need N >= sigma")
    M, s = cfg.n_edges, cfg.sigma

    def draw(rng):
        keys = rng.random((M, cfg.N))
        return np.argpartition(keys, s - 1, axis=1)[:, :s]

    return _draw_until_covered(cfg, draw)


def generate_ba(cfg: GeneratorConfig) -> Hypergraph:
    """Static scale-free model: node i has weight (i+1)^-alpha, alpha = 1/(gamma-1).

    Members of each hyperedge are drawn without replacement proportionally to
    weight, using the Gumbel-top-k trick.
    """
    if cfg.kind != "BA":
        raise ValueError("config kind must be BA")
    if cfg.N < cfg.sigma:
        raise ValueError("need N >= sigma")
    M, s = cfg.n_edges, cfg.sigma
    logw = -cfg.alpha * np.log(np.arange(1, cfg.N + 1))

    def draw(rng):
        keys = logw[None, :] + rng.gumbel(size=(M, cfg.N))
        return np.argpartition(-keys, s - 1, axis=1)[:, :s]

    return _draw_until_covered(cfg, draw)


def generate(cfg: GeneratorConfig) -> Hypergraph:
    return generate_er(cfg) if cfg.kind == "ER" else generate_ba(cfg)


# -- hyperedge-list text format --

def load_hyperedge_list(text: str | Iterable[str],
                        dimension_filter: int | None = None) -> Hypergraph:
    """Parse comma-separated hyperedges, one per line; ``#`` starts a comment line.

    Labels are mapped to dense indices in first-seen order among the retained
    hyperedges, so nodes only present in filtered-out lines are dropped.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    kept: list[list[str]] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        members = [m.strip() for m in line.split(",")]
        if any(not m for m in members):
            raise HyperedgeFormatError(f"line {lineno}: empty label")
        if len(set(members)) != len(members):
            raise HyperedgeFormatError(f"line {lineno}: duplicate member in hyperedge")
        if dimension_filter is not None and len(members) != dimension_filter:
            continue
        kept.append(members)
    if not kept:
        raise HyperedgeFormatError("no hyperedges left after filtering")
    sizes = {len(m) for m in kept}
    if len(sizes) > 1:
        raise HyperedgeFormatError(
            f"mixed hyperedge sizes {sorted(sizes)}; pass dimension_filter")
    index: dict[str, int] = {}
    edges = [[index.setdefault(m, len(index)) for m in members] for members in kept]
    return Hypergraph(len(index), np.array(edges), tuple(index))


def read_hyperedge_file(path, dimension_filter: int | None = None) -> Hypergraph:
    with open(path, encoding="utf-8") as fh:
        return load_hyperedge_list(fh.read(), dimension_filter)


def _label_key(label: str):
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


def dump_hyperedge_list(H: Hypergraph) -> str:
    """Canonical text form: members sorted by label (numeric labels numerically),
    edges in construction order. Reading the output back and dumping again is
    the identity."""
    lines = []
    for row in H.edges:
        lines.append(",".join(sorted((H.label(i) for i in row), key=_label_key)))
    return "".join(line + "\n" for line in lines)


def write_hyperedge_file(H: Hypergraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_hyperedge_list(H))
