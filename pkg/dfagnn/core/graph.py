"""
Undirected graphs, the propagation operator S = D̃^{-1/2}(A+I)D̃^{-1/2},
repeated Sᵀ application and random structural attacks.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Literal, Tuple

import numpy as np
import scipy.sparse as sp

from dfagnn.core.numkit import DenseMatrix, Rng, SparseMatrix, as_sparse, spmm
from dfagnn.errors import GraphError

logger = logging.getLogger(__name__)

PerturbKind = Literal["add", "remove", "flip"]

# 节点对总数不超过该值时直接枚举, 否则拒绝采样
ENUMERATE_PAIR_LIMIT = 1_000_000


@dataclass(frozen=True)
class Graph:
    """
    :param n: node count.
    :param edges: (m, 2) int64 array of canonical pairs u < v, sorted lexicographically.
    :param adjacency: symmetric binary CSR matrix with zero diagonal (2m stored entries).
    """
    n: int
    edges: np.ndarray
    adjacency: SparseMatrix

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def edge_keys(self) -> np.ndarray:
        """Scalar key u*n+v per canonical edge (sorted)."""
        return self.edges[:, 0] * self.n + self.edges[:, 1]


def _from_canonical(n: int, edges: np.ndarray) -> Graph:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = as_sparse(sp.coo_matrix((np.ones(2 * m), (rows, cols)), shape=(n, n)))
    return Graph(n=n, edges=edges, adjacency=adj)


def _canonical_from_keys(n: int, keys: np.ndarray) -> np.ndarray:
    keys = np.unique(np.asarray(keys, dtype=np.int64))
    return np.stack([keys // n, keys % n], axis=1) if keys.size else np.zeros((0, 2), dtype=np.int64)


def build_graph(n: int, edge_list: Iterable[Tuple[int, int]]) -> Graph:
    """
    Build an undirected graph; duplicates, reversed copies and self-loops are dropped.

    :param n: node count.
    :param edge_list: (u, v) pairs, 0-based.
    :raises GraphError: if a pair references a node outside [0, n).
    """
    if n < 0:
        raise GraphError(f"node count must be non-negative, got {n}")
    pairs = np.asarray(list(edge_list), dtype=np.int64).reshape(-1, 2)
    bad = (pairs < 0) | (pairs >= n)
    if bad.any():
        u, v = pairs[np.argmax(bad.any(axis=1))]
        raise GraphError(f"edge ({u}, {v}) is out of range for n={n}")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return _from_canonical(n, _canonical_from_keys(n, lo * n + hi))


def normalized_operator(g: Graph) -> SparseMatrix:
    """
    S = D̃^{-1/2} Ã D̃^{-1/2} with Ã = A + I.

    Each stored value is Ãᵢⱼ / sqrt(D̃ᵢᵢ·D̃ⱼⱼ); the product under the root is
    commutative, so S is bitwise symmetric.
    """
    a_tilde = (g.adjacency + sp.identity(g.n, dtype=np.float64, format="csr")).tocoo()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    vals = a_tilde.data / np.sqrt(deg[a_tilde.row] * deg[a_tilde.col])
    return as_sparse(sp.coo_matrix((vals, (a_tilde.row, a_tilde.col)), shape=(g.n, g.n)))


def apply_operator_power(s: SparseMatrix, x: DenseMatrix, k: int) -> DenseMatrix:
    """(Sᵀ)^k X by k successive spmm calls; S^k is never materialised."""
    if k < 0:
        raise ValueError(f"operator power must be non-negative, got {k}")
    out = np.array(x, dtype=np.float64, copy=True)
    for _ in range(k):
        out = spmm(s, out, transpose_s=True)
    return out


def _sample_pair_keys(n: int, count: int, rng: Rng, exclude: np.ndarray) -> np.ndarray:
    """
    ``count`` distinct unordered pairs (as keys u*n+v, u<v) uniform over all
    pairs not in ``exclude``.
    """
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    total = n * (n - 1) // 2
    if total <= ENUMERATE_PAIR_LIMIT:
        iu, iv = np.triu_indices(n, k=1)
        keys = iu.astype(np.int64) * n + iv
        keys = keys[~np.isin(keys, exclude, assume_unique=True)]
        return np.sort(rng.choice(keys, size=count, replace=False))

    chosen = set()
    excluded = set(exclude.tolist())
    while len(chosen) < count:
        batch = max(2 * (count - len(chosen)), 64)
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            key = min(a, b) * n + max(a, b)
            if key in excluded or key in chosen:
                continue
            chosen.add(key)
            if len(chosen) == count:
                break
    return np.sort(np.fromiter(chosen, dtype=np.int64, count=count))


def perturb(g: Graph, kind: PerturbKind, rate: float, rng: Rng) -> Graph:
    """
    Random structural attack touching ⌊rate·m⌋ node pairs.

    add    inserts pairs sampled uniformly from the non-edges;
    remove deletes existing edges sampled uniformly;
    flip   toggles pairs sampled uniformly from all unordered pairs.
    Pairs are drawn without replacement, so the count is exact.
    """
    if rate < 0:
        raise GraphError(f"perturbation rate must be non-negative, got {rate}")
    m = g.num_edges
    count = int(np.floor(rate * m))
    keys = g.edge_keys()
    total = g.n * (g.n - 1) // 2

    if kind == "add":
        if count > total - m:
            raise GraphError(f"cannot add {count} edges: only {total - m} non-edges available")
        new_keys = np.concatenate([keys, _sample_pair_keys(g.n, count, rng, keys)])
    elif kind == "remove":
        if count > m:
            raise GraphError(f"cannot remove {count} edges from a graph with {m}")
        drop = rng.choice(m, size=count, replace=False) if count else np.zeros(0, dtype=np.int64)
        new_keys = np.delete(keys, drop)
    elif kind == "flip":
        if count > total:
            raise GraphError(f"cannot flip {count} pairs: graph has only {total} node pairs")
        toggled = _sample_pair_keys(g.n, count, rng, np.zeros(0, dtype=np.int64))
        new_keys = np.setxor1d(keys, toggled, assume_unique=True)
    else:
        raise GraphError(f"unknown perturbation kind: {kind!r}")

    out = _from_canonical(g.n, _canonical_from_keys(g.n, new_keys))
    logger.debug("[ATTACK] %s rate=%.2f: %d pairs touched, m %d -> %d", kind, rate, count, m, out.num_edges)
    return out
