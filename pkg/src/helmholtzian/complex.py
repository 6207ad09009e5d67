"""Vietoris-Rips 2-complexes and their boundary matrices.

Orientation convention: every simplex is stored with ascending vertex
indices, and that ordering is its orientation.  For an edge ``(i, j)`` the
boundary is ``[i] - [j]``; for a triangle ``(i, j, k)`` it is
``[i, j] + [j, k] - [i, k]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConsistencyError, InputError

log = logging.getLogger(__name__)

DEFAULT_MAX_EDGES = 5_000_000


def as_point_cloud(points) -> np.ndarray:
    """Validate and return an ``(n, D)`` float array of finite coordinates."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InputError(f"point cloud must be a non-empty (n, D) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("point cloud contains non-finite coordinates")
    return X


def _sorted_unique_rows(arr: np.ndarray, width: int) -> bool:
    if len(arr) < 2:
        return True
    keys = [arr[:, c] for c in reversed(range(width))]
    order = np.lexsort(keys)
    if not np.array_equal(order, np.arange(len(arr))):
        return False
    diff = np.any(arr[1:] != arr[:-1], axis=1)
    return bool(np.all(diff))


@dataclass(frozen=True)
class Complex2:
    """A simplicial 2-complex on vertices ``0..n_vertices-1``.

    ``edges`` is an ``(n1, 2)`` int array with ``i < j`` per row and
    ``triangles`` an ``(n2, 3)`` int array with ``i < j < k``; both are sorted
    lexicographically and duplicate free.  ``delta`` records the Rips radius
    the complex was built with (``None`` for hand-made complexes).
    """

    n_vertices: int
    edges: np.ndarray
    triangles: np.ndarray
    delta: float | None = None
    _edge_keys: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        edges.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "_edge_keys", edges[:, 0] * int(self.n_vertices) + edges[:, 1])

    @classmethod
    def from_simplices(cls, n_vertices, edges, triangles=(), delta=None, require_clique=False):
        """Build a complex from explicit simplex lists, sorting and validating them.

        Closure under faces is always enforced.  ``require_clique`` additionally
        demands that every 3-clique of the edge graph is a triangle, which holds
        for Rips complexes but not for arbitrary complexes.
        """
        n = int(n_vertices)
        E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        T = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        E = np.sort(E, axis=1)
        T = np.sort(T, axis=1)
        if len(E):
            E = np.unique(E, axis=0)
        if len(T):
            T = np.unique(T, axis=0)
        cx = cls(n, E, T, delta)
        cx.validate(require_clique=require_clique)
        return cx

    @property
    def vertices(self) -> np.ndarray:
        return np.arange(self.n_vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n_vertices, self.n_edges, self.n_triangles

    def edge_index(self, i, j) -> np.ndarray:
        """Indices of edges ``(i, j)`` (vectorised, ``i < j``); -1 where absent."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        keys = i * self.n_vertices + j
        pos = np.searchsorted(self._edge_keys, keys)
        pos = np.minimum(pos, max(len(self._edge_keys) - 1, 0))
        if len(self._edge_keys) == 0:
            return np.full(keys.shape, -1, dtype=np.int64)
        found = self._edge_keys[pos] == keys
        return np.where(found, pos, -1)

    def validate(self, require_clique: bool = False) -> None:
        n = self.n_vertices
        E, T = self.edges, self.triangles
        if n < 1:
            raise InputError("complex needs at least one vertex")
        if len(E):
            if E.min() < 0 or E.max() >= n:
                raise InputError("edge references a vertex outside 0..n-1")
            if np.any(E[:, 0] >= E[:, 1]):
                raise InputError("edges must satisfy i < j")
            if not _sorted_unique_rows(E, 2):
                raise InputError("edges must be sorted lexicographically without duplicates")
        if len(T):
            if np.any(T[:, 0] >= T[:, 1]) or np.any(T[:, 1] >= T[:, 2]):
                raise InputError("triangles must satisfy i < j < k")
            if not _sorted_unique_rows(T, 3):
                raise InputError("triangles must be sorted lexicographically without duplicates")
            for a, b in ((0, 1), (1, 2), (0, 2)):
                if np.any(self.edge_index(T[:, a], T[:, b]) < 0):
                    raise InputError("a triangle is missing one of its edges")
        if require_clique:
            cliques = _three_cliques(n, E)
            if len(cliques) != len(T) or not np.array_equal(cliques, T):
                raise InputError("triangle set differs from the 3-cliques of the edge graph")


def _three_cliques(n: int, edges: np.ndarray) -> np.ndarray:
    """All triangles ``(i, j, k)``, ``i < j < k``, whose three edges are present.

    Joins every edge ``(i, j)`` with every edge ``(j, k)`` and keeps the pairs
    whose closing edge ``(i, k)`` exists.  Output is lexicographically sorted.
    """
    if len(edges) < 3:
        return np.empty((0, 3), dtype=np.int64)
    first = edges[:, 0]
    starts = np.searchsorted(first, np.arange(n), side="left")
    ends = np.searchsorted(first, np.arange(n), side="right")
    j = edges[:, 1]
    counts = ends[j] - starts[j]
    total = int(counts.sum())
    if total == 0:
        return np.empty((0, 3), dtype=np.int64)
    e1 = np.repeat(np.arange(len(edges)), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    e2 = np.repeat(starts[j], counts) + offsets
    i_, j_, k_ = edges[e1, 0], edges[e1, 1], edges[e2, 1]
    keys = edges[:, 0] * n + edges[:, 1]
    closing = i_ * n + k_
    pos = np.searchsorted(keys, closing)
    pos = np.minimum(pos, len(keys) - 1)
    keep = keys[pos] == closing
    tris = np.stack([i_[keep], j_[keep], k_[keep]], axis=1)
    order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0]))
    return tris[order]


def build_vr_complex(points, delta: float, max_edges: int = DEFAULT_MAX_EDGES) -> Complex2:
    """Vietoris-Rips 2-complex: edges with distance strictly below ``delta``
    and every 3-clique of that graph as a triangle."""
    X = as_point_cloud(points)
    if not np.isfinite(delta) or delta <= 0:
        raise InputError(f"delta must be a positive finite number, got {delta}")
    n = len(X)
    tree = cKDTree(X)
    # count_neighbors counts ordered pairs including i == i; cheap guard before materialising
    n_pairs = (int(tree.count_neighbors(tree, delta)) - n) // 2
    if n_pairs > max_edges:
        raise InputError(
            f"Rips graph would have about {n_pairs} edges, above the cap of {max_edges}; "
            "lower delta or raise max_edges"
        )
    pairs = tree.query_pairs(delta, output_type="ndarray")
    if len(pairs):
        pairs = np.sort(pairs.astype(np.int64), axis=1)
        d = np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1)
        pairs = pairs[d < delta]
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
    tris = _three_cliques(n, pairs)
    return Complex2(n, pairs, tris, float(delta))


def boundary_map_1(cx: Complex2) -> sp.csc_matrix:
    """Vertex-edge incidence ``B1`` (n0 x n1): +1 at the tail ``i``, -1 at the head ``j``."""
    n1 = cx.n_edges
    rows = cx.edges.reshape(-1)
    cols = np.repeat(np.arange(n1), 2)
    vals = np.tile(np.array([1, -1], dtype=np.int64), n1)
    B = sp.csc_matrix((vals, (rows, cols)), shape=(cx.n_vertices, n1), dtype=np.int64)
    if B.nnz != 2 * n1:
        raise ConsistencyError("duplicate entries while assembling B1")
    return B


def boundary_map_2(cx: Complex2) -> sp.csc_matrix:
    """Edge-triangle incidence ``B2`` (n1 x n2) with signs (+1, +1, -1) on
    edges ``(i, j), (j, k), (i, k)`` of triangle ``(i, j, k)``."""
    T = cx.triangles
    n2 = len(T)
    if n2 == 0:
        return sp.csc_matrix((cx.n_edges, 0), dtype=np.int64)
    e_ij = cx.edge_index(T[:, 0], T[:, 1])
    e_jk = cx.edge_index(T[:, 1], T[:, 2])
    e_ik = cx.edge_index(T[:, 0], T[:, 2])
    if np.any(e_ij < 0) or np.any(e_jk < 0) or np.any(e_ik < 0):
        raise ConsistencyError("triangle references an edge missing from the complex")
    rows = np.stack([e_ij, e_jk, e_ik], axis=1).reshape(-1)
    cols = np.repeat(np.arange(n2), 3)
    vals = np.tile(np.array([1, 1, -1], dtype=np.int64), n2)
    B = sp.csc_matrix((vals, (rows, cols)), shape=(cx.n_edges, n2), dtype=np.int64)
    if B.nnz != 3 * n2:
        raise ConsistencyError("duplicate entries while assembling B2")
    return B


def edge_lengths(points, cx: Complex2) -> np.ndarray:
    X = as_point_cloud(points)
    return np.linalg.norm(X[cx.edges[:, 1]] - X[cx.edges[:, 0]], axis=1)


def default_delta(points, k: int = 8, factor: float = 1.2) -> float:
    """Rips radius covering the ``k`` nearest neighbours of every point.

    ``factor`` times the largest k-th-neighbour distance; using the maximum
    keeps sparsely sampled regions connected.
    """
    X = as_point_cloud(points)
    k = min(k, len(X) - 1)
    if k < 1:
        raise InputError("need at least two points to pick a radius")
    d, _ = cKDTree(X).query(X, k=k + 1)
    return float(factor * d[:, -1].max())


def farthest_point_subsample(points, m: int, start: int = 0) -> np.ndarray:
    """Greedy max-min landmark selection; ties go to the smallest index."""
    X = as_point_cloud(points)
    n = len(X)
    if not 1 <= m <= n:
        raise InputError(f"need 1 <= m <= n, got m={m}, n={n}")
    if not 0 <= start < n:
        raise InputError(f"start index {start} outside 0..{n - 1}")
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start
    mind = np.linalg.norm(X - X[start], axis=1)
    mind[start] = -1.0
    for t in range(1, m):
        nxt = int(np.argmax(mind))
        chosen[t] = nxt
        mind = np.minimum(mind, np.linalg.norm(X - X[nxt], axis=1))
        mind[nxt] = -1.0
    return chosen
