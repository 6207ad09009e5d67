"""Assembly of the weighted down/up 1-Laplacians, their combination, the
symmetrised Helmholtzian, and the random-walk graph Laplacian.

With ``W0, W1, W2`` the diagonal weight matrices::

    down = B1^T W0^-1 B1 W1
    up   = W1^-1 B2 W2 B2^T
    L1   = a * down + b * up
    L1s  = W1^(1/2) L1 W1^(-1/2)
    L0   = W0^-1 B1 W1 B1^T
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .complex import Complex2, boundary_map_1, boundary_map_2, build_vr_complex, DEFAULT_MAX_EDGES
from .errors import ConsistencyError, InputError
from .weights import WeightSet, compute_weights, default_epsilon, floor_weights, propagate_vertex_weights

log = logging.getLogger(__name__)

DEFAULT_A = 0.25
DEFAULT_B = 1.0
EXPLICIT_MAX_EDGES = 20_000


def _inv_diag(w, name):
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ConsistencyError(f"{name} has a zero or non-finite diagonal entry; apply floor_weights first")
    return sp.diags(1.0 / w)


def assemble_down(B1, w0, w1) -> sp.csr_matrix:
    B1 = sp.csr_matrix(B1, dtype=float)
    return (B1.T @ _inv_diag(w0, "w0") @ B1 @ sp.diags(np.asarray(w1, dtype=float))).tocsr()


def assemble_up(B2, w1, w2) -> sp.csr_matrix:
    B2 = sp.csr_matrix(B2, dtype=float)
    return (_inv_diag(w1, "w1") @ B2 @ sp.diags(np.asarray(w2, dtype=float)) @ B2.T).tocsr()


def assemble_helmholtzian(down, up, a: float = DEFAULT_A, b: float = DEFAULT_B):
    if a < 0 or b < 0:
        raise InputError(f"a and b must be non-negative, got a={a}, b={b}")
    if a == 0 and b == 0:
        raise InputError("a and b cannot both be zero")
    return a * down + b * up


def symmetrize(l1, w1):
    """Similarity transform ``W1^(1/2) L W1^(-1/2)`` followed by ``(M + M^T) / 2``."""
    s = np.sqrt(np.asarray(w1, dtype=float))
    if np.any(s <= 0):
        raise ConsistencyError("w1 has a zero entry; apply floor_weights first")
    M = sp.diags(s) @ sp.csr_matrix(l1) @ sp.diags(1.0 / s)
    return ((M + M.T) * 0.5).tocsr()


def assemble_graph_laplacian(B1, w0, w1) -> sp.csr_matrix:
    B1 = sp.csr_matrix(B1, dtype=float)
    return (_inv_diag(w0, "w0") @ B1 @ sp.diags(np.asarray(w1, dtype=float)) @ B1.T).tocsr()


def _factor_operators(B1, B2, w0, w1, w2, a, b):
    """Matrix-free versions of down, up, their sum and the symmetrised forms.

    Every operator is a composition of sparse factors so nothing of size
    ``n1 x n1`` is ever formed.
    """
    B1 = sp.csr_matrix(B1, dtype=float)
    B2 = sp.csr_matrix(B2, dtype=float)
    B1T = B1.T.tocsr()
    B2T = B2.T.tocsr()
    w0 = np.asarray(w0, float)
    w1 = np.asarray(w1, float)
    w2 = np.asarray(w2, float)
    n1 = B1.shape[1]
    s1 = np.sqrt(w1)

    # every closure accepts (n1,) or (n1, k) blocks
    def col(v):
        return v[:, None] if v.ndim == 1 else v

    def down(x):
        x = col(x)
        return B1T @ ((B1 @ (col(w1) * x)) / col(w0))

    def up(x):
        x = col(x)
        return (B2 @ (col(w2) * (B2T @ x))) / col(w1)

    def down_s(x):
        return col(s1) * down(col(x) / col(s1))

    def up_s(x):
        return col(s1) * up(col(x) / col(s1))

    def op(f):
        return _Op(n1, f, symmetric=False)

    out = {
        "l1_down": op(down),
        "l1_up": op(up),
        "l1": op(lambda x: a * down(x) + b * up(x)),
        "l1s_down": _symop(n1, lambda x: a * down_s(x)),
        "l1s_up": _symop(n1, lambda x: b * up_s(x)),
        "l1_sym": _symop(n1, lambda x: a * down_s(x) + b * up_s(x)),
    }
    return out


class _Op(LinearOperator):
    def __init__(self, n, f, symmetric=True):
        super().__init__(dtype=np.dtype(float), shape=(n, n))
        self._f = f
        self._sym = symmetric

    def _matvec(self, x):
        return self._f(np.asarray(x).reshape(-1)).reshape(-1)

    def _matmat(self, X):
        return self._f(np.asarray(X))

    def _rmatvec(self, x):
        if not self._sym:
            raise NotImplementedError("transpose of a non-symmetric matrix-free operator")
        return self._matvec(x)


def _symop(n, f):
    return _Op(n, f, symmetric=True)


@dataclass(frozen=True)
class HelmholtzOperators:
    """Assembled operators of one complex.

    ``l1s_down`` and ``l1s_up`` are the symmetrised down and up parts already
    multiplied by ``a`` and ``b``, so ``l1_sym == l1s_down + l1s_up``.  When
    the complex has more edges than the explicit threshold, the ``n1 x n1``
    fields are :class:`~scipy.sparse.linalg.LinearOperator` closures with the
    same matvec contract.
    """

    complex: Complex2
    weights: WeightSet
    B1: sp.csc_matrix
    B2: sp.csc_matrix
    w0: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    l1_down: object
    l1_up: object
    l1: object
    l1_sym: object
    l1s_down: object
    l1s_up: object
    l0: sp.csr_matrix
    a: float
    b: float

    @property
    def explicit(self) -> bool:
        return sp.issparse(self.l1_sym)

    @property
    def n_edges(self) -> int:
        return self.complex.n_edges

    def spectrum_bound(self) -> float:
        return max(2 * self.a, 3 * self.b)


def helmholtz_operators(
    points,
    cx: Complex2,
    epsilon: float,
    a: float = DEFAULT_A,
    b: float = DEFAULT_B,
    kernel: str = "exp",
    explicit_max_edges: int = EXPLICIT_MAX_EDGES,
    weights: WeightSet | None = None,
) -> HelmholtzOperators:
    """Weights and all operators for an existing complex."""
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise InputError(f"need a, b >= 0 and not both zero, got a={a}, b={b}")
    B1 = boundary_map_1(cx)
    B2 = boundary_map_2(cx)
    ws = weights if weights is not None else compute_weights(points, cx, epsilon, kernel, B1=B1, B2=B2)
    w1, _ = floor_weights(ws.w1, "edge weights")
    # re-propagate so every vertex weight is exactly the sum of its (floored) edge weights
    w0, _ = floor_weights(propagate_vertex_weights(B1, w1) if len(w1) else ws.w0, "vertex weights")
    w2 = np.asarray(ws.w2, dtype=float)
    l0 = assemble_graph_laplacian(B1, w0, w1)
    if cx.n_edges <= explicit_max_edges:
        down = assemble_down(B1, w0, w1)
        up = assemble_up(B2, w1, w2)
        l1 = assemble_helmholtzian(down, up, a, b)
        fields = dict(
            l1_down=down,
            l1_up=up,
            l1=l1,
            l1_sym=symmetrize(l1, w1),
            l1s_down=symmetrize(a * down, w1),
            l1s_up=symmetrize(b * up, w1),
        )
    else:
        log.info("n1=%d above %d: using matrix-free operators", cx.n_edges, explicit_max_edges)
        fields = _factor_operators(B1, B2, w0, w1, w2, a, b)
    return HelmholtzOperators(
        complex=cx, weights=ws, B1=B1, B2=B2, w0=w0, w1=w1, w2=w2, l0=l0, a=float(a), b=float(b), **fields
    )


def manifold_helmholtzian(
    points,
    delta: float,
    epsilon: float | None = None,
    a: float = DEFAULT_A,
    b: float = DEFAULT_B,
    kernel: str = "exp",
    max_edges: int = DEFAULT_MAX_EDGES,
    explicit_max_edges: int = EXPLICIT_MAX_EDGES,
) -> HelmholtzOperators:
    """Point cloud to Helmholtzian: Rips complex, boundaries, weights, operators."""
    cx = build_vr_complex(points, delta, max_edges=max_edges)
    if epsilon is None:
        epsilon = default_epsilon(points, cx)
    return helmholtz_operators(points, cx, epsilon, a, b, kernel, explicit_max_edges)


def as_operator(M):
    """Wrap sparse/dense matrices and operators behind one matvec interface."""
    return M if isinstance(M, LinearOperator) else aslinearoperator(M)


def to_triplets(M) -> np.ndarray:
    """``(nnz, 3)`` array of ``row, col, value`` for debug export."""
    C = sp.coo_matrix(M)
    return np.column_stack([C.row, C.col, C.data])
