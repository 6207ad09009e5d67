"""Edge-flow smoothing and Laplacian-regularised least squares on edges."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, gmres, splu

from .complex import Complex2, boundary_map_1, boundary_map_2
from .errors import ConvergenceError, InputError

log = logging.getLogger(__name__)

DENSE_MAX = 2000
SSL_TOL = 1e-8
HYPER_GRID = tuple(np.logspace(-5, 5, 11))


def _as_mask(S, n1: int) -> np.ndarray:
    S = np.asarray(S)
    if S.dtype == bool:
        if S.shape != (n1,):
            raise InputError(f"mask has shape {S.shape}, expected ({n1},)")
        mask = S.copy()
    else:
        mask = np.zeros(n1, dtype=bool)
        idx = S.astype(np.int64).ravel()
        if len(idx) and (idx.min() < 0 or idx.max() >= n1):
            raise InputError("training edge index out of range")
        mask[idx] = True
    if not mask.any():
        raise InputError("training set S is empty")
    return mask


def smooth_flow(omega, l1_sym, alpha: float, tol: float = 1e-10, maxiter: int | None = None) -> np.ndarray:
    """Low-pass filter ``(I + alpha L1s)^-1 omega`` by conjugate gradients."""
    omega = np.asarray(omega, dtype=float)
    if alpha < 0 or not np.isfinite(alpha):
        raise InputError(f"alpha must be non-negative, got {alpha}")
    n = l1_sym.shape[0]
    if omega.shape != (n,):
        raise InputError(f"cochain has shape {omega.shape}, expected ({n},)")
    if alpha == 0:
        return omega.copy()
    A = LinearOperator((n, n), matvec=lambda x: x + alpha * (l1_sym @ x), dtype=float)
    x, info = cg(A, omega, rtol=tol, atol=0.0, maxiter=maxiter or 10 * n)
    res = float(np.linalg.norm(A @ x - omega))
    if info != 0 or res > 10 * tol * max(np.linalg.norm(omega), 1e-300):
        raise ConvergenceError(f"smoothing solve stopped at residual {res:.3g}", residuals=res)
    return x


def edge_adjacency_kernel(cx: Complex2) -> sp.csr_matrix:
    """0/1 kernel: edges sharing a vertex or a triangle (and every edge with itself)."""
    B1 = abs(boundary_map_1(cx)).astype(float)
    B2 = abs(boundary_map_2(cx)).astype(float)
    K = (B1.T @ B1 + B2 @ B2.T).tocsr()
    K.data[:] = 1.0
    K = (K + sp.identity(cx.n_edges, format="csr")).tocsr()
    K.data[:] = 1.0
    K.eliminate_zeros()
    return K


@dataclass
class SslModel:
    coefficients: np.ndarray
    kernel: object
    mask: np.ndarray
    hyper: dict = field(default_factory=dict)
    residual: float = 0.0

    def predict(self) -> np.ndarray:
        return np.asarray(self.kernel @ self.coefficients).ravel()


def _solve_system(M, rhs, tol=SSL_TOL, dense_max=DENSE_MAX):
    """Direct solve (dense below ``dense_max``, sparse LU above) or GMRES for
    matrix-free systems.  The relative residual is always checked."""
    n = len(rhs)
    if isinstance(M, LinearOperator):
        x, info = gmres(M, rhs, rtol=tol * 0.1, atol=0.0, restart=min(n, 200), maxiter=50)
    elif n <= dense_max:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        try:
            x = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise InputError("RLS system is singular") from exc
    else:
        try:
            x = splu(sp.csc_matrix(M)).solve(rhs)
        except RuntimeError as exc:
            raise InputError("RLS system is singular") from exc
    res = float(np.linalg.norm(M @ x - rhs))
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    if not np.all(np.isfinite(x)) or res > tol * scale:
        raise ConvergenceError(f"RLS solve residual {res / scale:.3g} above {tol}", residuals=res)
    return x


def _rls(omega, S, kernel, reg, lambda1, hyper, tol):
    """Shared closed form ``(diag(1_S) K + lambda1 |S| I + reg K) alpha = omega_S``."""
    omega = np.asarray(omega, dtype=float)
    n1 = len(omega)
    if kernel.shape != (n1, n1):
        raise InputError(f"kernel has shape {kernel.shape}, expected ({n1}, {n1})")
    if lambda1 <= 0:
        raise InputError(f"lambda1 must be positive, got {lambda1}")
    mask = _as_mask(S, n1)
    m = int(mask.sum())
    rhs = np.where(mask, omega, 0.0)
    if any(isinstance(o, LinearOperator) for o in (kernel, reg)):
        K = kernel

        def mv(x):
            Kx = K @ x
            return mask * Kx + lambda1 * m * x + reg @ Kx

        M = LinearOperator((n1, n1), matvec=mv, dtype=float)
    else:
        K = sp.csr_matrix(kernel, dtype=float)
        M = (sp.diags(mask.astype(float)) @ K + lambda1 * m * sp.identity(n1) + sp.csr_matrix(reg) @ K).tocsr()
    alpha = _solve_system(M, rhs, tol)
    return SslModel(coefficients=alpha, kernel=kernel, mask=mask, hyper=hyper,
                    residual=float(np.linalg.norm(M @ alpha - rhs)))


def _scaled(op, c):
    if isinstance(op, LinearOperator):
        return op * c
    return sp.csr_matrix(op, dtype=float) * c


def fit_laplacian_rls(omega, S, kernel, l1_sym, lambda1: float, lambda2: float, tol: float = SSL_TOL) -> SslModel:
    """LaplacianRLS: ridge data term plus ``(lambda2 / n1^2) g^T L1s g``."""
    if lambda2 < 0:
        raise InputError(f"lambda2 must be non-negative, got {lambda2}")
    n1 = len(omega)
    m = int(_as_mask(S, n1).sum())
    reg = _scaled(l1_sym, lambda2 * m / n1**2)
    return _rls(omega, S, kernel, reg, lambda1, {"lambda1": lambda1, "lambda2": lambda2}, tol)


def fit_updown_rls(
    omega, S, kernel, l1s_up, l1s_down, lambda1: float, lambda2_up: float, lambda2_down: float, tol: float = SSL_TOL
) -> SslModel:
    """UpDownLaplacianRLS: separate penalties on the up and down parts.

    ``l1s_up`` and ``l1s_down`` must already carry the ``b`` and ``a``
    factors so that equal penalties reproduce :func:`fit_laplacian_rls`.
    """
    if lambda2_up < 0 or lambda2_down < 0:
        raise InputError("lambda2_up and lambda2_down must be non-negative")
    n1 = len(omega)
    m = int(_as_mask(S, n1).sum())
    if lambda2_up == lambda2_down:
        reg = _scaled(l1s_up + l1s_down, lambda2_up * m / n1**2)
    else:
        reg = _scaled(l1s_up, lambda2_up * m / n1**2) + _scaled(l1s_down, lambda2_down * m / n1**2)
    hyper = {"lambda1": lambda1, "lambda2_up": lambda2_up, "lambda2_down": lambda2_down}
    return _rls(omega, S, kernel, reg, lambda1, hyper, tol)


def r2_score(predicted, actual, mask=None) -> float:
    """Coefficient of determination over the masked entries (no clamping)."""
    p = np.asarray(predicted, dtype=float)
    y = np.asarray(actual, dtype=float)
    if p.shape != y.shape:
        raise InputError("predicted and actual differ in shape")
    if mask is not None:
        mask = np.asarray(mask)
        p, y = p[mask], y[mask]
    if len(y) == 0:
        raise InputError("empty evaluation set")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - p) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else -np.inf
    return 1.0 - ss_res / ss_tot


def hyper_grid(**axes) -> list[dict]:
    """Cartesian product of named value lists, as a list of dicts."""
    names = list(axes)
    return [dict(zip(names, vals)) for vals in itertools.product(*(axes[k] for k in names))]


def split_edges(n1: int, train_ratio: float, seed: int) -> np.ndarray:
    """Boolean training mask with ``round(train_ratio * n1)`` edges (at least one)."""
    if not 0 < train_ratio <= 1:
        raise InputError(f"train ratio must lie in (0, 1], got {train_ratio}")
    m = max(1, int(round(train_ratio * n1)))
    mask = np.zeros(n1, dtype=bool)
    mask[np.random.default_rng(seed).permutation(n1)[:m]] = True
    return mask


def cross_validate(fit_fn, omega, grid, folds: int = 5, seed: int = 0, train=None):
    """Grid search by K-fold cross-validation on the labelled edges.

    ``fit_fn(omega, mask, **hyper)`` must return predictions on every edge.
    Folds split ``train`` (all edges by default) with a permutation drawn
    from ``seed``.  Returns ``(best_hyper, mean_r2_per_grid_point)``; ties
    go to the lexicographically smallest hyperparameters, and among exact
    duplicates the first one listed wins.
    """
    omega = np.asarray(omega, dtype=float)
    grid = list(grid)
    if not grid:
        raise InputError("empty hyperparameter grid")
    labelled = np.flatnonzero(_as_mask(np.ones(len(omega), bool) if train is None else train, len(omega)))
    if not 2 <= folds <= len(labelled):
        raise InputError(f"need 2 <= folds <= {len(labelled)}, got {folds}")
    perm = np.random.default_rng(seed).permutation(labelled)
    parts = np.array_split(perm, folds)
    scores = np.zeros(len(grid))
    for g, hyper in enumerate(grid):
        for f in range(folds):
            tr = np.zeros(len(omega), dtype=bool)
            tr[np.concatenate([parts[q] for q in range(folds) if q != f])] = True
            te = np.zeros(len(omega), dtype=bool)
            te[parts[f]] = True
            pred = fit_fn(omega, tr, **hyper)
            scores[g] += r2_score(pred, omega, te) / folds
    top = np.max(scores)
    winners = [g for g in range(len(grid)) if scores[g] == top]
    best = min(winners, key=lambda g: (tuple(grid[g][k] for k in sorted(grid[g])), g))
    return dict(grid[best]), scores
