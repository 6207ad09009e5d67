"""Vector fields and trajectories to edge cochains, and back."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr
from scipy.spatial import cKDTree

from .complex import Complex2, as_point_cloud, boundary_map_1
from .errors import InputError

log = logging.getLogger(__name__)

DAMPING_GRID = tuple(np.logspace(-5, 5, 11))


def _check_field(points, field):
    X = as_point_cloud(points)
    F = np.asarray(field, dtype=float)
    if F.shape != X.shape:
        raise InputError(f"field has shape {F.shape}, points have shape {X.shape}")
    if not np.all(np.isfinite(F)):
        raise InputError("field contains non-finite values")
    return X, F


def cochain_from_field(points, field, cx: Complex2) -> np.ndarray:
    """Trapezoid-rule line integral along each edge: ``(f_i + f_j) / 2 . (x_j - x_i)``."""
    X, F = _check_field(points, field)
    if cx.n_vertices != len(X):
        raise InputError(f"complex has {cx.n_vertices} vertices but {len(X)} points were given")
    i, j = cx.edges[:, 0], cx.edges[:, 1]
    return 0.5 * np.einsum("ed,ed->e", F[i] + F[j], X[j] - X[i])


def _field_system(X, cx, B1=None):
    """Averaging operator ``|B1^T| / 2`` and the per-edge target vectors."""
    B1 = boundary_map_1(cx) if B1 is None else B1
    A = (0.5 * abs(sp.csr_matrix(B1, dtype=float).T)).tocsr()
    d = X[cx.edges[:, 1]] - X[cx.edges[:, 0]]
    chi = np.sum(d * d, axis=1)
    if np.any(chi == 0):
        raise InputError("complex has an edge of zero length")
    return A, d / chi[:, None]


def _solve_field(A, T, damp, tol):
    F = np.empty((A.shape[1], T.shape[1]))
    for c in range(T.shape[1]):
        F[:, c] = lsqr(A, T[:, c], damp=damp, atol=tol, btol=tol, iter_lim=max(10 * A.shape[1], 1000))[0]
    return F


def field_from_cochain(points, cx: Complex2, omega, damping: float = 0.0, tol: float = 1e-8, return_info: bool = False):
    """Damped least-squares vector field whose edge averages reproduce ``omega``.

    Minimises ``|| |B1^T| F / 2 - (X_E / chi_E) * omega ||^2 + damping ||F||^2``
    column by column with LSQR.  Vertices in no edge get the zero vector (the
    minimum-norm answer) and are reported in ``info["isolated"]``.
    """
    X = as_point_cloud(points)
    omega = np.asarray(omega, dtype=float)
    if damping < 0 or not np.isfinite(damping):
        raise InputError(f"damping must be non-negative, got {damping}")
    if omega.shape != (cx.n_edges,):
        raise InputError(f"cochain has shape {omega.shape}, expected ({cx.n_edges},)")
    A, U = _field_system(X, cx)
    F = _solve_field(A, U * omega[:, None], np.sqrt(damping), tol)
    deg = np.bincount(cx.edges.ravel(), minlength=cx.n_vertices)
    isolated = np.flatnonzero(deg == 0)
    if len(isolated) and damping == 0:
        log.warning("%d isolated vertices get a zero vector", len(isolated))
    if return_info:
        return F, {"isolated": isolated}
    return F


def fisher_z(r: float) -> float:
    return float(np.arctanh(np.clip(r, -1 + 1e-12, 1 - 1e-12)))


def select_damping(points, cx: Complex2, omega, grid=DAMPING_GRID, folds: int = 5, seed: int = 0):
    """Pick the damping by K-fold cross-validation over edges.

    Each fold fits on the remaining edges, maps the field back to a cochain
    and scores the held-out edges by the Fisher z-transform of the Pearson
    correlation.  Returns ``(best_damping, mean_scores)``; ties go to the
    smaller damping.
    """
    X = as_point_cloud(points)
    omega = np.asarray(omega, dtype=float)
    if folds < 2 or folds > cx.n_edges:
        raise InputError(f"need 2 <= folds <= n1, got {folds}")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise InputError("damping grid must be non-empty and non-negative")
    fold_of = np.random.default_rng(seed).permutation(cx.n_edges) % folds
    A, U = _field_system(X, cx)
    T = U * omega[:, None]
    scores = np.zeros(len(grid))
    for f in range(folds):
        test = fold_of == f
        keep = sp.diags((~test).astype(float))
        At, Tt = (keep @ A).tocsr(), T * (~test)[:, None]
        for g, lam in enumerate(grid):
            F = _solve_field(At, Tt, np.sqrt(lam), 1e-8)
            pred = cochain_from_field(X, F, cx)[test]
            if np.std(pred) == 0 or np.std(omega[test]) == 0:
                z = 0.0
            else:
                z = fisher_z(np.corrcoef(pred, omega[test])[0, 1])
            scores[g] += z / folds
    best = int(np.argmax(scores))
    order = np.argsort(grid, kind="stable")
    # smallest damping among the maximisers
    best = next(i for i in order if scores[i] == scores[best])
    return float(grid[best]), scores


@dataclass
class ObservedCochain:
    values: np.ndarray
    mask: np.ndarray
    n_steps: int
    n_skipped: int


def snap_to_vertices(points, coords) -> np.ndarray:
    """Nearest landmark for every row of ``coords``; ties go to the smaller index."""
    X = as_point_cloud(points)
    Q = np.asarray(coords, dtype=float).reshape(-1, X.shape[1])
    k = min(4, len(X))
    d, idx = cKDTree(X).query(Q, k=k)
    d, idx = d.reshape(len(Q), k), idx.reshape(len(Q), k)
    tied = d == d[:, :1]
    return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)


def trajectory_to_cochain(trajectories, points, cx: Complex2) -> ObservedCochain:
    """Net signed edge crossings of snapped trajectories.

    Every step ``i -> j`` between distinct snapped vertices adds ``+1`` to
    edge ``(min, max)`` when ``i < j`` and ``-1`` otherwise.  Steps that are
    not edges of the complex are skipped and counted.
    """
    if trajectories is None or len(trajectories) == 0:
        raise InputError("no trajectories given")
    vals = np.zeros(cx.n_edges)
    mask = np.zeros(cx.n_edges, dtype=bool)
    steps = skipped = 0
    for t, traj in enumerate(trajectories):
        traj = np.asarray(traj, dtype=float)
        if traj.ndim != 2 or len(traj) < 2:
            raise InputError(f"trajectory {t} needs at least two points")
        v = snap_to_vertices(points, traj)
        v = v[np.concatenate([[True], v[1:] != v[:-1]])]
        if len(v) < 2:
            continue
        a, b = v[:-1], v[1:]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        e = cx.edge_index(lo, hi)
        ok = e >= 0
        steps += len(e)
        skipped += int(np.sum(~ok))
        np.add.at(vals, e[ok], np.where(a[ok] < b[ok], 1.0, -1.0))
        mask[e[ok]] = True
    if skipped:
        log.warning("skipped %d of %d trajectory steps that are not edges", skipped, steps)
    return ObservedCochain(values=vals, mask=mask, n_steps=steps, n_skipped=skipped)
