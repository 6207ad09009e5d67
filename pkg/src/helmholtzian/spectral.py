"""Low spectrum of the symmetrised Helmholtzian, Betti-number estimation,
normalised Hodge decomposition and eigenflow classification."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg, lsqr, splu

from .errors import ConvergenceError, InputError

log = logging.getLogger(__name__)

DENSE_MAX = 2000
HARMONIC, GRADIENT, CURL, MIXED = "harmonic", "gradient", "curl", "mixed"


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    labels: list[str] | None = None

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class BettiEstimate:
    beta: int
    gap_ratio: float
    confident: bool

    def __int__(self):
        return self.beta


@dataclass
class HodgeParts:
    gradient: np.ndarray
    curl: np.ndarray
    harmonic: np.ndarray
    potential: np.ndarray
    vorticity: np.ndarray
    info: dict = field(default_factory=dict)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def low_spectrum(
    M,
    k: int,
    tol: float = 1e-8,
    seed: int = 0,
    dense_max: int = DENSE_MAX,
    shift: float = 1e-3,
    maxiter: int | None = None,
) -> Spectrum:
    """The ``k`` smallest eigenpairs of a symmetric operator.

    Small problems go through a dense symmetric solve.  Larger explicit
    matrices use Lanczos (ARPACK) on ``(M + shift I)^-1`` with a sparse LU
    factorisation; matrix-free operators fall back to plain Lanczos on the
    smallest algebraic end.  The start vector is drawn from ``seed``.
    Every returned pair is checked: ``|M phi - lam phi| <= tol``.
    """
    n = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise InputError("operator must be square")
    if not 1 <= k <= n:
        raise InputError(f"need 1 <= k <= n1={n}, got k={k}")
    is_op = isinstance(M, LinearOperator)
    if not is_op and (n <= dense_max or k >= n - 1):
        A = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        lam, V = sla.eigh(A, subset_by_index=[0, k - 1])
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        ncv = min(n, max(2 * k + 1, k + 20))
        if is_op:
            lam, V = _lobpcg_low(M, k, tol, seed, maxiter)
        else:
            A = sp.csc_matrix(M, dtype=float)
            lu = splu((A + shift * sp.identity(n, format="csc")).tocsc())
            OPinv = LinearOperator((n, n), matvec=lu.solve, dtype=float)
            lam, V = eigsh(A, k=k, sigma=-shift, which="LM", OPinv=OPinv, v0=v0, ncv=ncv,
                           tol=tol * 1e-4, maxiter=maxiter)
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
    V = _fix_signs(V)
    Mv = M @ V if not is_op else M.matmat(V)
    res = np.linalg.norm(Mv - V * lam, axis=0)
    if np.any(res > tol):
        raise ConvergenceError(f"eigenpairs above tolerance {tol}: max residual {res.max():.3g}", residuals=res)
    return Spectrum(eigenvalues=lam, eigenvectors=V, residuals=res)


def _lobpcg_low(M, k, tol, seed, maxiter):
    """Block method for matrix-free operators: a block wider than ``k``
    resolves repeated eigenvalues that single-vector Lanczos can miss."""
    n = M.shape[0]
    m = min(n, k + max(5, k // 2))
    X0 = np.random.default_rng(seed).standard_normal((n, m))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        lam, V = lobpcg(M, X0, largest=False, tol=tol * 1e-2, maxiter=maxiter or 5000)
    order = np.argsort(lam)[:k]
    return lam[order], V[:, order]


def estimate_betti(eigenvalues, max_consider: int = 20, floor: float = 1e-8, min_ratio: float = 10.0) -> BettiEstimate:
    """Count of eigenvalues left of the largest ratio gap.

    Eigenvalues are clipped below at ``floor`` and only the first
    ``max_consider`` take part.  A winning ratio below ``min_ratio`` is
    reported as low confidence.
    """
    lam = np.sort(np.asarray(getattr(eigenvalues, "eigenvalues", eigenvalues), dtype=float))
    if len(lam) < 2:
        raise InputError("need at least two eigenvalues to locate a gap")
    mu = np.maximum(lam[:max_consider], floor)
    ratios = mu[1:] / mu[:-1]
    i = int(np.argmax(ratios))
    beta, ratio = i + 1, float(ratios[i])
    return BettiEstimate(beta=beta, gap_ratio=ratio, confident=bool(ratio >= min_ratio))


def estimate_betti1(spectrum, **kwargs) -> BettiEstimate:
    return estimate_betti(spectrum, **kwargs)


def count_components(n_vertices: int, edges) -> int:
    """Connected components by graph search (exact integer oracle for beta_0)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    A = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_vertices, n_vertices))
    return int(connected_components(A, directed=False)[0])


def _lsq(A, rhs, tol, what):
    x, istop, itn, r1norm, r2norm, anorm, acond, arnorm = lsqr(
        A, rhs, atol=tol, btol=tol, iter_lim=max(20 * A.shape[1], 1000)
    )[:8]
    if istop in (3, 7):
        raise ConvergenceError(f"{what}: least squares hit the iteration limit", residuals=arnorm)
    return x, {"iterations": int(itn), "residual": float(r1norm), "normal_residual": float(arnorm)}


def hodge_decompose(omega, B1, B2, w1, tol: float = 1e-10) -> HodgeParts:
    """Normalised Hodge decomposition ``omega = g + r + h``.

    ``g = W1^(1/2) B1^T p`` and ``r = W1^(-1/2) B2 v`` come from least squares
    (LSQR started at zero, so ``p`` and ``v`` are minimum-norm); ``h`` is the
    remainder.  ``w1`` must already be floored.
    """
    omega = np.asarray(omega, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    if omega.shape != (B1.shape[1],):
        raise InputError(f"cochain has shape {omega.shape}, expected ({B1.shape[1]},)")
    if np.any(w1 <= 0):
        raise InputError("edge weights must be positive (floor them first)")
    s = np.sqrt(w1)
    G = (sp.diags(s) @ sp.csr_matrix(B1, dtype=float).T).tocsr()
    C = (sp.diags(1.0 / s) @ sp.csr_matrix(B2, dtype=float)).tocsr()
    info = {}
    if G.shape[1]:
        p, info["gradient"] = _lsq(G, omega, tol, "gradient potential")
    else:
        p = np.zeros(0)
    if C.shape[1]:
        v, info["curl"] = _lsq(C, omega, tol, "curl potential")
    else:
        v = np.zeros(0)
    g = G @ p if G.shape[1] else np.zeros_like(omega)
    r = C @ v if C.shape[1] else np.zeros_like(omega)
    h = omega - g - r
    return HodgeParts(gradient=g, curl=r, harmonic=h, potential=p, vorticity=v, info=info)


def classify_eigenflows(spectrum: Spectrum, down, up, tau: float | None = None, lam_max: float | None = None) -> list[str]:
    """Label each eigenvector by which half of the Helmholtzian annihilates it.

    ``down`` and ``up`` act on the same space as the eigenvectors (the
    symmetrised halves when the spectrum came from ``l1_sym``).  The
    threshold defaults to ``1e-6 * lam_max``.
    """
    V = spectrum.eigenvectors
    if tau is None:
        if lam_max is None:
            lam_max = float(max(np.max(spectrum.eigenvalues), 0.0))
            try:
                op = down + up
                lam_max = max(lam_max, float(eigsh(op, k=1, which="LA", tol=1e-3, return_eigenvectors=False)[0]))
            except Exception:  # noqa: BLE001 - estimate only, fall back to the spectrum itself
                pass
        tau = 1e-6 * lam_max
    dn = np.linalg.norm(down @ V, axis=0)
    un = np.linalg.norm(up @ V, axis=0)
    labels = []
    for d, u in zip(dn, un):
        if d <= tau and u <= tau:
            labels.append(HARMONIC)
        elif u <= tau:
            labels.append(GRADIENT)
        elif d <= tau:
            labels.append(CURL)
        else:
            labels.append(MIXED)
    spectrum.labels = labels
    return labels
