"""Seeded synthetic point clouds, vector fields and reference spectra.

Kinds: ``circle`` (unit circle in R^2), ``torus`` (ring torus in R^3),
``flat_torus`` (product of two unit circles in R^4) and ``strip``
(the square [-2, 2]^2 carrying a mixed gradient/curl field).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

KINDS = ("circle", "torus", "flat_torus", "strip")
SAMPLINGS = ("grid", "jittered", "iid")
STRIP_GRAD_WEIGHT = 0.3
STRIP_CURL_WEIGHT = 0.7


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic dataset.

    ``noise_sigma=None`` means 1% of the object scale (radius 1 for the
    circles and tori, half-width 2 for the strip).  ``jitter`` is the
    fraction of a grid cell by which ``"jittered"`` sampling perturbs each
    grid node.
    """

    kind: str
    n: int
    noise_sigma: float | None = None
    seed: int = 0
    sampling: str = "jittered"
    jitter: float = 0.3
    torus_a: float = 1.0
    torus_b: float = 0.5
    extra_noise_dims: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.sampling not in SAMPLINGS:
            raise InputError(f"unknown sampling {self.sampling!r}; expected one of {SAMPLINGS}")
        if self.n < 8:
            raise InputError(f"need n >= 8, got {self.n}")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise InputError("noise_sigma must be non-negative")
        if not 0 <= self.jitter < 1:
            raise InputError("jitter must lie in [0, 1)")
        if self.torus_a <= 0 or self.torus_b <= 0:
            raise InputError("torus radii must be positive")
        if self.extra_noise_dims < 0:
            raise InputError("extra_noise_dims must be non-negative")

    @property
    def scale(self) -> float:
        return 2.0 if self.kind == "strip" else 1.0

    @property
    def sigma(self) -> float:
        return 0.01 * self.scale if self.noise_sigma is None else float(self.noise_sigma)


def grid_shape(n: int, aspect: float = 1.0) -> tuple[int, int]:
    """Factor ``n = rows * cols`` with ``cols / rows`` closest to ``aspect``.

    Falls back to ``(rows, ceil(n / rows))`` when no exact factorisation comes
    within a factor of two of the requested aspect ratio; the caller then
    drops the surplus nodes.
    """
    best = None
    for r in range(1, int(np.sqrt(n)) + 1):
        if n % r:
            continue
        for rows, cols in ((r, n // r), (n // r, r)):
            err = abs(np.log((cols / rows) / aspect))
            if best is None or err < best[0]:
                best = (err, rows, cols)
    if best is not None and best[0] <= np.log(2.0):
        return best[1], best[2]
    rows = max(1, int(round(np.sqrt(n / aspect))))
    return rows, int(np.ceil(n / rows))


def _unit_params(spec: SyntheticSpec, rng, dims: int, aspect: float = 1.0) -> np.ndarray:
    """``n`` parameter points in ``[0, 1)^dims`` according to the sampling mode."""
    n = spec.n
    if spec.sampling == "iid":
        return rng.random((n, dims))
    if dims == 1:
        u = (np.arange(n) + 0.5) / n
        if spec.sampling == "jittered":
            u = u + spec.jitter * (rng.random(n) - 0.5) / n
        return u[:, None]
    rows, cols = grid_shape(n, aspect)
    ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    P = np.column_stack([(ii.ravel() + 0.5) / rows, (jj.ravel() + 0.5) / cols])
    if len(P) > n:
        keep = np.unique(np.round(np.linspace(0, len(P) - 1, n)).astype(int))
        P = P[keep]
    if spec.sampling == "jittered":
        P = P + spec.jitter * (rng.random(P.shape) - 0.5) / np.array([rows, cols])
    return P


def strip_field(points) -> np.ndarray:
    """``0.3 * (-x, -y) + 0.7 * (x^2 y, -x y^2)`` evaluated at each row."""
    P = np.asarray(points, dtype=float)
    x, y = P[:, 0], P[:, 1]
    grad = np.column_stack([-x, -y])
    curl = np.column_stack([x**2 * y, -x * y**2])
    return STRIP_GRAD_WEIGHT * grad + STRIP_CURL_WEIGHT * curl


def strip_gradient_part(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    return STRIP_GRAD_WEIGHT * np.column_stack([-P[:, 0], -P[:, 1]])


def strip_curl_part(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    x, y = P[:, 0], P[:, 1]
    return STRIP_CURL_WEIGHT * np.column_stack([x**2 * y, -x * y**2])


def line_integral_cochain(points, edges, field_fn, order: int = 4) -> np.ndarray:
    """``int_0^1 F(x_i + t (x_j - x_i)) . (x_j - x_i) dt`` per edge by
    Gauss-Legendre quadrature (exact for polynomial fields of degree
    ``<= 2 * order - 1``)."""
    X = np.asarray(points, dtype=float)
    E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    d = X[E[:, 1]] - X[E[:, 0]]
    out = np.zeros(len(E))
    for tk, wk in zip(t, w):
        F = field_fn(X[E[:, 0]] + tk * d)
        out += wk * np.sum(F * d, axis=1)
    return out


def generate(spec: SyntheticSpec):
    """Return ``(points, field)``; ``field`` is ``None`` except for the strip."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sigma = spec.sigma
    field = None
    if spec.kind == "circle":
        th = 2 * np.pi * _unit_params(spec, rng, 1)[:, 0]
        X = np.column_stack([np.cos(th), np.sin(th)])
    elif spec.kind == "torus":
        a, b = spec.torus_a, spec.torus_b
        P = _unit_params(spec, rng, 2, aspect=a / b)
        al, be = 2 * np.pi * P[:, 0], 2 * np.pi * P[:, 1]
        X = np.column_stack([(a + b * np.cos(al)) * np.cos(be), (a + b * np.cos(al)) * np.sin(be), a + b * np.sin(al)])
    elif spec.kind == "flat_torus":
        P = 2 * np.pi * _unit_params(spec, rng, 2)
        X = np.column_stack([np.cos(P[:, 0]), np.sin(P[:, 0]), np.cos(P[:, 1]), np.sin(P[:, 1])])
    else:
        X = 4.0 * _unit_params(spec, rng, 2) - 2.0
        field = strip_field(X)
    if sigma > 0 and spec.kind != "strip":
        # circles and tori: isotropic noise on the embedding coordinates; the strip stays planar
        X = X + sigma * rng.standard_normal(X.shape)
    if spec.extra_noise_dims:
        X = np.column_stack([X, sigma * rng.standard_normal((len(X), spec.extra_noise_dims))])
        if field is not None:
            field = np.column_stack([field, np.zeros((len(X), spec.extra_noise_dims))])
    return X, field


def flat_torus_angles(points) -> np.ndarray:
    """Recover ``(u, v)`` in ``[0, 2 pi)`` from flat-torus coordinates."""
    P = np.asarray(points, dtype=float)
    u = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2 * np.pi)
    v = np.mod(np.arctan2(P[:, 3], P[:, 2]), 2 * np.pi)
    return np.column_stack([u, v])


def true_circle_eigenvalues(k: int) -> np.ndarray:
    """First ``k`` eigenvalues of the unit circle's 1-Laplacian: ``ceil(i/2)^2``."""
    if k < 0:
        raise InputError("k must be non-negative")
    i = np.arange(k)
    return np.ceil(i / 2.0) ** 2


def true_flat_torus_eigenvalues(k: int) -> np.ndarray:
    """First ``k`` eigenvalues of the flat torus 1-Laplacian with multiplicity.

    Two harmonic zeros, then ``j^2 + m^2`` for every nonzero lattice vector
    ``(j, m)``, counted twice (one gradient and one curl eigenform each).
    """
    if k < 0:
        raise InputError("k must be non-negative")
    R = 1
    while True:
        j, m = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
        vals = (j**2 + m**2).ravel()
        vals = np.sort(vals[vals > 0])
        full = np.concatenate([[0.0, 0.0], np.repeat(vals, 2)])
        # values up to R^2 are complete inside the (2R+1)^2 box
        complete = full[full <= R * R]
        if len(complete) >= k:
            return complete[:k].astype(float)
        R *= 2


def strip_trajectories(n_traj: int = 20, n_steps: int = 200, step: float = 0.05, noise: float = 0.3, seed: int = 0):
    """Noisy walks that follow the strip field's direction, kept inside [-2, 2]^2.

    Each step moves ``step`` along the unit field direction plus isotropic
    Gaussian jitter of relative size ``noise``; starts are uniform.
    """
    if n_traj < 1 or n_steps < 2:
        raise InputError("need at least one trajectory of two or more points")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_traj):
        x = rng.uniform(-1.8, 1.8, size=2)
        path = [x.copy()]
        for _ in range(n_steps - 1):
            f = strip_field(x[None, :])[0]
            nf = np.linalg.norm(f)
            move = step * (f / nf if nf > 0 else 0.0) + noise * step * rng.standard_normal(2)
            x = np.clip(x + move, -2.0, 2.0)
            path.append(x.copy())
        out.append(np.array(path))
    return out
