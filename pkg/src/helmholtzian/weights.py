"""Triangle kernel weights and their propagation to edges and vertices."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .complex import Complex2, as_point_cloud, boundary_map_1, boundary_map_2, edge_lengths
from .errors import InputError

log = logging.getLogger(__name__)

KERNELS = ("exp", "indicator")
WEIGHT_FLOOR_REL = 1e-12


def _kernel(u: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "exp":
        return np.exp(-u)
    if kernel == "indicator":
        return (u < 1.0).astype(float)
    raise InputError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")


@dataclass(frozen=True)
class WeightSet:
    """Diagonal weights on triangles (``w2``), edges (``w1``) and vertices (``w0``).

    These are the raw propagated sums; zero entries are kept so callers can
    see empty stars.  Use :func:`floor_weights` before inverting.
    """

    w0: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    epsilon: float
    kernel: str = "exp"


def triangle_weights(points, cx: Complex2, epsilon: float, kernel: str = "exp") -> np.ndarray:
    """Product of the three pairwise edge kernels ``kappa(|x - y|^2 / eps^2)``."""
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if kernel not in KERNELS:
        raise InputError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    X = as_point_cloud(points)
    T = cx.triangles
    if len(T) == 0:
        return np.zeros(0)
    a, b, c = X[T[:, 0]], X[T[:, 1]], X[T[:, 2]]
    inv = 1.0 / epsilon**2
    u_ab = np.sum((a - b) ** 2, axis=1) * inv
    u_ac = np.sum((a - c) ** 2, axis=1) * inv
    u_bc = np.sum((b - c) ** 2, axis=1) * inv
    return _kernel(u_ab, kernel) * _kernel(u_ac, kernel) * _kernel(u_bc, kernel)


def propagate_edge_weights(B2, w2) -> np.ndarray:
    """``w1[e]`` = sum of ``w2`` over the triangles containing ``e``."""
    w2 = np.asarray(w2, dtype=float)
    if B2.shape[1] != len(w2):
        raise InputError(f"B2 has {B2.shape[1]} columns but {len(w2)} triangle weights were given")
    return abs(B2).astype(float) @ w2


def propagate_vertex_weights(B1, w1) -> np.ndarray:
    """``w0[v]`` = sum of ``w1`` over the edges incident to ``v``."""
    w1 = np.asarray(w1, dtype=float)
    if B1.shape[1] != len(w1):
        raise InputError(f"B1 has {B1.shape[1]} columns but {len(w1)} edge weights were given")
    return abs(B1).astype(float) @ w1


def compute_weights(points, cx: Complex2, epsilon: float, kernel: str = "exp", B1=None, B2=None) -> WeightSet:
    """Triangle weights followed by their propagation down to edges and vertices."""
    B1 = boundary_map_1(cx) if B1 is None else B1
    B2 = boundary_map_2(cx) if B2 is None else B2
    w2 = triangle_weights(points, cx, epsilon, kernel)
    w1 = propagate_edge_weights(B2, w2)
    w0 = propagate_vertex_weights(B1, w1)
    return WeightSet(w0=w0, w1=w1, w2=w2, epsilon=float(epsilon), kernel=kernel)


def floor_weights(w, name: str = "weights", rel: float = WEIGHT_FLOOR_REL):
    """Clamp entries below ``rel * max(w)`` up to that floor.

    Returns ``(floored, clamped_indices)``.  Clamped simplices are reported
    through the module logger since they usually mean degenerate geometry
    (an edge in no triangle, an isolated vertex).
    """
    w = np.asarray(w, dtype=float)
    if len(w) == 0:
        return w.copy(), np.empty(0, dtype=np.int64)
    top = float(w.max())
    if not np.isfinite(top) or top <= 0:
        raise InputError(f"{name}: all weights are zero, nothing to normalise by")
    floor = rel * top
    clamped = np.flatnonzero(w < floor)
    out = np.maximum(w, floor)
    if len(clamped):
        preview = clamped[:10].tolist()
        log.warning("%s: clamped %d entries to %.3g (first indices %s)", name, len(clamped), floor, preview)
    return out, clamped


def default_epsilon(points, cx: Complex2) -> float:
    """Kernel bandwidth from the Rips radius: ``m * (delta / m) ** (2/3)``.

    ``m`` is the median edge length, which makes the ``delta ** (2/3)`` rule
    scale-free.
    """
    if cx.delta is None:
        raise InputError("complex has no recorded delta; pass epsilon explicitly")
    if cx.n_edges == 0:
        raise InputError("complex has no edges; cannot derive a bandwidth")
    m = float(np.median(edge_lengths(points, cx)))
    return m * (cx.delta / m) ** (2.0 / 3.0)
