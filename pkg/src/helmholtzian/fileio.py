"""Plain CSV readers and writers for points, fields, cochains and trajectories.

Every table is comma separated; a single non-numeric first line is treated as
a header.  Floats are written with ``%.17g`` so values round-trip exactly.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from .complex import Complex2
from .errors import FormatError, InputError

FLOAT_FMT = "%.17g"


def _load_table(path, min_cols: int = 1) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if lines:
        try:
            [float(x) for x in lines[0].split(",")]
        except ValueError:
            lines = lines[1:]
    if not lines:
        raise FormatError(f"{path}: no data rows")
    rows = []
    width = None
    for lineno, ln in enumerate(lines, 1):
        try:
            row = [float(x) for x in ln.split(",")]
        except ValueError as exc:
            raise FormatError(f"{path}: row {lineno} is not numeric: {ln[:60]!r}") from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        rows.append(row)
    if width < min_cols:
        raise FormatError(f"{path}: need at least {min_cols} columns, got {width}")
    A = np.array(rows, dtype=float)
    if not np.all(np.isfinite(A)):
        raise FormatError(f"{path}: non-finite entries")
    return A


def read_matrix(path) -> np.ndarray:
    """An ``n x D`` point cloud or vector field."""
    return _load_table(path)


def write_matrix(path, M, header: str | None = None) -> None:
    M = np.asarray(M, dtype=float)
    M = M[:, None] if M.ndim == 1 else M
    np.savetxt(path, M, delimiter=",", fmt=FLOAT_FMT, header=header or "", comments="")


def write_cochain(path, cx: Complex2, omega) -> None:
    omega = np.asarray(omega, dtype=float)
    with open(path, "w") as fh:
        fh.write("i,j,value\n")
        for (i, j), v in zip(cx.edges, omega):
            fh.write(f"{i},{j},{FLOAT_FMT % v}\n")


def read_cochain(path, cx: Complex2) -> np.ndarray:
    """Values keyed by ``i,j``; edges stored as ``j,i`` are negated, missing edges are zero."""
    A = _load_table(path, min_cols=3)
    ij = A[:, :2]
    if np.any(ij != np.round(ij)):
        raise FormatError(f"{path}: vertex columns must be integers")
    i, j = ij[:, 0].astype(np.int64), ij[:, 1].astype(np.int64)
    sign = np.where(i < j, 1.0, -1.0)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    if np.any(lo == hi) or np.any(lo < 0) or np.any(hi >= cx.n_vertices):
        raise FormatError(f"{path}: invalid vertex pair")
    e = cx.edge_index(lo, hi)
    if np.any(e < 0):
        raise FormatError(f"{path}: {int(np.sum(e < 0))} rows name pairs that are not edges of the complex")
    out = np.zeros(cx.n_edges)
    np.add.at(out, e, sign * A[:, 2])
    return out


def write_edges(path, cx: Complex2) -> None:
    np.savetxt(path, cx.edges, delimiter=",", fmt="%d", header="i,j", comments="")


def write_triangles(path, cx: Complex2) -> None:
    np.savetxt(path, cx.triangles.reshape(-1, 3), delimiter=",", fmt="%d", header="i,j,k", comments="")


def read_trajectories(path) -> list[np.ndarray]:
    """Rows ``traj_id,t,coord_0..`` grouped by id (first-seen order) and sorted by ``t``."""
    A = _load_table(path, min_cols=3)
    ids = A[:, 0]
    _, first = np.unique(ids, return_index=True)
    out = []
    for tid in ids[np.sort(first)]:
        rows = A[ids == tid]
        rows = rows[np.argsort(rows[:, 1], kind="stable")]
        out.append(rows[:, 2:])
    return out


def write_trajectories(path, trajectories) -> None:
    with open(path, "w") as fh:
        D = np.asarray(trajectories[0]).shape[1]
        fh.write("traj_id,t," + ",".join(f"coord_{d}" for d in range(D)) + "\n")
        for tid, traj in enumerate(trajectories):
            for t, row in enumerate(np.asarray(traj, dtype=float)):
                fh.write(f"{tid},{t}," + ",".join(FLOAT_FMT % x for x in row) + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def require_rows(M: np.ndarray, n: int, what: str) -> None:
    if len(M) != n:
        raise InputError(f"{what} has {len(M)} rows, expected {n}")
