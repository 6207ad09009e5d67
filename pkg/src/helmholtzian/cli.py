"""Command-line pipeline: ``helmholtzian <command> [options]``.

Every command writes its artifacts and a ``manifest.json`` into
``--output-dir``.  Options may also come from ``--config`` (JSON or
``key=value`` lines, keys spelled like the long flags without dashes);
flags given on the command line win.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 missing file,
4 malformed data file, 5 solver did not converge.  On failure an
``error.json`` is written to the output directory (when it can be created)
and the same JSON goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .complex import build_vr_complex, default_delta
from .datasets import KINDS, SAMPLINGS, SyntheticSpec, generate
from .errors import ConvergenceError, FormatError, HelmholtzianError, InputError
from .fileio import (
    FLOAT_FMT,
    file_sha256,
    read_cochain,
    read_matrix,
    read_trajectories,
    require_rows,
    write_cochain,
    write_edges,
    write_matrix,
    write_triangles,
)
from .flows import cochain_from_field, trajectory_to_cochain
from .learning import (
    HYPER_GRID,
    cross_validate,
    edge_adjacency_kernel,
    fit_laplacian_rls,
    r2_score,
    smooth_flow,
    split_edges,
)
from .operators import DEFAULT_A, DEFAULT_B, helmholtz_operators, to_triplets
from .spectral import classify_eigenflows, estimate_betti1, hodge_decompose, low_spectrum
from .weights import KERNELS, default_epsilon

log = logging.getLogger("helmholtzian")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_MISSING, EXIT_FORMAT, EXIT_CONVERGENCE = 0, 1, 2, 3, 4, 5

DEFAULTS = {
    "output_dir": ".",
    "a": DEFAULT_A,
    "b": DEFAULT_B,
    "k": 10,
    "alpha": 1.0,
    "train_ratio": 0.5,
    "folds": 5,
    "splits": 20,
    "seed": 0,
    "kernel": "exp",
    "max_edges": 5_000_000,
    "tol": 1e-8,
    "kind": "circle",
    "n": 2000,
    "sampling": "jittered",
    "lambda1": None,
    "lambda2": None,
}
FLOAT_KEYS = {"delta", "epsilon", "a", "b", "alpha", "train_ratio", "tol", "noise", "lambda1", "lambda2"}
INT_KEYS = {"k", "folds", "splits", "seed", "max_edges", "n"}


def _common(p, *, points=True):
    p.add_argument("--config", help="JSON or key=value file with default option values")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    if points:
        p.add_argument("--input", help="point cloud CSV (n rows, D columns)")
        p.add_argument("--delta", type=float, help="Rips radius (default: 1.2 x max 8-NN distance)")
        p.add_argument("--epsilon", type=float, help="kernel bandwidth (default from delta)")
        p.add_argument("--a", type=float, help="down-Laplacian weight (default 0.25)")
        p.add_argument("--b", type=float, help="up-Laplacian weight (default 1.0)")
        p.add_argument("--kernel", choices=KERNELS)
        p.add_argument("--max-edges", dest="max_edges", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmholtzian", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic point cloud (and field)")
    _common(p, points=False)
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float, help="noise sigma (default 1%% of the object scale)")
    p.add_argument("--sampling", choices=SAMPLINGS)

    p = sub.add_parser("build", help="Rips complex, weights and operators")
    _common(p)
    p.add_argument("--export-operators", dest="export_operators", action="store_true",
                   help="also write L1s as row,col,value triplets")

    for name, text in (("spectrum", "lowest eigenpairs of L1s"), ("betti", "estimate beta_1 from the spectral gap")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--k", type=int)
        p.add_argument("--tol", type=float)

    p = sub.add_parser("decompose", help="Hodge decomposition of an edge flow")
    _common(p)
    _flow_source(p)

    p = sub.add_parser("smooth", help="low-pass filter an edge flow")
    _common(p)
    _flow_source(p)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("ssl", help="LaplacianRLS edge-flow regression")
    _common(p)
    _flow_source(p)
    _ssl_options(p)

    p = sub.add_parser("trajectory", help="trajectories to an observed cochain, then SSL completion")
    _common(p)
    p.add_argument("--trajectories", required=False)
    p.add_argument("--no-interpolate", dest="no_interpolate", action="store_true")
    _ssl_options(p)
    return parser


def _flow_source(p):
    p.add_argument("--cochain", help="cochain CSV with columns i,j,value")
    p.add_argument("--field", help="vector field CSV aligned with the points")


def _ssl_options(p):
    p.add_argument("--train-ratio", dest="train_ratio", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--splits", type=int, help="number of random train/test splits")
    p.add_argument("--lambda1", type=float, help="skip CV for lambda1 when given with --lambda2")
    p.add_argument("--lambda2", type=float)


def load_config(path) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    text = open(path).read()
    try:
        cfg = json.loads(text)
        if not isinstance(cfg, dict):
            raise FormatError(f"{path}: JSON config must be an object")
    except json.JSONDecodeError:
        cfg = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}: line {lineno} is not key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            cfg[key] = val
    out = {}
    for key, val in cfg.items():
        key = key.replace("-", "_")
        try:
            if key in FLOAT_KEYS:
                val = float(val)
            elif key in INT_KEYS:
                val = int(val)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: {key} must be numeric, got {val!r}") from exc
        out[key] = val
    return out


def resolve(args) -> dict:
    """Flags over config file over built-in defaults."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    out = dict(DEFAULTS)
    out.update(cfg)
    out.update({k: v for k, v in vars(args).items() if v is not None and v is not False})
    validate(out)
    return out


def validate(cfg: dict) -> None:
    def positive(key, allow_none=True):
        v = cfg.get(key)
        if v is None and allow_none:
            return
        if v is None or not np.isfinite(v) or v <= 0:
            raise InputError(f"--{key.replace('_', '-')} must be positive, got {v}")

    for key in ("delta", "epsilon", "tol", "lambda1"):
        positive(key)
    if cfg["a"] < 0 or cfg["b"] < 0 or (cfg["a"] == 0 and cfg["b"] == 0):
        raise InputError(f"need a, b >= 0 and not both zero, got a={cfg['a']}, b={cfg['b']}")
    if cfg["k"] < 1:
        raise InputError(f"--k must be at least 1, got {cfg['k']}")
    if cfg["alpha"] < 0:
        raise InputError(f"--alpha must be non-negative, got {cfg['alpha']}")
    if not 0 < cfg["train_ratio"] <= 1:
        raise InputError(f"--train-ratio must lie in (0, 1], got {cfg['train_ratio']}")
    if cfg["folds"] < 2:
        raise InputError(f"--folds must be at least 2, got {cfg['folds']}")
    if cfg["splits"] < 1:
        raise InputError("--splits must be at least 1")
    if cfg["max_edges"] < 1:
        raise InputError("--max-edges must be at least 1")
    if cfg.get("lambda2") is not None and cfg["lambda2"] < 0:
        raise InputError("--lambda2 must be non-negative")
    if cfg["kernel"] not in KERNELS:
        raise InputError(f"unknown kernel {cfg['kernel']!r}")
    if cfg.get("noise") is not None and cfg["noise"] < 0:
        raise InputError("--noise must be non-negative")


class Run:
    """Per-invocation state: resolved config, inputs read and results."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.inputs: dict[str, str] = {}
        self.results: dict = {}
        self.artifacts: list[str] = []
        self.out = cfg["output_dir"]
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out, name)

    def read(self, key, reader, *extra):
        p = self.cfg.get(key)
        if p is None:
            raise InputError(f"--{key} is required")
        data = reader(p, *extra)
        self.inputs[key] = file_sha256(p)
        return data

    def operators(self):
        X = self.read("input", read_matrix)
        cfg = self.cfg
        delta = cfg.get("delta") or default_delta(X)
        cx = build_vr_complex(X, delta, max_edges=cfg["max_edges"])
        eps = cfg.get("epsilon") or default_epsilon(X, cx)
        ops = helmholtz_operators(X, cx, eps, cfg["a"], cfg["b"], cfg["kernel"])
        self.results.update(delta=float(delta), epsilon=float(eps), shape=list(cx.shape))
        return X, ops

    def flow(self, X, cx):
        if self.cfg.get("cochain"):
            return self.read("cochain", read_cochain, cx)
        if self.cfg.get("field"):
            F = self.read("field", read_matrix)
            require_rows(F, len(X), "field")
            return cochain_from_field(X, F, cx)
        raise InputError("give --cochain or --field")

    def manifest(self, started: float, status: str = "ok") -> dict:
        return {
            "command": self.cfg["command"],
            "status": status,
            "config": {k: v for k, v in sorted(self.cfg.items()) if k not in ("verbose",)},
            "inputs_sha256": self.inputs,
            "artifacts": self.artifacts,
            "results": self.results,
            "versions": {
                "helmholtzian": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_time_s": time.time() - started,
        }


def cmd_generate(run: Run):
    cfg = run.cfg
    spec = SyntheticSpec(kind=cfg["kind"], n=cfg["n"], noise_sigma=cfg.get("noise"), seed=cfg["seed"],
                         sampling=cfg["sampling"])
    X, F = generate(spec)
    write_matrix(run.path("points.csv"), X)
    if F is not None:
        write_matrix(run.path("field.csv"), F)
    run.results.update(n=len(X), dim=X.shape[1])


def cmd_build(run: Run):
    X, ops = run.operators()
    write_edges(run.path("edges.csv"), ops.complex)
    write_triangles(run.path("triangles.csv"), ops.complex)
    write_matrix(run.path("w0.csv"), ops.w0)
    write_matrix(run.path("w1.csv"), ops.w1)
    write_matrix(run.path("w2.csv"), ops.w2)
    if run.cfg.get("export_operators"):
        if not ops.explicit:
            raise InputError("operators are matrix-free at this size; raise the explicit threshold")
        np.savetxt(run.path("l1_sym_triplets.csv"), to_triplets(ops.l1_sym), delimiter=",",
                   fmt=["%d", "%d", FLOAT_FMT], header="row,col,value", comments="")


def _spectrum(run: Run):
    X, ops = run.operators()
    k = min(run.cfg["k"], ops.n_edges)
    if k < run.cfg["k"]:
        log.warning("k lowered to n1=%d", k)
    spec = low_spectrum(ops.l1_sym, k, tol=run.cfg["tol"], seed=run.cfg["seed"])
    labels = classify_eigenflows(spec, ops.l1s_down, ops.l1s_up)
    return ops, spec, labels


def cmd_spectrum(run: Run):
    ops, spec, labels = _spectrum(run)
    with open(run.path("eigenvalues.csv"), "w") as fh:
        fh.write("index,eigenvalue,class,residual\n")
        for i, (lam, res, lab) in enumerate(zip(spec.eigenvalues, spec.residuals, labels)):
            fh.write(f"{i},{FLOAT_FMT % lam},{lab},{FLOAT_FMT % res}\n")
    write_matrix(run.path("eigenvectors.csv"), spec.eigenvectors)
    run.results.update(eigenvalues=spec.eigenvalues.tolist(), labels=labels)


def cmd_betti(run: Run):
    ops, spec, labels = _spectrum(run)
    est = estimate_betti1(spec.eigenvalues)
    run.results.update(beta1=est.beta, gap_ratio=est.gap_ratio, confident=est.confident,
                       eigenvalues=spec.eigenvalues.tolist(), labels=labels)


def cmd_decompose(run: Run):
    X, ops = run.operators()
    omega = run.flow(X, ops.complex)
    parts = hodge_decompose(omega, ops.B1, ops.B2, ops.w1)
    for name in ("gradient", "curl", "harmonic"):
        write_cochain(run.path(f"{name}.csv"), ops.complex, getattr(parts, name))
    total = float(omega @ omega) or 1.0
    run.results.update({f"{n}_energy_fraction": float(getattr(parts, n) @ getattr(parts, n)) / total
                        for n in ("gradient", "curl", "harmonic")})


def cmd_smooth(run: Run):
    X, ops = run.operators()
    omega = run.flow(X, ops.complex)
    out = smooth_flow(omega, ops.l1_sym, run.cfg["alpha"])
    write_cochain(run.path("smoothed.csv"), ops.complex, out)
    run.results.update(alpha=run.cfg["alpha"], norm_in=float(np.linalg.norm(omega)),
                       norm_out=float(np.linalg.norm(out)))


def _ssl_fit_fn(ops, K):
    def fit(omega, mask, lambda1, lambda2):
        return fit_laplacian_rls(omega, mask, K, ops.l1_sym, lambda1, lambda2).predict()

    return fit


def _tune(run: Run, fit, omega, train):
    cfg = run.cfg
    if cfg.get("lambda1") is not None and cfg.get("lambda2") is not None:
        return {"lambda1": cfg["lambda1"], "lambda2": cfg["lambda2"]}
    grid = [{"lambda1": l1, "lambda2": l2} for l1 in HYPER_GRID for l2 in HYPER_GRID]
    best, _ = cross_validate(fit, omega, grid, folds=cfg["folds"], seed=cfg["seed"], train=train)
    return best


def cmd_ssl(run: Run):
    cfg = run.cfg
    X, ops = run.operators()
    omega = run.flow(X, ops.complex)
    n1 = ops.n_edges
    K = edge_adjacency_kernel(ops.complex)
    fit = _ssl_fit_fn(ops, K)
    best = _tune(run, fit, omega, split_edges(n1, cfg["train_ratio"], cfg["seed"]))
    scores = []
    for s in range(cfg["splits"]):
        mask = split_edges(n1, cfg["train_ratio"], cfg["seed"] + s)
        model = fit_laplacian_rls(omega, mask, K, ops.l1_sym, best["lambda1"], best["lambda2"])
        pred = model.predict()
        scores.append(r2_score(pred, omega, ~mask) if (~mask).any() else r2_score(pred, omega))
        if s == 0:
            write_cochain(run.path("predictions.csv"), ops.complex, pred)
            write_matrix(run.path("coefficients.csv"), model.coefficients)
    metrics = {
        "train_ratio": cfg["train_ratio"],
        "r2_median": float(np.median(scores)),
        "r2_p5": float(np.percentile(scores, 5)),
        "r2_p95": float(np.percentile(scores, 95)),
        "seed": cfg["seed"],
    }
    with open(run.path("metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2)
    run.results.update(metrics, lambda1=best["lambda1"], lambda2=best["lambda2"])


def cmd_trajectory(run: Run):
    cfg = run.cfg
    X, ops = run.operators()
    trajs = run.read("trajectories", read_trajectories)
    for t in trajs:
        if t.shape[1] != X.shape[1]:
            raise InputError(f"trajectory dimension {t.shape[1]} differs from point dimension {X.shape[1]}")
    obs = trajectory_to_cochain(trajs, X, ops.complex)
    write_cochain(run.path("observed.csv"), ops.complex, obs.values)
    write_matrix(run.path("observed_mask.csv"), obs.mask.astype(float))
    run.results.update(n_observed=int(obs.mask.sum()), n_steps=obs.n_steps, n_skipped=obs.n_skipped)
    if cfg.get("no_interpolate"):
        return
    K = edge_adjacency_kernel(ops.complex)
    fit = _ssl_fit_fn(ops, K)
    if obs.mask.sum() < cfg["folds"]:
        raise InputError("too few observed edges for cross-validation; pass --lambda1 and --lambda2")
    best = _tune(run, fit, obs.values, obs.mask)
    pred = fit(obs.values, obs.mask, best["lambda1"], best["lambda2"])
    write_cochain(run.path("interpolated.csv"), ops.complex, pred)
    run.results.update(lambda1=best["lambda1"], lambda2=best["lambda2"])


COMMANDS = {
    "generate": cmd_generate,
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "betti": cmd_betti,
    "decompose": cmd_decompose,
    "smooth": cmd_smooth,
    "ssl": cmd_ssl,
    "trajectory": cmd_trajectory,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING
    if isinstance(exc, FormatError):
        return EXIT_FORMAT
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (InputError, HelmholtzianError, ValueError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    run = None
    try:
        cfg = resolve(args)
        run = Run(cfg)
        COMMANDS[cfg["command"]](run)
        with open(os.path.join(run.out, "manifest.json"), "w") as fh:
            json.dump(run.manifest(started), fh, indent=2, default=str)
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error JSON
        code = _exit_code(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": args.command}
        if isinstance(exc, ConvergenceError) and exc.residuals is not None:
            err["residuals"] = np.atleast_1d(exc.residuals).tolist()
        out_dir = run.out if run is not None else getattr(args, "output_dir", None)
        if out_dir:
            try:
                os.makedirs(out_dir, exist_ok=True)
                with open(os.path.join(out_dir, "error.json"), "w") as fh:
                    json.dump(err, fh, indent=2)
            except OSError:
                pass
        print(json.dumps(err), file=sys.stderr)
        if code == EXIT_INTERNAL:
            log.exception("internal error")
        return code


if __name__ == "__main__":
    sys.exit(main())
