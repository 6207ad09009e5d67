import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator

from helmholtzian import (
    ConvergenceError,
    InputError,
    build_vr_complex,
    classify_eigenflows,
    estimate_betti1,
    helmholtz_operators,
    hodge_decompose,
    low_spectrum,
)
from helmholtzian.spectral import count_components


def test_trivial_spectra():
    s = low_spectrum(sp.identity(5, format="csr"), 3)
    assert np.allclose(s.eigenvalues, 1.0)
    s = low_spectrum(sp.diags([0.0, 1.0, 2.0]), 2)
    assert np.allclose(s.eigenvalues, [0.0, 1.0])


def test_k_out_of_range():
    with pytest.raises(InputError):
        low_spectrum(sp.identity(3), 0)
    with pytest.raises(InputError):
        low_spectrum(sp.identity(3), 4)


def _ops(seed, n=60, delta=0.3):
    X = np.random.default_rng(seed).random((n, 2))
    cx = build_vr_complex(X, delta)
    return helmholtz_operators(X, cx, 0.25)


def test_iterative_paths_match_dense_oracle():
    ops = _ops(0, n=90, delta=0.28)
    L = ops.l1_sym
    dense = np.linalg.eigvalsh(L.toarray())[:8]
    sparse = low_spectrum(L, 8, dense_max=0)
    assert np.allclose(sparse.eigenvalues, dense, atol=1e-8)
    assert np.all(sparse.residuals <= 1e-8)
    free = low_spectrum(aslinearoperator(L), 4, dense_max=0, tol=1e-7)
    assert np.allclose(free.eigenvalues, dense[:4], atol=1e-7)


def test_seeded_runs_are_identical():
    L = _ops(1, n=90).l1_sym
    a = low_spectrum(L, 5, dense_max=0, seed=3)
    b = low_spectrum(L, 5, dense_max=0, seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_convergence_error_carries_residuals():
    L = _ops(2).l1_sym
    with pytest.raises(ConvergenceError) as info:
        low_spectrum(L, 3, tol=0.0)
    assert info.value.residuals is not None


def test_betti_gap_policy():
    est = estimate_betti1(np.array([1e-12, 1e-11, 0.5, 0.6]))
    assert est.beta == 2 and est.confident
    flat = estimate_betti1(np.array([0.5, 0.6, 0.7]))
    assert not flat.confident
    weak = estimate_betti1(np.array([0.1, 0.3, 0.5, 0.9]))
    assert not weak.confident


def test_betti_counts_only_first_twenty():
    lam = np.concatenate([np.linspace(1, 2, 25), [1e3]])
    assert estimate_betti1(lam).gap_ratio < 10
    assert estimate_betti1(np.array([0.0, 0.0, 0.0, 1.0])).beta == 3


def test_components_oracle():
    assert count_components(5, [(0, 1), (2, 3)]) == 3


def _cochains(ops, rng):
    B1 = ops.B1.astype(float)
    B2 = ops.B2.astype(float)
    s = np.sqrt(ops.w1)
    grad = s * (B1.T @ rng.standard_normal(B1.shape[0]))
    curl = (B2 @ rng.standard_normal(B2.shape[1])) / s
    return grad, curl


@pytest.mark.parametrize("seed", range(5))
def test_hodge_decomposition_is_orthogonal_and_complete(seed):
    ops = _ops(10 + seed, n=70, delta=0.32)
    omega = np.random.default_rng(seed).standard_normal(ops.n_edges)
    p = hodge_decompose(omega, ops.B1, ops.B2, ops.w1)
    nrm = omega @ omega
    assert np.linalg.norm(p.gradient + p.curl + p.harmonic - omega) <= 1e-8 * np.linalg.norm(omega)
    for x, y in ((p.gradient, p.curl), (p.gradient, p.harmonic), (p.curl, p.harmonic)):
        assert abs(x @ y) <= 1e-8 * nrm
    # harmonic part is in the kernel of the symmetrised Laplacian
    assert np.linalg.norm(ops.l1_sym @ p.harmonic) <= 1e-6 * np.linalg.norm(omega)


def test_pure_inputs_are_recovered():
    ops = _ops(20, n=70, delta=0.32)
    g, c = _cochains(ops, np.random.default_rng(0))
    pg = hodge_decompose(g, ops.B1, ops.B2, ops.w1)
    assert np.linalg.norm(pg.curl) <= 1e-6 * np.linalg.norm(g)
    assert np.linalg.norm(pg.harmonic) <= 1e-6 * np.linalg.norm(g)
    pc = hodge_decompose(c, ops.B1, ops.B2, ops.w1)
    assert np.linalg.norm(pc.gradient) <= 1e-6 * np.linalg.norm(c)
    assert np.linalg.norm(pc.harmonic) <= 1e-6 * np.linalg.norm(c)


def test_decompose_rejects_bad_input():
    ops = _ops(21)
    with pytest.raises(InputError):
        hodge_decompose(np.zeros(3), ops.B1, ops.B2, ops.w1)
    with pytest.raises(InputError):
        hodge_decompose(np.zeros(ops.n_edges), ops.B1, ops.B2, np.zeros(ops.n_edges))


def test_classification_on_annulus():
    rng = np.random.default_rng(0)
    r = rng.uniform(0.6, 1.0, 500)
    th = rng.uniform(0, 2 * np.pi, 500)
    X = np.column_stack([r * np.cos(th), r * np.sin(th)])
    cx = build_vr_complex(X, 0.2)
    ops = helmholtz_operators(X, cx, 0.15)
    spec = low_spectrum(ops.l1_sym, 6)
    labels = classify_eigenflows(spec, ops.l1s_down, ops.l1s_up)
    assert labels[0] == "harmonic"
    assert set(labels[1:]) <= {"gradient", "curl", "mixed"}
    assert estimate_betti1(spec).beta == 1
