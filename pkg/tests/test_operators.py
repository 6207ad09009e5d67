import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from helmholtzian import (
    InputError,
    assemble_down,
    assemble_graph_laplacian,
    assemble_helmholtzian,
    assemble_up,
    boundary_map_1,
    boundary_map_2,
    build_vr_complex,
    helmholtz_operators,
    manifold_helmholtzian,
    symmetrize,
)
from helmholtzian.errors import ConsistencyError
from helmholtzian.operators import to_triplets

from shapes import path3, triangle


def random_ops(seed, n=30, delta=0.45, eps=0.35, a=0.25, b=1.0, **kw):
    X = np.random.default_rng(seed).random((n, 2))
    cx = build_vr_complex(X, delta)
    return X, helmholtz_operators(X, cx, eps, a, b, **kw)


def dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def test_down_examples():
    cx = triangle()
    B1 = boundary_map_1(cx)
    single = assemble_down(sp.csc_matrix([[1], [-1]]), [1, 1], [1])
    assert dense(single).tolist() == [[2.0]]
    two = assemble_down(sp.csc_matrix([[1, 0], [-1, 0], [0, 1], [0, -1]]), np.ones(4), np.ones(2))
    assert dense(two).tolist() == [[2.0, 0.0], [0.0, 2.0]]
    D = dense(assemble_down(B1, 2 * np.ones(3), np.ones(3)))
    assert np.allclose(np.diag(D), 1.0)


def test_up_examples():
    cx = triangle()
    B2 = boundary_map_2(cx)
    U = dense(assemble_up(B2, np.ones(3), [1.0]))
    col = np.array([1.0, -1.0, 1.0])  # edges (0,1), (0,2), (1,2)
    assert np.array_equal(U, np.outer(col, col))
    cx = path3()
    U = dense(assemble_up(boundary_map_2(cx), np.ones(2), np.zeros(0)))
    assert not U.any()


def test_up_action_matches_triangle_circulation_sum():
    # brute-force loop: (B2 W2 B2^T w)_xy = sum_z w2(x,y,z) * (w_xy + w_yz + w_zx)
    X, ops = random_ops(0, n=12, delta=0.7)
    cx = ops.complex
    rng = np.random.default_rng(1)
    omega = rng.standard_normal(cx.n_edges)
    B2 = ops.B2.astype(float)
    lhs = B2 @ (ops.w2 * (B2.T @ omega))

    def val(u, v):
        return omega[cx.edge_index(u, v)] if u < v else -omega[cx.edge_index(v, u)]

    rhs = np.zeros(cx.n_edges)
    for t, (i, j, k) in enumerate(cx.triangles.tolist()):
        for x, y in ((i, j), (j, k), (i, k)):
            z = ({i, j, k} - {x, y}).pop()
            rhs[cx.edge_index(x, y)] += ops.w2[t] * (val(x, y) + val(y, z) + val(z, x))
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert np.allclose(dense(ops.l1_up) @ omega, rhs / ops.w1, atol=1e-10)


def test_helmholtzian_combination():
    _, ops = random_ops(2)
    down, up = ops.l1_down, ops.l1_up
    assert np.allclose(dense(assemble_helmholtzian(down, up, 0, 1)), dense(up))
    assert np.allclose(dense(assemble_helmholtzian(down, up, 1, 0)), dense(down))
    assert np.allclose(dense(ops.l1), dense(0.25 * down + up))
    with pytest.raises(InputError):
        assemble_helmholtzian(down, up, 0, 0)
    with pytest.raises(InputError):
        assemble_helmholtzian(down, up, -1, 1)


def test_rescaling_keeps_eigenvectors_and_scales_classes():
    X, ops1 = random_ops(3, a=1.0, b=1.0)
    _, ops2 = random_ops(3, a=0.25, b=1.0)
    S1, S2 = dense(ops1.l1_sym), dense(ops2.l1_sym)
    lam1, V1 = np.linalg.eigh(S1)
    dn = np.linalg.norm(dense(ops1.l1s_down) @ V1, axis=0)
    upn = np.linalg.norm(dense(ops1.l1s_up) @ V1, axis=0)
    for i in range(len(lam1)):
        v = V1[:, i]
        if lam1[i] < 1e-9:
            assert np.linalg.norm(S2 @ v) < 1e-8
        elif upn[i] < 1e-9:  # gradient: eigenvalue scales by a
            assert np.allclose(S2 @ v, 0.25 * lam1[i] * v, atol=1e-8)
        elif dn[i] < 1e-9:  # curl: eigenvalue unchanged (b = 1 in both)
            assert np.allclose(S2 @ v, lam1[i] * v, atol=1e-8)


def test_symmetrize_preserves_spectrum_and_maps_eigenvectors():
    _, ops = random_ops(4)
    S = dense(ops.l1_sym)
    assert np.abs(S - S.T).max() <= 1e-12 * np.abs(S).max()
    lam_s, V = np.linalg.eigh(S)
    lam = np.sort(np.linalg.eigvals(dense(ops.l1)).real)
    assert np.allclose(lam, lam_s, atol=1e-8)
    L = dense(ops.l1)
    for i in range(5):
        phi = V[:, i] / np.sqrt(ops.w1)
        assert np.allclose(L @ phi, lam_s[i] * phi, atol=1e-8 * np.linalg.norm(phi))


def test_symmetrize_is_identity_with_unit_weights():
    M = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert np.array_equal(dense(symmetrize(M, np.ones(2))), dense(M))


def test_graph_laplacian():
    L = dense(assemble_graph_laplacian(boundary_map_1(path3()), np.array([1.0, 2.0, 1.0]), np.ones(2)))
    assert np.allclose(L.sum(axis=1), 0)
    assert np.allclose(L, [[1, -1, 0], [-0.5, 1, -0.5], [0, -1, 1]])
    _, ops = random_ops(5, n=40, delta=0.5)
    from helmholtzian.spectral import count_components

    lam = np.linalg.eigvals(dense(ops.l0)).real
    beta0 = count_components(ops.complex.n_vertices, ops.complex.edges)
    assert np.sum(np.abs(lam) < 1e-9) == beta0


def test_down_up_products_vanish():
    _, ops = random_ops(6)
    assert np.abs(dense(ops.l1_down @ ops.l1_up)).max() < 1e-10
    assert np.abs(dense(ops.l1_up @ ops.l1_down)).max() < 1e-10


def _nonzero(vals, rel=1e-9):
    vals = np.sort(np.real(vals))
    return vals[vals > rel * max(vals.max(), 1.0)]


def test_spectral_dependency_and_lifting():
    _, ops = random_ops(7)
    down = symmetrize(ops.l1_down, ops.w1)
    s0 = np.sqrt(ops.w0)
    l0s = dense(sp.diags(s0) @ ops.l0 @ sp.diags(1 / s0))
    a = _nonzero(np.linalg.eigvalsh(dense(down)))
    b = _nonzero(np.linalg.eigvalsh(0.5 * (l0s + l0s.T)))
    assert len(a) == len(b)
    assert np.allclose(a, b, atol=1e-8)
    lam, V = np.linalg.eig(dense(ops.l0))
    i = int(np.argmax(lam.real))
    psi = ops.B1.T @ V[:, i].real
    assert np.allclose(dense(ops.l1_down) @ psi, lam[i].real * psi, atol=1e-8 * np.linalg.norm(psi))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(1, 1), (0.25, 1), (0.5, 1 / 3)]), st.sampled_from(["exp", "indicator"]))
def test_spectrum_range(seed, ab, kernel):
    a, b = ab
    X = np.random.default_rng(seed).random((25, 3))
    cx = build_vr_complex(X, 0.6)
    if cx.n_triangles == 0:
        return
    try:
        ops = helmholtz_operators(X, cx, 0.5, a, b, kernel)
    except InputError:  # indicator kernel may zero every triangle
        return
    lam = np.linalg.eigvalsh(dense(ops.l1_sym))
    assert lam.min() >= -1e-8
    assert lam.max() <= ops.spectrum_bound() + 1e-8


def test_matrix_free_operators_match_explicit():
    X, exp_ops = random_ops(8, n=40)
    free = helmholtz_operators(X, exp_ops.complex, 0.35, explicit_max_edges=0)
    assert not free.explicit and exp_ops.explicit
    x = np.random.default_rng(0).standard_normal(exp_ops.n_edges)
    Xb = np.random.default_rng(1).standard_normal((exp_ops.n_edges, 3))
    for name in ("l1_down", "l1_up", "l1", "l1_sym", "l1s_down", "l1s_up"):
        E, F = getattr(exp_ops, name), getattr(free, name)
        assert np.allclose(E @ x, F @ x, atol=1e-10)
        assert np.allclose(E @ Xb, F.matmat(Xb), atol=1e-10)


def test_zero_weight_is_rejected_by_assembly():
    with pytest.raises(ConsistencyError):
        assemble_down(boundary_map_1(path3()), np.array([1.0, 0.0, 1.0]), np.ones(2))


def test_pipeline_and_triplets():
    th = np.linspace(0, 2 * np.pi, 60, endpoint=False)
    X = np.column_stack([np.cos(th), np.sin(th)])
    ops = manifold_helmholtzian(X, 0.35)
    assert ops.complex.n_edges == 3 * 60
    T = to_triplets(ops.l1_sym)
    rebuilt = sp.coo_matrix((T[:, 2], (T[:, 0].astype(int), T[:, 1].astype(int))), shape=ops.l1_sym.shape)
    assert np.allclose(rebuilt.toarray(), dense(ops.l1_sym))
