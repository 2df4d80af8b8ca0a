import numpy as np
import pytest

from mup_spectral.linalg import (
    EigenDecomposition,
    frobenius_norm,
    matrix_fractional_power,
    newton_schulz_orthogonalize,
    numerical_rank,
    spectral_norm,
    spectral_norm_power,
    sym_eig,
)
from oracles import svd_polar_factor, svd_spectral_norm


def test_frobenius_all_ones():
    assert frobenius_norm(np.ones((2, 3))) == pytest.approx(np.sqrt(6), abs=1e-14)


def test_frobenius_outer_product():
    u = np.array([[2.0], [0.0]])
    v = np.array([[3.0], [4.0]])
    assert frobenius_norm(u @ v.T) == pytest.approx(10.0, abs=1e-12)


def test_frobenius_identity():
    assert frobenius_norm(np.eye(3)) == pytest.approx(np.sqrt(3), abs=1e-14)


def test_frobenius_zero_iff_zero_matrix():
    assert frobenius_norm(np.zeros((3, 2))) == 0.0
    assert frobenius_norm(np.full((3, 2), 1e-300)) > 0.0


def test_spectral_identity():
    res = spectral_norm_power(np.eye(5))
    assert res.converged
    assert res.value == pytest.approx(1.0, abs=1e-12)


def test_spectral_rank_one_equals_frobenius():
    u = np.array([[2.0], [0.0]])
    v = np.array([[3.0], [4.0]])
    a = u @ v.T
    assert spectral_norm(a) == pytest.approx(10.0, rel=1e-10)
    assert abs(spectral_norm(a) - frobenius_norm(a)) <= 1e-8 * frobenius_norm(a)


def test_spectral_gaussian_matches_svd_oracle():
    rng = np.random.default_rng(42)
    a = rng.standard_normal((200, 100))
    oracle = svd_spectral_norm(a)
    got = spectral_norm_power(a)
    assert got.converged
    assert got.value == pytest.approx(oracle, rel=1e-6)
    # concentration anchor for a unit-variance random matrix
    assert abs(got.value - (np.sqrt(200) + np.sqrt(100))) < 0.1 * (np.sqrt(200) + np.sqrt(100))


def test_spectral_zero_matrix():
    res = spectral_norm_power(np.zeros((4, 3)))
    assert res.value == 0.0 and res.converged


def test_spectral_rejects_bad_args():
    with pytest.raises(ValueError):
        spectral_norm(np.ones((2, 2)), tol=0.0)
    with pytest.raises(ValueError):
        spectral_norm(np.ones((2, 2)), max_iter=0)


def test_norm_ordering_property():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m, n = rng.integers(1, 30, size=2)
        a = rng.standard_normal((m, n))
        spec = spectral_norm(a)
        fro = frobenius_norm(a)
        assert spec <= fro * (1 + 1e-9)
        assert fro <= np.sqrt(min(m, n)) * spec * (1 + 1e-9)


def test_sym_eig_diagonal():
    e = sym_eig(np.diag([3.0, 1.0]))
    assert np.allclose(e.eigenvalues, [3.0, 1.0])
    assert np.allclose(np.abs(e.eigenvectors), np.eye(2), atol=1e-12)


def test_sym_eig_analytic_2x2():
    e = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(e.eigenvalues, [3.0, 1.0], atol=1e-12)


def test_sym_eig_identity():
    e = sym_eig(np.eye(4))
    assert np.allclose(e.eigenvalues, 1.0)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_eig_invariants_random():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((40, 40))
    s = 0.5 * (a + a.T)
    e = sym_eig(s)
    assert isinstance(e, EigenDecomposition)
    assert np.all(np.diff(e.eigenvalues) <= 1e-12)
    v = e.eigenvectors
    assert np.max(np.abs(v.T @ v - np.eye(40))) <= 1e-10
    rec = (v * e.eigenvalues) @ v.T
    assert np.linalg.norm(rec - s) <= 1e-8 * np.linalg.norm(s)


def test_fractional_power_identity():
    out = matrix_fractional_power(np.eye(3), -0.25)
    assert np.allclose(out, np.eye(3), atol=1e-12)


def test_fractional_power_pseudo_convention():
    out = matrix_fractional_power(np.diag([16.0, 0.0]), -0.25, rank_tol=1e-12)
    assert np.allclose(out, np.diag([0.5, 0.0]), atol=1e-12)


def test_fractional_power_rank_one_spectral_identity():
    rng = np.random.default_rng(5)
    u = rng.standard_normal((6, 1))
    a = u @ u.T
    for p in (0.5, 2.0, -0.25):
        lhs = spectral_norm(matrix_fractional_power(a, p))
        rhs = spectral_norm(a) ** p
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_fractional_power_rejects_indefinite():
    with pytest.raises(ValueError, match="PSD"):
        matrix_fractional_power(np.diag([1.0, -1.0]), 0.5)


def test_eigen_round_trip():
    rng = np.random.default_rng(11)
    b = rng.standard_normal((12, 12))
    s = b @ b.T
    back = matrix_fractional_power(s, 1.0)
    assert np.linalg.norm(back - s) <= 1e-8 * np.linalg.norm(s)
    sq = matrix_fractional_power(s, 0.5)
    again = matrix_fractional_power(sq, 2.0)
    assert np.linalg.norm(again - s) <= 1e-7 * np.linalg.norm(s)


def test_newton_schulz_orthonormal_rows_recovered():
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 4)))
    g = q.T  # 4x6 with orthonormal rows: a fixed point up to the pre-normalization
    res = newton_schulz_orthogonalize(g)
    assert res.converged
    assert np.max(np.abs(res.matrix - g)) <= 2e-3


def test_newton_schulz_diagonal_to_identity():
    res = newton_schulz_orthogonalize(np.diag([5.0, 0.1]))
    assert res.converged
    assert np.max(np.abs(res.matrix - np.eye(2))) <= 2e-3
    oracle = svd_polar_factor(np.diag([5.0, 0.1]))
    assert np.max(np.abs(res.matrix - oracle)) <= 2e-3


def test_newton_schulz_rank_one():
    rng = np.random.default_rng(9)
    u = rng.standard_normal((7, 1))
    v = rng.standard_normal((3, 1))
    g = u @ v.T
    res = newton_schulz_orthogonalize(g)
    expected = g / (np.linalg.norm(u) * np.linalg.norm(v))
    assert res.converged
    assert np.max(np.abs(res.matrix - expected)) <= 1e-6


def test_newton_schulz_matches_svd_oracle_generic():
    rng = np.random.default_rng(12)
    g = rng.standard_normal((10, 6))
    res = newton_schulz_orthogonalize(g)
    assert res.converged
    oracle = svd_polar_factor(g)
    assert np.max(np.abs(res.matrix - oracle)) <= 5e-3


def test_newton_schulz_idempotent():
    rng = np.random.default_rng(13)
    g = rng.standard_normal((5, 8))
    first = newton_schulz_orthogonalize(g)
    second = newton_schulz_orthogonalize(first.matrix)
    assert spectral_norm(second.matrix - first.matrix) <= 1e-3


def test_newton_schulz_rejects_zero():
    with pytest.raises(ValueError, match="zero"):
        newton_schulz_orthogonalize(np.zeros((3, 3)))


def test_newton_schulz_nonconvergence_flagged():
    res = newton_schulz_orthogonalize(np.diag([1.0, 1e-6]), iters=2)
    assert not res.converged


def test_numerical_rank():
    rng = np.random.default_rng(21)
    u = rng.standard_normal((8, 2))
    v = rng.standard_normal((5, 2))
    assert numerical_rank(u @ v.T) == 2
    assert numerical_rank(np.zeros((4, 4))) == 0
    assert numerical_rank(np.eye(6)) == 6


def test_matrix_validation():
    with pytest.raises(ValueError, match="non-finite"):
        frobenius_norm(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError, match="2-D"):
        frobenius_norm(np.ones(3))
