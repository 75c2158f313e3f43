from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from blockmg.apps import FemSpec, fem_matrix_1d, fem_symbol_coefficients, fem_symbols_1d
from blockmg.smoother import (
    SmootherConfig,
    gauss_seidel_config,
    jacobi_config,
    jacobi_omega_bound,
    richardson_omega_bound,
    smooth,
)
from blockmg.structured import operator_from_matrix


def _spd_operator(seed, n=12):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    A = B @ B.T + n * np.eye(n)
    return operator_from_matrix(sp.csr_matrix(A), "toeplitz", (n,), 1)


def test_jacobi_bound_q2_is_seven_eighths():
    assert jacobi_omega_bound(fem_symbols_1d(2)[0]) == pytest.approx(7 / 8, abs=1e-12)
    # rational cross-check: 2 min diag(a0) / max lambda_max = 2 (14/3) / (32/3)
    a0, _ = fem_symbol_coefficients(2)["stiffness"]
    assert 2 * min(a0[0][0], a0[1][1]) / Fraction(32, 3) == Fraction(7, 8)


def test_richardson_bound_laplacian():
    f, _ = fem_symbols_1d(1)
    assert richardson_omega_bound(f) == pytest.approx(0.5, abs=1e-12)


def test_gauss_seidel_matches_triangular_solve():
    op = _spd_operator(0)
    A = op.matrix.toarray()
    rng = np.random.default_rng(1)
    x, b = rng.standard_normal(op.N), rng.standard_normal(op.N)
    expected = x + np.linalg.solve(np.tril(A), b - A @ x)
    np.testing.assert_allclose(smooth(op, x, b, gauss_seidel_config(), 1), expected, atol=1e-12)


def test_jacobi_formula_and_input_untouched():
    op = _spd_operator(2)
    A = op.matrix.toarray()
    x = np.ones(op.N)
    b = np.arange(op.N, dtype=float)
    y = smooth(op, x, b, jacobi_config(0.6), 2)
    ref = x.copy()
    for _ in range(2):
        ref = ref + 0.6 * (b - A @ ref) / np.diag(A)
    np.testing.assert_allclose(y, ref, atol=1e-12)
    np.testing.assert_array_equal(x, np.ones(op.N))


def test_richardson_and_zero_sweeps():
    op = _spd_operator(3)
    x, b = np.zeros(op.N), np.ones(op.N)
    cfg = SmootherConfig("richardson", 0.01)
    np.testing.assert_allclose(smooth(op, x, b, cfg, 1), 0.01 * b)
    np.testing.assert_array_equal(smooth(op, x, b, cfg, 0), x)


def test_config_validation():
    assert jacobi_config(7 / 8).post_omega == pytest.approx(7 / 12)
    with pytest.raises(ValueError):
        SmootherConfig("gauss_seidel", 0.9)
    with pytest.raises(ValueError):
        SmootherConfig("jacobi", 0.0)
    with pytest.raises(ValueError):
        SmootherConfig("sor")


def test_zero_diagonal_rejected():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    op = operator_from_matrix(A, "toeplitz", (2,), 1)
    with pytest.raises(ZeroDivisionError):
        smooth(op, np.zeros(2), np.ones(2), gauss_seidel_config(), 1)


@given(st.integers(0, 2**31 - 1))
def test_gauss_seidel_never_increases_energy_error(seed):
    op = _spd_operator(seed, 10)
    A = op.matrix.toarray()
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(op.N)
    x = rng.standard_normal(op.N)
    y = smooth(op, x, A @ x_true, gauss_seidel_config(), 1)
    e0, e1 = x - x_true, y - x_true
    assert e1 @ A @ e1 <= e0 @ A @ e0 * (1 + 1e-12)


@pytest.mark.parametrize("omega", [0.5, 7 / 8])
def test_jacobi_contracts_q2_below_bound(omega):
    op = fem_matrix_1d(FemSpec(2, 4))
    A = op.matrix.toarray()
    V = np.eye(op.N) - omega * A / np.diag(A)[:, None]
    w, U = np.linalg.eigh(A)
    half = (U * np.sqrt(w)) @ U.T
    assert np.linalg.norm(half @ V @ np.linalg.inv(half), 2) <= 1 + 1e-10
