import json

import numpy as np
import pytest
import scipy.sparse as sp

from blockmg.apps import FemSpec, fem_matrix_1d, fem_symbols_1d
from blockmg.mgm import SingularCoarseOperator, build_hierarchy, cycle_once, make_rhs_sine, solve
from blockmg.smoother import gauss_seidel_config, jacobi_config
from blockmg.structured import build_operator, operator_from_matrix
from blockmg.symbol import MatrixSymbol, coarse_symbol, projector_symbol_pz


def q2(t, cut=False):
    return fem_matrix_1d(FemSpec(2, t), cut=cut)


def test_two_grid_has_one_transfer():
    h = build_hierarchy(q2(6), projector_symbol_pz(2, 1), cycle="tgm")
    assert h.depth == 2 and h.levels[0].transfer is not None and h.levels[1].transfer is None
    assert h.dims == [126, 62]


def test_v_cycle_coarsens_to_threshold():
    h = build_hierarchy(q2(6), projector_symbol_pz(2, 2), cycle="v")
    assert [s[0] for s in h.sizes] == [63, 31, 15, 7, 3]
    with pytest.raises(ValueError):
        build_hierarchy(q2(4), projector_symbol_pz(2, 2), cycle="w")


def test_circulant_chain_follows_coarse_symbols():
    f, _ = fem_symbols_1d(2)
    shifted = MatrixSymbol(1, 2, {**f.coeffs, (0,): f.coefficient((0,)) + np.eye(2)}, hermitian=True)
    p = projector_symbol_pz(2, 2)
    h = build_hierarchy(build_operator(shifted, 16, "circulant"), p, cycle="v")
    assert [s[0] for s in h.sizes] == [16, 8, 4, 2]
    sym = shifted
    for lvl in h.levels[1:]:
        sym = coarse_symbol(sym, p)
        ref = build_operator(sym, lvl.op.sizes[0], "circulant").matrix.toarray()
        np.testing.assert_allclose(lvl.op.matrix.toarray(), ref, atol=1e-10 * np.abs(ref).max())


def test_exact_coarse_solve_gives_exact_cycle_on_coarsest():
    h = build_hierarchy(q2(3), projector_symbol_pz(2, 1), cycle="tgm")
    coarse = h.levels[-1].op
    b = np.arange(coarse.N, dtype=float)
    np.testing.assert_allclose(coarse.matrix @ cycle_once(h, 1, np.zeros(coarse.N), b), b, atol=1e-10)


@pytest.mark.parametrize("z", [1, 3, 5])
def test_q2_two_grid_gauss_seidel_count(z):
    op = q2(5)
    _, b = make_rhs_sine(op)
    rep = solve(build_hierarchy(op, projector_symbol_pz(2, z), gauss_seidel_config(), "tgm"), b)
    assert rep.converged and rep.iterations == 15
    assert rep.residual_history[-1] <= 1e-7 < rep.residual_history[-2]


def test_jacobi_two_grid_count():
    op = q2(6)
    _, b = make_rhs_sine(op)
    rep = solve(build_hierarchy(op, projector_symbol_pz(2, 2), jacobi_config(7 / 8), "tgm"), b)
    assert rep.iterations == 33


def test_solve_report_contents():
    op = q2(4)
    x_true, b = make_rhs_sine(op)
    h = build_hierarchy(op, projector_symbol_pz(2, 3), cycle="v")
    rep = solve(h, b, x_true=x_true)
    assert rep.final_error_A_norm < 1e-5
    d = json.loads(rep.to_json())
    assert "solution" not in d and d["iterations"] == rep.iterations
    assert rep.to_csv().splitlines()[0] == "iteration,relative_residual"
    assert len(rep.to_csv().splitlines()) == rep.iterations + 2


def test_max_iter_and_exact_start():
    op = q2(5)
    x_true, b = make_rhs_sine(op)
    h = build_hierarchy(op, projector_symbol_pz(2, 1), cycle="v")
    rep = solve(h, b, max_iter=3)
    assert not rep.converged and rep.count_label == "3+"
    assert solve(h, b, x0=x_true).iterations == 0
    with pytest.raises(ValueError):
        solve(h, b, tol=0)


def test_zero_rhs_converges_immediately():
    op = q2(4)
    h = build_hierarchy(op, projector_symbol_pz(2, 1), cycle="tgm")
    assert solve(h, np.zeros(op.N)).iterations == 0


def test_singular_coarse_operator():
    f, _ = fem_symbols_1d(1)
    op = build_operator(f, 8, "circulant")
    with pytest.raises(SingularCoarseOperator):
        build_hierarchy(op, projector_symbol_pz(1, 1), cycle="v")
    op = operator_from_matrix(sp.csr_matrix(np.zeros((6, 6))), "toeplitz", (3,), 2)
    with pytest.raises(SingularCoarseOperator):
        build_hierarchy(op, projector_symbol_pz(2, 1), cycle="v")


def test_residuals_decrease_monotonically_for_v_cycle():
    op = q2(7)
    _, b = make_rhs_sine(op)
    rep = solve(build_hierarchy(op, projector_symbol_pz(2, 3), cycle="v"), b)
    hist = np.array(rep.residual_history)
    assert np.all(hist[1:] < hist[:-1])
