"""Multigrid for block-Toeplitz and block-circulant systems generated by matrix-valued symbols."""

from ._config import USE_NUMBA
from .analysis import (
    ConditionCheckReport,
    ConditioningReport,
    check_conjecture,
    check_tgm_conditions,
    conditioning_sweep,
    estimate_contraction,
    lambda_min_second_derivative_at_zero,
    locate_zero_set,
)
from .apps import DgSpec, FemSpec, dg_system, dg_transfer, fem_matrix_1d, fem_matrix_2d, fem_symbols_1d, fem_transfer
from .mgm import MgHierarchy, SolveReport, build_hierarchy, cycle_once, make_rhs_sine, solve
from .smoother import SmootherConfig, gauss_seidel_config, jacobi_config, jacobi_omega_bound, smooth
from .structured import (
    CuttingMatrix,
    GridTransfer,
    StructuredOperator,
    build_operator,
    galerkin,
    make_transfer,
    materialize_dense,
    matvec,
)
from .symbol import (
    MatrixSymbol,
    coarse_symbol,
    evaluate,
    hermitian_eig,
    load_symbol,
    projector_symbol_pz,
    save_symbol,
    symbol_product,
)

__version__ = "0.1.0"
