"""Application operators: Lagrangian FEM (1D/2D) and staggered-DG Toeplitz systems.

The 1D ``Q_deg`` stiffness and mass symbols are obtained by assembling
the reference element on ``[0, 1]`` with equispaced nodes.  Each period of
unknowns holds the ``deg - 1`` interior nodes of an element (left to right)
followed by its right endpoint, so ``a_1`` couples a block to the right
endpoint of the previous element.  Element integrals are evaluated in exact
rational arithmetic.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .structured import SmallOperatorWarning, build_operator, kron_operator, make_transfer
from .symbol import (
    MatrixSymbol,
    eigvalsh_grid,
    load_symbol,
    projector_symbol_pz,
    sup_norm,
    symbol_product,
    symbol_to_dict,
    uniform_grid,
)

__all__ = [
    "FemSpec",
    "DgSpec",
    "element_matrices",
    "fem_symbol_coefficients",
    "fem_symbols_1d",
    "fem_matrix_1d",
    "fem_matrix_2d",
    "fem_transfer",
    "load_dg_symbol",
    "validate_dg_symbol",
    "dg_system",
    "dg_transfer",
    "dg_projector_symbol",
    "synthetic_dg_symbol",
    "DgValidationError",
    "write_synthetic_dg",
    "MAX_DEG",
]

MAX_DEG = 6


@dataclass(frozen=True)
class FemSpec:
    deg: int
    t: int
    dimension: int = 1

    def __post_init__(self):
        if not 1 <= self.deg <= MAX_DEG:
            raise ValueError(f"deg must be in 1..{MAX_DEG}, got {self.deg}")
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def n(self):
        return 2**self.t - 1


# -- exact polynomial helpers (coefficients in increasing powers) ----------


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _pder(a):
    return [i * c for i, c in enumerate(a)][1:] or [Fraction(0)]


def _pint01(a):
    return sum((c / (i + 1) for i, c in enumerate(a)), Fraction(0))


@lru_cache(maxsize=None)
def element_matrices(deg):
    """Exact reference-element stiffness and mass matrices on ``[0, 1]``.

    Rows and columns follow the local node order ``0, 1/deg, ..., 1``.
    Returned as nested tuples of :class:`fractions.Fraction`.
    """
    if not 1 <= deg <= MAX_DEG:
        raise ValueError(f"unsupported degree {deg}")
    nodes = [Fraction(k, deg) for k in range(deg + 1)]
    basis = []
    for k, xk in enumerate(nodes):
        poly = [Fraction(1)]
        for m, xm in enumerate(nodes):
            if m != k:
                poly = _pmul(poly, [-xm / (xk - xm), 1 / (xk - xm)])
        basis.append(poly)
    deriv = [_pder(p) for p in basis]
    size = deg + 1
    K = tuple(tuple(_pint01(_pmul(deriv[a], deriv[b])) for b in range(size)) for a in range(size))
    M = tuple(tuple(_pint01(_pmul(basis[a], basis[b])) for b in range(size)) for a in range(size))
    return K, M


def _periodic_blocks(E):
    d = len(E) - 1
    a0 = [[E[1 + r][1 + c] for c in range(d)] for r in range(d)]
    a0[d - 1][d - 1] += E[0][0]
    a1 = [[Fraction(0)] * d for _ in range(d)]
    for r in range(d):
        a1[r][d - 1] = E[1 + r][0]
    return a0, a1


def fem_symbol_coefficients(deg):
    """Exact ``(a0, a1)`` for stiffness and mass: ``{'stiffness': (a0, a1), 'mass': (a0, a1)}``."""
    K, M = element_matrices(deg)
    return {"stiffness": _periodic_blocks(K), "mass": _periodic_blocks(M)}


def _to_symbol(a0, a1):
    a0 = np.array(a0, dtype=float)
    a1 = np.array(a1, dtype=float)
    return MatrixSymbol(1, a0.shape[0], {(0,): a0, (1,): a1, (-1,): a1.T}, hermitian=True)


def fem_symbols_1d(deg):
    """Stiffness symbol ``f`` and mass symbol ``h`` of the 1D ``Q_deg`` discretization.

    Both are ``deg x deg`` with ``f(theta) = a0 + a1 e^{i theta} + a1^T e^{-i theta}``.
    """
    coeffs = fem_symbol_coefficients(deg)
    return _to_symbol(*coeffs["stiffness"]), _to_symbol(*coeffs["mass"])


def _check_spec(spec, dimension):
    if spec.dimension != dimension:
        raise ValueError(f"expected a {dimension}D spec")


def fem_matrix_1d(spec, cut=True):
    """``T_n(f)``, cut by default (size ``deg n - 1``); ``cut=False`` keeps size ``deg n``."""
    _check_spec(spec, 1)
    f, _ = fem_symbols_1d(spec.deg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallOperatorWarning)
        return build_operator(f, spec.n, "toeplitz", cut=cut, label=f"Q{spec.deg} 1D t={spec.t}")


def fem_matrix_2d(spec):
    """``K (x) M + M (x) K`` with cut 1D stiffness ``K`` and mass ``M``; size ``(deg n - 1)^2``."""
    _check_spec(spec, 2)
    f, h = fem_symbols_1d(spec.deg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallOperatorWarning)
        K = build_operator(f, spec.n, "toeplitz", cut=True).matrix
        M = build_operator(h, spec.n, "toeplitz", cut=True).matrix
    A = kron_operator([K, M], "toeplitz", (spec.n, spec.n), spec.deg, (True, True)).matrix
    A = A + kron_operator([M, K], "toeplitz", (spec.n, spec.n), spec.deg, (True, True)).matrix
    return kron_operator([A], "toeplitz", (spec.n, spec.n), spec.deg, (True, True), label=f"Q{spec.deg} 2D t={spec.t}")


def fem_transfer(spec, z, cut=True):
    """Transfer built from ``p_z`` matching :func:`fem_matrix_1d` / :func:`fem_matrix_2d`."""
    p = projector_symbol_pz(spec.deg, z)
    if spec.dimension == 1:
        return make_transfer(p, (spec.n,), "toeplitz", cut, spec.deg)
    return make_transfer(p, (spec.n, spec.n), "toeplitz", (True, True), spec.deg)


# -- staggered DG ----------------------------------------------------------

DG_BLOCK = 9
DG_OFFSETS = {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}


class DgValidationError(ValueError):
    """Coefficient file does not describe an admissible DG pressure symbol."""


@dataclass(frozen=True)
class DgSpec:
    coefficient_file: Optional[Path]
    t: int

    @property
    def n(self):
        return 2**self.t - 1


def validate_dg_symbol(sym, zero_tol=1e-10, grid=64):
    """Check the DG symbol is Hermitian, 2-level, 9x9, cross-shaped, with an order-2 zero at the origin."""
    if sym.levels != 2 or sym.d != DG_BLOCK:
        raise DgValidationError(f"expected a 2-level {DG_BLOCK}x{DG_BLOCK} symbol")
    extra = {off for off, m in sym.coeffs.items() if np.any(m)} - DG_OFFSETS
    if extra:
        raise DgValidationError(f"unexpected offsets {sorted(extra)}")
    try:
        sym = MatrixSymbol(2, DG_BLOCK, sym.coeffs, hermitian=True)
    except ValueError as exc:
        raise DgValidationError(str(exc)) from exc
    norm = sup_norm(sym, grid)
    if norm == 0:
        raise DgValidationError("symbol vanishes identically")
    lam0 = eigvalsh_grid(sym, np.zeros(2))[0]
    if abs(lam0) > zero_tol * norm:
        raise DgValidationError(f"lambda_min(f(0)) = {lam0:.3e} is not zero")
    pts = uniform_grid(2, grid)
    lam = eigvalsh_grid(sym, pts)[:, 0]
    away = np.linalg.norm(pts, axis=1) > 1e-12
    if lam[away].min() <= zero_tol * norm:
        raise DgValidationError("lambda_min(f) vanishes away from the origin")
    # order two: lambda_min(f(h u)) / h^2 settles to a positive limit along each direction
    for u in ((1.0, 0.0), (0.0, 1.0), (np.sqrt(0.5), np.sqrt(0.5))):
        u = np.array(u)
        q = [eigvalsh_grid(sym, h * u)[0] / h**2 for h in (1e-2, 5e-3)]
        if q[1] <= 0 or abs(q[0] - q[1]) > 0.05 * q[1]:
            raise DgValidationError("lambda_min(f) does not have a zero of order two at the origin")
    return sym


def load_dg_symbol(path):
    try:
        sym = load_symbol(path)
    except (ValueError, KeyError, OSError) as exc:
        raise DgValidationError(f"cannot load {path}: {exc}") from exc
    return validate_dg_symbol(sym)


def _dg_symbol_of(spec_or_symbol):
    if isinstance(spec_or_symbol, MatrixSymbol):
        return validate_dg_symbol(spec_or_symbol)
    if spec_or_symbol.coefficient_file is None:
        raise DgValidationError("no coefficient file given")
    return load_dg_symbol(spec_or_symbol.coefficient_file)


def dg_system(spec, symbol=None):
    """Two-level block-Toeplitz ``T_{(n,n)}(f)`` with ``9 x 9`` blocks (size ``9 n^2``)."""
    sym = validate_dg_symbol(symbol) if symbol is not None else _dg_symbol_of(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallOperatorWarning)
        return build_operator(sym, (spec.n, spec.n), "toeplitz", label=f"DG t={spec.t}")


def _embed(sym, axis, levels=2):
    coeffs = {}
    for (j,), m in sym.coeffs.items():
        off = [0] * levels
        off[axis] = j
        coeffs[tuple(off)] = m
    return MatrixSymbol(levels, sym.d, coeffs, hermitian=sym.hermitian)


def dg_projector_symbol(z, d=DG_BLOCK):
    """``p_z(theta_1) p_z(theta_2)`` as a 2-level ``d x d`` symbol."""
    p = projector_symbol_pz(d, z)
    prod = symbol_product(_embed(p, 0), _embed(p, 1))
    return MatrixSymbol(2, d, prod.coeffs, hermitian=True)


def dg_transfer(spec, z):
    """``T_n(p) (K_n^T (x) I_9)`` with ``K_n = K_n (x) K_n`` and ``p = p_z(theta_1) p_z(theta_2)``."""
    return make_transfer(dg_projector_symbol(z), (spec.n, spec.n), "toeplitz")


def synthetic_dg_symbol(seed=0):
    """A valid stand-in for the DG pressure symbol (not the discretization itself).

    ``f = G_1^H G_1 + G_2^H G_2`` with ``G_k(theta) = R_k - e^{i theta_k} Q_k``
    and ``(R_k - Q_k) e = 0``: Hermitian, cross-shaped, non-symmetric
    off-diagonal blocks, and ``lambda_min`` has a single order-2 zero at the
    origin.
    """
    rng = np.random.default_rng(seed)
    d = DG_BLOCK
    v = np.ones(d) / np.sqrt(d)
    proj = np.eye(d) - np.outer(v, v)
    coeffs = {(0, 0): np.zeros((d, d))}
    for axis in (0, 1):
        Q = np.eye(d) + 0.3 * rng.standard_normal((d, d))
        R = Q + 0.5 * rng.standard_normal((d, d)) @ proj
        plus = [0, 0]
        plus[axis] = 1
        minus = [-p for p in plus]
        coeffs[(0, 0)] = coeffs[(0, 0)] + R.T @ R + Q.T @ Q
        coeffs[tuple(plus)] = -R.T @ Q
        coeffs[tuple(minus)] = -Q.T @ R
    coeffs[(0, 0)] = 0.5 * (coeffs[(0, 0)] + coeffs[(0, 0)].T)
    return MatrixSymbol(2, d, coeffs, hermitian=True)


def write_synthetic_dg(path, seed=0):
    with open(path, "w") as fh:
        json.dump(symbol_to_dict(synthetic_dg_symbol(seed)), fh, indent=1)
