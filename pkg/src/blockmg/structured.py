"""Block-Toeplitz / block-circulant operators and grid transfers.

Operators are assembled by block diagonals (offset ``j`` contributes
``J^{(j_1)} (x) ... (x) J^{(j_k)} (x) a_j``) and stored as CSR for products,
smoothing and Galerkin triple products.  Unknowns are flattened with the
first level outermost and the block index innermost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .symbol import MatrixSymbol

__all__ = [
    "StructuredOperator",
    "CuttingMatrix",
    "GridTransfer",
    "build_operator",
    "matvec",
    "restrict",
    "prolong",
    "galerkin",
    "materialize_dense",
    "make_transfer",
    "coarse_size",
    "export_matrix_market",
    "DENSE_CAP",
]

DENSE_CAP = 4096


class SmallOperatorWarning(UserWarning):
    """Toeplitz size is too small to contain the full symbol bandwidth."""


def _normalize_sizes(n):
    if np.isscalar(n):
        n = (n,)
    n = tuple(int(v) for v in n)
    if any(v < 1 for v in n):
        raise ValueError(f"sizes must be positive, got {n}")
    return n


def _normalize_cut(cut, levels):
    if isinstance(cut, (bool, np.bool_)):
        return (bool(cut),) * levels
    cut = tuple(bool(c) for c in cut)
    if len(cut) != levels:
        raise ValueError("one cut flag per level is required")
    return cut


@dataclass(frozen=True, eq=False)
class StructuredOperator:
    """A (possibly multilevel, possibly cut) block-structured operator.

    ``symbol`` is set for operators assembled straight from a generating
    function and ``None`` for Galerkin coarse operators, whose structure is
    only approximately Toeplitz near the boundary.
    """

    kind: str
    sizes: tuple
    block_size: int
    matrix: sp.csr_matrix
    symbol: Optional[MatrixSymbol] = None
    cut: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("circulant", "toeplitz"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "sizes", _normalize_sizes(self.sizes))
        object.__setattr__(self, "cut", _normalize_cut(self.cut or False, len(self.sizes)))
        mat = sp.csr_matrix(self.matrix)
        mat.sum_duplicates()
        mat.sort_indices()
        object.__setattr__(self, "matrix", mat)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def N(self):
        return self.matrix.shape[0]

    @property
    def levels(self):
        return len(self.sizes)

    @cached_property
    def diagonal(self):
        return self.matrix.diagonal()

    @cached_property
    def lower(self):
        """Lower triangle including the diagonal, CSR."""
        return sp.tril(self.matrix, format="csr")

    def matvec(self, x):
        return matvec(self, x)

    def __matmul__(self, x):
        return matvec(self, x)

    def dense(self, cap=DENSE_CAP):
        return materialize_dense(self, cap)


@dataclass(frozen=True)
class CuttingMatrix:
    """Row-selection (down-sampling) matrix ``K_n`` of shape ``k x n``.

    ``circulant_even`` keeps the even indices of an even ``n``;
    ``toeplitz_odd`` keeps the odd (0-based) indices of an odd ``n``.
    """

    variant: str
    n: int
    k: int = field(init=False)

    def __post_init__(self):
        if self.variant == "circulant_even":
            if self.n < 2 or self.n % 2:
                raise ValueError(f"circulant cutting needs an even size, got {self.n}")
            k = self.n // 2
        elif self.variant == "toeplitz_odd":
            if self.n < 3 or self.n % 2 == 0:
                raise ValueError(f"Toeplitz cutting needs an odd size >= 3, got {self.n}")
            k = (self.n - 1) // 2
        else:
            raise ValueError(f"unknown cutting variant {self.variant!r}")
        object.__setattr__(self, "k", k)

    @classmethod
    def for_kind(cls, kind, n):
        return cls("circulant_even" if kind == "circulant" else "toeplitz_odd", n)

    @property
    def selected(self):
        start = 0 if self.variant == "circulant_even" else 1
        return start + 2 * np.arange(self.k)

    @cached_property
    def matrix(self):
        return sp.csr_matrix((np.ones(self.k), (np.arange(self.k), self.selected)), shape=(self.k, self.n))


def coarse_size(kind, n):
    return CuttingMatrix.for_kind(kind, n).k


def _shift(kind, n, j):
    """Level matrix for offset ``j``: ``(i, h) = 1`` iff ``i - h == j`` (mod ``n`` for circulants)."""
    if kind == "toeplitz":
        return sp.eye(n, k=-j, format="csr")
    rows = np.arange(n)
    cols = (rows - j) % n
    return sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def build_operator(sym, n, kind="toeplitz", cut=False, label=""):
    """Assemble ``T_n(sym)`` (``kind='toeplitz'``) or ``A_n(sym)`` (``kind='circulant'``).

    Parameters
    ----------
    sym : MatrixSymbol
        Generating symbol.
    n : int or tuple of int
        Number of blocks per level.
    kind : {'toeplitz', 'circulant'}
    cut : bool or tuple of bool
        Drop the last row and column (homogeneous Dirichlet end).  Only
        defined for one-level Toeplitz operators.

    Returns
    -------
    StructuredOperator
    """
    sizes = _normalize_sizes(n)
    if len(sizes) != sym.levels:
        raise ValueError(f"symbol has {sym.levels} levels but {len(sizes)} sizes were given")
    cut = _normalize_cut(cut, len(sizes))
    if any(cut):
        if kind != "toeplitz":
            raise ValueError("cut is only defined for Toeplitz operators")
        if sym.levels != 1:
            raise ValueError("cut is only defined for one-level operators; build multilevel FEM matrices by Kronecker products")
    if kind == "toeplitz":
        r = sym.degree
        if any(ni <= 2 * ri for ni, ri in zip(sizes, r)):
            warnings.warn(f"Toeplitz size {sizes} is small relative to symbol degree {r}", SmallOperatorWarning, stacklevel=2)
    elif kind != "circulant":
        raise ValueError(f"unknown operator kind {kind!r}")

    d = sym.d
    real = sym.is_real
    total = d * int(np.prod(sizes))
    mat = sp.csr_matrix((total, total), dtype=float if real else complex)
    # ascending offsets: fixed accumulation order
    for off in sorted(sym.coeffs):
        block = sym.coeffs[off]
        if not np.any(block):
            continue
        if kind == "toeplitz" and any(abs(j) >= ni for j, ni in zip(off, sizes)):
            continue
        block = block.real if real else block
        mat = mat + _kron_all([_shift(kind, ni, j) for ni, j in zip(sizes, off)] + [sp.csr_matrix(block)])
    mat = sp.csr_matrix(mat)
    if cut[0]:
        mat = mat[:-1, :-1]
    mat.eliminate_zeros()
    return StructuredOperator(kind, sizes, d, mat, symbol=sym, cut=cut, label=label)


def matvec(op, x):
    x = np.asarray(x)
    if x.shape[0] != op.N:
        raise ValueError(f"vector length {x.shape[0]} does not match operator size {op.N}")
    return op.matrix @ x


def materialize_dense(op, cap=DENSE_CAP):
    mat = op.matrix if isinstance(op, StructuredOperator) else op
    if max(mat.shape) > cap:
        raise ValueError(f"operator of size {mat.shape} exceeds dense cap {cap}")
    return mat.toarray()


def export_matrix_market(op, path):
    """Write the operator in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), op.matrix)


@dataclass(frozen=True, eq=False)
class GridTransfer:
    """Prolongation ``p_n^k = A(p) (K_n^T (x) I_d)`` and its adjoint.

    Either a single operator (``p_operator``) composed with ``cutters`` or,
    when ``factors`` is non-empty, the Kronecker product of one-level
    transfers applied dimension by dimension.
    """

    block_size: int
    fine_sizes: tuple
    coarse_sizes: tuple
    matrix: sp.csr_matrix
    p_operator: Optional[StructuredOperator] = None
    cutters: tuple = ()
    factors: tuple = ()
    cut: tuple = ()

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n_fine(self):
        return self.matrix.shape[0]

    @property
    def n_coarse(self):
        return self.matrix.shape[1]

    @cached_property
    def matrix_h(self):
        return sp.csr_matrix(self.matrix.conj().T)

    def _tensor_apply(self, v, adjoint):
        mats = [f.matrix_h if adjoint else f.matrix for f in self.factors]
        dims = [m.shape[1] for m in mats]
        out = v.reshape(dims)
        for axis, m in enumerate(mats):
            moved = np.moveaxis(out, axis, 0)
            rest = moved.shape[1:]
            res = m @ moved.reshape(moved.shape[0], -1)
            out = np.moveaxis(res.reshape((m.shape[0],) + rest), 0, axis)
        return out.reshape(-1)

    def prolong(self, y):
        return prolong(self, y)

    def restrict(self, r):
        return restrict(self, r)


def restrict(t, r):
    """``(p_n^k)^H r``."""
    r = np.asarray(r)
    if r.shape[0] != t.n_fine:
        raise ValueError(f"fine vector length {r.shape[0]} != {t.n_fine}")
    if t.factors:
        return t._tensor_apply(r, adjoint=True)
    return t.matrix_h @ r


def prolong(t, y):
    """``p_n^k y``."""
    y = np.asarray(y)
    if y.shape[0] != t.n_coarse:
        raise ValueError(f"coarse vector length {y.shape[0]} != {t.n_coarse}")
    if t.factors:
        return t._tensor_apply(y, adjoint=False)
    return t.matrix @ y


def make_transfer(p_symbol, sizes, kind="toeplitz", cut=False, block_size=None):
    """Grid transfer generated by ``p_symbol`` for fine sizes ``sizes``.

    A one-level ``p_symbol`` on a multilevel grid gives the tensor product of
    per-level transfers (each cut separately when requested).  A symbol with
    as many levels as ``sizes`` gives the genuinely multilevel transfer
    ``T_n(p)(K_n^T (x) I_d)`` with ``K_n = K_{n_1} (x) ... (x) K_{n_k}``.
    """
    sizes = _normalize_sizes(sizes)
    cut = _normalize_cut(cut, len(sizes))
    d = p_symbol.d if block_size is None else block_size
    if p_symbol.d != d:
        raise ValueError(f"projector block size {p_symbol.d} != operator block size {d}")

    if len(sizes) > 1 and p_symbol.levels == 1:
        factors = tuple(make_transfer(p_symbol, (n,), kind, c, d) for n, c in zip(sizes, cut))
        matrix = _kron_all([f.matrix for f in factors])
        return GridTransfer(
            d,
            sizes,
            tuple(f.coarse_sizes[0] for f in factors),
            matrix,
            cutters=tuple(f.cutters[0] for f in factors),
            factors=factors,
            cut=cut,
        )
    if p_symbol.levels != len(sizes):
        raise ValueError("projector symbol levels do not match the grid")
    if any(cut) and len(sizes) > 1:
        raise ValueError("cut multilevel transfers must be built from a one-level symbol")

    cutters = tuple(CuttingMatrix.for_kind(kind, n) for n in sizes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmallOperatorWarning)
        p_op = build_operator(p_symbol, sizes, kind)
    select = _kron_all([c.matrix for c in cutters] + [sp.identity(d, format="csr")])
    matrix = sp.csr_matrix(p_op.matrix @ select.T)
    if cut[0]:
        matrix = matrix[:-1, :-1]
    matrix.eliminate_zeros()
    return GridTransfer(d, sizes, tuple(c.k for c in cutters), matrix, p_operator=p_op, cutters=cutters, cut=cut)


def galerkin(op, t):
    """Exact sparse triple product ``(p_n^k)^H A p_n^k``."""
    if t.n_fine != op.N:
        raise ValueError(f"transfer fine size {t.n_fine} != operator size {op.N}")
    if t.n_coarse < 1:
        raise ValueError("coarse dimension must be >= 1")
    coarse = sp.csr_matrix(t.matrix_h @ op.matrix @ t.matrix)
    coarse.eliminate_zeros()
    return StructuredOperator(op.kind, t.coarse_sizes, op.block_size, coarse, symbol=None, cut=op.cut)


def operator_from_matrix(matrix, kind, sizes, block_size, cut=False, label=""):
    """Wrap an already assembled sparse matrix (e.g. a Kronecker sum)."""
    return StructuredOperator(kind, sizes, block_size, sp.csr_matrix(matrix), symbol=None, cut=cut, label=label)


def kron_operator(mats, kind, sizes, block_size, cut, label=""):
    return operator_from_matrix(_kron_all(list(mats)), kind, sizes, block_size, cut, label)


def assert_sizes(sizes: Sequence[int], kind: str):
    """Raise unless every level can be coarsened once under ``kind``'s size law."""
    for n in sizes:
        CuttingMatrix.for_kind(kind, n)
