"""Matrix-valued trigonometric polynomials (generating symbols).

A symbol of block size ``d`` in ``levels`` frequency variables is stored by
its Fourier coefficients,

.. math::

    f(\\theta) = \\sum_j \\hat a_j \\, e^{i \\langle j, \\theta \\rangle},

with ``j`` an integer multi-index and every :math:`\\hat a_j` a complex
``d x d`` matrix.  Products and the coarse-grid recursion are carried out
by exact coefficient convolution; grid sampling is only used for
verification and for sup-norms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "MatrixSymbol",
    "EigenDecomposition",
    "evaluate",
    "hermitian_eig",
    "eigvalsh_grid",
    "projector_symbol_pz",
    "coarse_symbol",
    "symbol_product",
    "adjoint_symbol",
    "scalar_symbol",
    "constant_symbol",
    "sup_norm",
    "default_grid",
    "uniform_grid",
    "load_symbol",
    "save_symbol",
    "symbol_from_dict",
    "symbol_to_dict",
]

# relative tolerance for accepting a symbol flagged Hermitian
_HERMITIAN_RTOL = 1e-10


def _as_offset(key, levels):
    if np.isscalar(key):
        key = (int(key),)
    key = tuple(int(k) for k in key)
    if len(key) != levels:
        raise ValueError(f"offset {key} does not have {levels} components")
    return key


@dataclass(frozen=True)
class MatrixSymbol:
    """Immutable ``d x d`` trigonometric polynomial in ``levels`` variables.

    Parameters
    ----------
    levels : int
        Number of frequency variables.
    block_size : int
        Size ``d`` of the matrix values.
    coeffs : mapping
        Offset multi-index (tuple of ints, or int when ``levels == 1``) to a
        ``d x d`` array.  Missing offsets are zero.
    hermitian : bool
        If true, ``coeffs[-j] == coeffs[j]^H`` is enforced, which makes
        ``f(theta)`` Hermitian for every ``theta``.
    """

    levels: int
    block_size: int
    coeffs: Mapping[tuple, np.ndarray]
    hermitian: bool = False
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.levels < 1 or self.block_size < 1:
            raise ValueError("levels and block_size must be positive")
        d = self.block_size
        clean = {}
        for key, value in dict(self.coeffs).items():
            off = _as_offset(key, self.levels)
            mat = np.array(value, dtype=complex)
            if mat.ndim == 0 and d == 1:
                mat = mat.reshape(1, 1)
            if mat.shape != (d, d):
                raise ValueError(f"coefficient at {off} has shape {mat.shape}, expected {(d, d)}")
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"coefficient at {off} is not finite")
            if off in clean:
                clean[off] = clean[off] + mat
            else:
                clean[off] = mat
        for mat in clean.values():
            mat.setflags(write=False)
        object.__setattr__(self, "coeffs", clean)
        if self.hermitian:
            self._check_hermitian()
        offs = sorted(clean)
        if offs:
            offsets = np.array(offs, dtype=np.int64).reshape(len(offs), self.levels)
            stack = np.stack([clean[o] for o in offs])
        else:
            offsets = np.zeros((0, self.levels), dtype=np.int64)
            stack = np.zeros((0, d, d), dtype=complex)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_stack", stack)

    def _check_hermitian(self):
        scale = max((np.abs(m).max() for m in self.coeffs.values()), default=0.0)
        zero = np.zeros((self.block_size, self.block_size))
        for off, mat in self.coeffs.items():
            neg = tuple(-o for o in off)
            partner = self.coeffs.get(neg, zero)
            if np.abs(partner - mat.conj().T).max() > _HERMITIAN_RTOL * max(scale, 1.0):
                raise ValueError(f"symbol flagged Hermitian but a_{neg} != a_{off}^H")

    @property
    def d(self):
        return self.block_size

    @property
    def degree(self):
        """Componentwise max ``|j|`` over the nonzero coefficients."""
        r = np.zeros(self.levels, dtype=int)
        for off, mat in self.coeffs.items():
            if np.any(mat != 0):
                r = np.maximum(r, np.abs(off))
        return tuple(int(v) for v in r)

    @property
    def offsets(self):
        return self._offsets

    def coefficient(self, offset):
        off = _as_offset(offset, self.levels)
        return self.coeffs.get(off, np.zeros((self.d, self.d), dtype=complex))

    @property
    def is_real(self):
        return all(np.all(m.imag == 0) for m in self.coeffs.values())

    def __call__(self, theta):
        return evaluate(self, theta)

    def __matmul__(self, other):
        return symbol_product(self, other)

    @property
    def H(self):
        return adjoint_symbol(self)

    def scaled(self, factor):
        return MatrixSymbol(
            self.levels,
            self.d,
            {k: factor * v for k, v in self.coeffs.items()},
            hermitian=self.hermitian and np.isreal(factor),
        )

    def __add__(self, other):
        _check_compatible(self, other)
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs[k] + v if k in coeffs else v
        return MatrixSymbol(self.levels, self.d, coeffs, hermitian=self.hermitian and other.hermitian)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_compatible(a, b):
    if a.levels != b.levels:
        raise ValueError(f"level mismatch: {a.levels} vs {b.levels}")
    if a.d != b.d:
        raise ValueError(f"block size mismatch: {a.d} vs {b.d}")


def evaluate(sym, theta):
    """Evaluate ``sym`` at ``theta``.

    One-level symbols take a scalar (one point) or an array of any shape (a
    batch).  Multilevel symbols take an array whose trailing axis has length
    ``levels``.  Returns an array of shape ``batch + (d, d)``.
    """
    theta = np.asarray(theta, dtype=float)
    if sym.levels == 1:
        batch_shape = theta.shape
        pts = theta.reshape(-1, 1)
    else:
        if theta.ndim == 0 or theta.shape[-1] != sym.levels:
            raise ValueError(f"theta must have {sym.levels} components, got shape {theta.shape}")
        batch_shape = theta.shape[:-1]
        pts = theta.reshape(-1, sym.levels)
    if len(sym._offsets) == 0:
        out = np.zeros((pts.shape[0], sym.d, sym.d), dtype=complex)
    else:
        phase = np.exp(1j * (pts @ sym._offsets.T.astype(float)))
        out = np.einsum("pm,mij->pij", phase, sym._stack)
    return out.reshape(batch_shape + (sym.d, sym.d))


def hermitian_eig(m):
    """Ascending eigen-decomposition of a small Hermitian matrix.

    The input is symmetrized after checking it is Hermitian to
    ``1e-10 * ||m||``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(m).max() if m.size else 0.0
    if np.abs(m - m.conj().T).max(initial=0.0) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return EigenDecomposition(w, v)


def eigvalsh_grid(sym, theta):
    """Ascending eigenvalues of ``sym`` on a batch of points, shape ``(..., d)``."""
    vals = evaluate(sym, theta)
    vals = 0.5 * (vals + np.conj(np.swapaxes(vals, -1, -2)))
    return np.linalg.eigvalsh(vals)


def default_grid(levels):
    return 4096 if levels == 1 else 256


def sup_norm(sym, grid=None):
    """Max spectral norm of ``sym`` over a uniform grid (a lower bound of the sup).

    The default grid has 4096 points for one-level symbols and ``256``
    points per direction otherwise.
    """
    grid = default_grid(sym.levels) if grid is None else grid
    pts = uniform_grid(sym.levels, grid)
    vals = evaluate(sym, pts)
    return float(np.linalg.norm(vals, ord=2, axis=(-2, -1)).max())


def uniform_grid(levels, grid):
    t = 2 * np.pi * np.arange(grid) / grid - np.pi
    if levels == 1:
        return t
    mesh = np.meshgrid(*([t] * levels), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def scalar_symbol(coeffs, levels=1, hermitian=None):
    """Scalar (``d = 1``) symbol from ``{offset: value}``."""
    sym = MatrixSymbol(levels, 1, {k: np.array([[v]]) for k, v in coeffs.items()})
    if hermitian is None:
        try:
            return MatrixSymbol(levels, 1, sym.coeffs, hermitian=True)
        except ValueError:
            return sym
    return MatrixSymbol(levels, 1, sym.coeffs, hermitian=hermitian)


def constant_symbol(mat, levels=1):
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    herm = np.allclose(mat, mat.conj().T, rtol=0, atol=1e-14 * max(np.abs(mat).max(), 1.0))
    return MatrixSymbol(levels, mat.shape[0], {(0,) * levels: mat}, hermitian=herm)


def projector_symbol_pz(d, z):
    """The projector family ``p_z(theta) = (1 + cos theta)(I + (z-1)/d e e^T)``."""
    if z <= 0:
        raise ValueError("z must be positive")
    if d < 1:
        raise ValueError("block size must be >= 1")
    base = np.eye(d) + (z - 1) / d * np.ones((d, d))
    return MatrixSymbol(1, d, {(0,): base, (1,): base / 2, (-1,): base / 2}, hermitian=True)


def adjoint_symbol(a):
    """Symbol of the conjugate transpose: coefficient at ``j`` becomes ``a_{-j}^H``."""
    coeffs = {tuple(-o for o in off): mat.conj().T for off, mat in a.coeffs.items()}
    return MatrixSymbol(a.levels, a.d, coeffs, hermitian=a.hermitian)


def symbol_product(a, b):
    """Pointwise matrix product ``a(theta) b(theta)`` by coefficient convolution."""
    _check_compatible(a, b)
    out = {}
    for ja, ma in a.coeffs.items():
        for jb, mb in b.coeffs.items():
            key = tuple(x + y for x, y in zip(ja, jb))
            prod = ma @ mb
            out[key] = out[key] + prod if key in out else prod
    return MatrixSymbol(a.levels, a.d, out)


def _hermitize(coeffs, levels, d):
    sym = {}
    zero = np.zeros((d, d), dtype=complex)
    keys = set(coeffs) | {tuple(-k for k in key) for key in coeffs}
    for key in keys:
        neg = tuple(-k for k in key)
        sym[key] = 0.5 * (coeffs.get(key, zero) + coeffs.get(neg, zero).conj().T)
    return MatrixSymbol(levels, d, sym, hermitian=True)


def coarse_symbol(f, p):
    """Symbol of the Galerkin coarse operator for the transfer generated by ``p``.

    ``fhat(theta) = 1/2 (g(theta/2) + g(theta/2 + pi))`` with ``g = p^H f p``.
    Averaging over the two half-angles annihilates the odd frequencies of
    ``g``, so the coefficient of ``fhat`` at ``m`` is the coefficient of ``g``
    at ``2 m``.
    """
    _check_compatible(f, p)
    if p.levels != 1:
        raise ValueError("coarse_symbol expects a one-level projector symbol")
    if not f.hermitian:
        raise ValueError("coarse_symbol expects a Hermitian-flagged symbol")
    g = symbol_product(symbol_product(adjoint_symbol(p), f), p)
    even = {}
    for off, mat in g.coeffs.items():
        if all(o % 2 == 0 for o in off):
            even[tuple(o // 2 for o in off)] = mat
    return _hermitize(even, f.levels, f.d)


# -- JSON file format -------------------------------------------------------


def symbol_to_dict(sym):
    return {
        "levels": sym.levels,
        "d": sym.d,
        "hermitian": bool(sym.hermitian),
        "coeffs": [
            {"offset": list(off), "re": sym.coeffs[off].real.tolist(), "im": sym.coeffs[off].imag.tolist()}
            for off in sorted(sym.coeffs)
        ],
    }


def symbol_from_dict(data):
    try:
        levels = int(data["levels"])
        d = int(data["d"])
        hermitian = bool(data.get("hermitian", False))
        entries = data["coeffs"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed symbol description: {exc}") from exc
    coeffs = {}
    for entry in entries:
        off = tuple(int(o) for o in entry["offset"])
        re = np.asarray(entry["re"], dtype=float)
        im = np.asarray(entry.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != (d, d) or im.shape != (d, d):
            raise ValueError(f"coefficient at {off} is not {d}x{d}")
        if off in coeffs:
            raise ValueError(f"duplicate offset {off}")
        coeffs[off] = re + 1j * im
    return MatrixSymbol(levels, d, coeffs, hermitian=hermitian)


def load_symbol(path):
    """Read a symbol JSON file; Hermitian-flagged files violating the invariant are rejected."""
    with open(Path(path)) as fh:
        return symbol_from_dict(json.load(fh))


def save_symbol(sym, path):
    with open(Path(path), "w") as fh:
        json.dump(symbol_to_dict(sym), fh, indent=1)
