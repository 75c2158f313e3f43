"""Hot inner loops: Gauss-Seidel and damped Jacobi sweeps on CSR matrices.

Each kernel has a numba implementation and a numpy/scipy implementation
with identical semantics.  :data:`USE_NUMBA` (env ``BLOCKMG_DISABLE_NUMBA``)
selects the Gauss-Seidel path.  Jacobi always runs on scipy's CSR product,
which beats the compiled loop (see ``benchmarks/bench_kernels.py``); the
numba version is kept for cross-checking.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from ._config import USE_NUMBA

if USE_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


__all__ = ["gauss_seidel", "jacobi", "USE_NUMBA"]


@njit(cache=True, nogil=True)
def _gs_forward_numba(indptr, indices, data, x, b, sweeps):
    n = x.shape[0]
    for _ in range(sweeps):
        for i in range(n):
            s = b[i]
            diag = data[0] * 0
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                if j == i:
                    diag = data[jj]
                else:
                    s -= data[jj] * x[j]
            x[i] = s / diag


@njit(cache=True, nogil=True)
def _jacobi_numba(indptr, indices, data, diag, x, b, omega, sweeps):
    n = x.shape[0]
    r = np.empty_like(x)
    for _ in range(sweeps):
        for i in range(n):
            s = b[i]
            for jj in range(indptr[i], indptr[i + 1]):
                s -= data[jj] * x[indices[jj]]
            r[i] = s
        for i in range(n):
            x[i] += omega * r[i] / diag[i]


def _gs_forward_numpy(A, x, b, sweeps, lower=None):
    if lower is None:
        lower = sp.tril(A, format="csr")
    for _ in range(sweeps):
        x += spsolve_triangular(lower, b - A @ x, lower=True)
    return x


def _jacobi_numpy(A, diag, x, b, omega, sweeps):
    for _ in range(sweeps):
        x += omega * (b - A @ x) / diag
    return x


def _common_dtype(A, x, b):
    return np.result_type(A.dtype, x.dtype, b.dtype)


def gauss_seidel(A, x, b, sweeps=1, lower=None):
    """Forward Gauss-Seidel sweeps in stored (lexicographic) order.

    Returns a new array; ``x`` is not modified.  ``lower`` may carry a
    cached ``tril(A)`` for the numpy path.
    """
    dtype = _common_dtype(A, x, b)
    x = np.array(x, dtype=dtype)
    if sweeps <= 0:
        return x
    b = np.asarray(b, dtype=dtype)
    if USE_NUMBA:
        data = A.data.astype(dtype, copy=False)
        _gs_forward_numba(A.indptr, A.indices, data, x, b, sweeps)
        return x
    return _gs_forward_numpy(A, x, b, sweeps, lower)


def jacobi(A, diag, x, b, omega, sweeps=1):
    """Damped Jacobi sweeps ``x <- x + omega D^{-1} (b - A x)``; returns a new array."""
    dtype = _common_dtype(A, x, b)
    x = np.array(x, dtype=dtype)
    if sweeps <= 0:
        return x
    return _jacobi_numpy(A, diag, x, np.asarray(b, dtype=dtype), omega, sweeps)
