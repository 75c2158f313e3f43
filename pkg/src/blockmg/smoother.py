"""Stationary smoothers and their admissible relaxation parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .symbol import sup_norm

__all__ = [
    "SmootherConfig",
    "smooth",
    "jacobi_omega_bound",
    "richardson_omega_bound",
    "gauss_seidel_config",
    "jacobi_config",
    "SMOOTHERS",
]

SMOOTHERS = ("richardson", "jacobi", "gauss_seidel")


@dataclass(frozen=True)
class SmootherConfig:
    """Smoother choice, sweep counts and relaxation parameters.

    ``omega_post`` defaults to ``omega``; Gauss-Seidel is undamped.
    """

    method: str = "gauss_seidel"
    omega: float = 1.0
    sweeps_pre: int = 1
    sweeps_post: int = 1
    omega_post: float | None = None

    def __post_init__(self):
        if self.method not in SMOOTHERS:
            raise ValueError(f"unknown smoother {self.method!r}")
        if self.omega <= 0 or (self.omega_post is not None and self.omega_post <= 0):
            raise ValueError("relaxation parameters must be positive")
        if self.method == "gauss_seidel" and (self.omega != 1 or self.omega_post not in (None, 1)):
            raise ValueError("Gauss-Seidel runs with omega = 1")
        if self.sweeps_pre < 0 or self.sweeps_post < 0:
            raise ValueError("sweep counts must be non-negative")

    @property
    def post_omega(self):
        return self.omega if self.omega_post is None else self.omega_post


def gauss_seidel_config(pre=1, post=1):
    return SmootherConfig("gauss_seidel", 1.0, pre, post)


def jacobi_config(omega_pre, omega_post=None, pre=1, post=1):
    """Damped Jacobi; ``omega_post`` defaults to ``2/3 omega_pre``."""
    if omega_post is None:
        omega_post = 2.0 * omega_pre / 3.0
    return SmootherConfig("jacobi", omega_pre, pre, post, omega_post)


def smooth(op, x, b, cfg, sweeps, omega=None):
    """Apply ``sweeps`` sweeps of ``cfg.method`` to ``A x = b``.

    ``omega`` overrides ``cfg.omega`` (used for the post-smoother).  The
    input ``x`` is not modified.
    """
    A = op.matrix
    x = np.asarray(x)
    b = np.asarray(b)
    if x.shape[0] != A.shape[0] or b.shape[0] != A.shape[0]:
        raise ValueError("vector lengths do not match the operator")
    omega = cfg.omega if omega is None else omega
    if sweeps <= 0:
        return np.array(x)
    if cfg.method == "richardson":
        x = np.array(x, dtype=np.result_type(A.dtype, x.dtype, b.dtype))
        for _ in range(sweeps):
            x += omega * (b - A @ x)
        return x
    diag = op.diagonal
    if np.any(diag == 0):
        raise ZeroDivisionError("operator has a zero diagonal entry")
    if cfg.method == "jacobi":
        return kernels.jacobi(A, diag, x, b, omega, sweeps)
    return kernels.gauss_seidel(A, x, b, sweeps, lower=None if kernels.USE_NUMBA else op.lower)


def jacobi_omega_bound(sym, grid=None):
    """Largest Jacobi damping keeping the smoothing property: ``2 min_j (a_0)_jj / ||f||_inf``."""
    zero = (0,) * sym.levels
    diag = np.diag(sym.coefficient(zero))
    if np.any(np.abs(diag.imag) > 1e-14 * np.abs(diag).max(initial=1.0)) or np.any(diag.real <= 0):
        raise ValueError("the constant coefficient must have a positive real diagonal")
    return 2.0 * float(diag.real.min()) / sup_norm(sym, grid)


def richardson_omega_bound(sym, grid=None):
    """Largest Richardson damping keeping the smoothing property: ``2 / ||f||_inf``."""
    norm = sup_norm(sym, grid)
    if norm <= 0:
        raise ValueError("symbol vanishes identically")
    return 2.0 / norm
