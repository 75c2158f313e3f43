"""Numerical checks of the two-grid conditions, coarse-level conditioning and contraction."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .apps import fem_symbols_1d
from .mgm import cycle_once
from .smoother import SmootherConfig
from .symbol import (
    coarse_symbol,
    default_grid,
    eigvalsh_grid,
    evaluate,
    projector_symbol_pz,
    sup_norm,
    uniform_grid,
)

__all__ = [
    "ConditionCheckReport",
    "ConditioningReport",
    "ConjectureCheck",
    "ZeroSetError",
    "locate_zero_set",
    "check_tgm_conditions",
    "lambda_min_second_derivative_at_zero",
    "coarse_symbols",
    "conditioning_sweep",
    "check_conjecture",
    "estimate_contraction",
    "cycle_matrix",
    "a_norm_of",
    "smoothing_property_alpha",
    "smoother_iteration_matrix",
]

ZERO_TOL = 1e-10
CLUSTER_RADIUS = 2 * np.pi / 2**10


class ZeroSetError(ValueError):
    """``f`` and its pi-shift vanish together; the two-grid theory does not apply."""


def _wrap(theta):
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


def _cluster(points, values, radius):
    """Greedy clustering of zero candidates on the torus; keeps the smallest value per cluster."""
    order = np.argsort(values)
    reps = []
    for idx in order:
        pt = points[idx]
        if all(np.max(np.abs(_wrap(pt - r))) > radius for r in reps):
            reps.append(pt)
    return reps


def locate_zero_set(f, grid=None, tol=ZERO_TOL, cluster_radius=CLUSTER_RADIUS):
    """Points where ``lambda_min(f)`` vanishes, up to ``tol * ||f||_inf``.

    Raises :class:`ZeroSetError` if some ``lambda_j(f(theta + pi))`` also
    vanishes at a located zero.
    """
    if not f.hermitian:
        raise ValueError("locate_zero_set expects a Hermitian-flagged symbol")
    grid = 2**12 if grid is None and f.levels == 1 else (grid or 128)
    pts = uniform_grid(f.levels, grid)
    lam = eigvalsh_grid(f, pts)[..., 0]
    norm = sup_norm(f, grid)
    if norm == 0:
        raise ZeroSetError("symbol vanishes identically")
    cand = np.nonzero(lam <= tol * norm)[0]
    pts_arr = pts.reshape(len(lam), f.levels)
    reps = _cluster(pts_arr[cand], lam[cand], cluster_radius)
    zeros = []
    for r in reps:
        shifted = _wrap(r + np.pi)
        if eigvalsh_grid(f, shifted if f.levels > 1 else shifted[0])[..., 0] <= tol * norm:
            raise ZeroSetError(f"f vanishes at both {r} and its pi-shift")
        zeros.append(float(r[0]) if f.levels == 1 else tuple(float(v) for v in r))
    return sorted(zeros)


@dataclass
class ConditionCheckReport:
    theta0: list
    cond2_sup: float
    cond3_min: float
    cond4_max: float
    passed: tuple
    cond2_by_grid: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(self.passed)

    def to_dict(self):
        out = asdict(self)
        out["passed"] = {"cond2": self.passed[0], "cond3": self.passed[1], "cond4": self.passed[2]}
        out["cond2_by_grid"] = {str(k): v for k, v in self.cond2_by_grid.items()}
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _inv_sqrt(fvals, floor):
    w, v = np.linalg.eigh(fvals)
    if np.any(w < -floor):
        raise ValueError("f has a negative eigenvalue outside the excluded set")
    w = np.maximum(w, floor)
    return np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w), v.conj())


def _herm(m):
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _cond2_sup(f, p, grid, excluded, radius, floor):
    theta = 2 * np.pi * np.arange(grid) / grid
    keep = np.ones(grid, dtype=bool)
    for h in excluded:
        keep &= np.abs(_wrap(theta - h)) > radius
    theta = theta[keep]
    fis = _inv_sqrt(_herm(evaluate(f, theta)), floor)
    pH = np.conj(np.swapaxes(evaluate(p, theta + np.pi), -1, -2))
    prod = fis @ pH
    # induced 1-norm: max column sum
    return float(np.abs(prod).sum(axis=-2).max())


def check_tgm_conditions(f, p, grid=None, exclusion_radius=None, refine=(2**10, 2**11, 2**12)):
    """Evaluate the three transfer conditions for ``f`` and projector symbol ``p``.

    ``cond2_sup`` is the sup of ``|f(theta)^{-1/2} p(theta + pi)^H|_1`` over
    the grid minus the zero set and its pi-shifts; it passes when the sup
    changes by less than 5% from the coarsest to the finest ``refine`` grid.
    ``exclusion_radius`` defaults to half a grid spacing, i.e. only the zero
    points themselves are removed.
    """
    if f.levels != 1 or p.levels != 1:
        raise ValueError("condition checks are implemented for one-level symbols")
    if f.d != p.d:
        raise ValueError("f and p must share the block size")
    grid = refine[-1] if grid is None else grid
    theta0 = locate_zero_set(f)
    excluded = list(theta0) + [float(_wrap(t + np.pi)) for t in theta0]
    fnorm = sup_norm(f)
    floor = 1e-14 * fnorm

    sups = {}
    for g in sorted(set(refine) | {grid}):
        radius = np.pi / g if exclusion_radius is None else exclusion_radius
        sups[g] = _cond2_sup(f, p, g, excluded, radius, floor)
    coarse_g, fine_g = min(sups), max(sups)
    cond2 = sups[grid]
    stable = np.isfinite(sups[fine_g]) and abs(sups[fine_g] - sups[coarse_g]) <= 0.05 * max(sups[coarse_g], 1e-300)

    theta = 2 * np.pi * np.arange(grid) / grid
    p0 = evaluate(p, theta)
    p1 = evaluate(p, theta + np.pi)
    p0H = np.conj(np.swapaxes(p0, -1, -2))
    p1H = np.conj(np.swapaxes(p1, -1, -2))
    cond3 = float(np.linalg.eigvalsh(_herm(p0H @ p0 + p1H @ p1))[:, 0].min())
    comm = p0 @ p1 - p1 @ p0
    cond4 = float(np.linalg.norm(comm, ord=2, axis=(-2, -1)).max())
    pscale = max(1.0, sup_norm(p) ** 2)
    passed = (bool(stable), bool(cond3 > 1e-12 * pscale), bool(cond4 <= 1e-12 * pscale))
    return ConditionCheckReport(list(theta0), cond2, cond3, cond4, passed, sups)


def _lam_min(f, theta):
    return float(eigvalsh_grid(f, theta)[..., 0])


def lambda_min_second_derivative_at_zero(f, h=1e-3, zero_tol=1e-8, axis=0):
    """Second derivative of ``lambda_min(f)`` at the origin.

    Central second differences at ``h`` and ``h/2`` combined by Richardson
    extrapolation.  Multilevel symbols are differentiated along ``axis``.
    """
    norm = sup_norm(f, 256)
    origin = np.zeros(f.levels) if f.levels > 1 else 0.0
    lam0 = _lam_min(f, origin)
    if abs(lam0) > zero_tol * max(norm, 1.0):
        raise ValueError(f"lambda_min(f(0)) = {lam0:.3e} is not zero")

    def step(s):
        if f.levels == 1:
            return s
        e = np.zeros(f.levels)
        e[axis] = s
        return e

    def second_difference(s):
        return (_lam_min(f, step(s)) - 2 * lam0 + _lam_min(f, step(-s))) / s**2

    return (4 * second_difference(h / 2) - second_difference(h)) / 3


def coarse_symbols(f, z, levels):
    """``[f_hat_{z,1}, ..., f_hat_{z,levels}]`` by repeated coarse-symbol recursion with ``p_z``."""
    p = projector_symbol_pz(f.d, z)
    out = []
    cur = f
    for _ in range(levels):
        cur = coarse_symbol(cur, p)
        out.append(cur)
    return out


@dataclass
class ConditioningReport:
    z: float
    rows: list
    limit_flag: str

    def to_dict(self):
        return {
            "z": self.z,
            "limit_flag": self.limit_flag,
            "rows": [dict(zip(("j", "lambda_pp0", "lambda_max_sup", "kappa"), r)) for r in self.rows],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @property
    def kappas(self):
        return [r[3] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "lambda_pp0", "lambda_max_sup", "kappa"])
        for row in self.rows:
            w.writerow([row[0]] + [f"{v:.10g}" for v in row[1:]])
        return buf.getvalue()


def conditioning_sweep(f, z, levels, d=None, grid=None):
    """``kappa(f_hat_{z,j}) = sup lambda_max / lambda_min''(0)`` for ``j = 1..levels``."""
    if d is not None and d != f.d:
        raise ValueError("block size mismatch")
    grid = default_grid(1) if grid is None else grid
    pts = uniform_grid(1, grid)
    rows = []
    for j, fh in enumerate(coarse_symbols(f, z, levels), start=1):
        lpp = lambda_min_second_derivative_at_zero(fh)
        lmax = float(eigvalsh_grid(fh, pts)[:, -1].max())
        rows.append((j, float(lpp), lmax, lmax / lpp))
    lpps = [r[1] for r in rows]
    ratios = [b / a for a, b in zip(lpps, lpps[1:])]
    vanishing = bool(ratios) and all(r < 1 - 1e-3 for r in ratios)
    return ConditioningReport(z, rows, "vanishing" if vanishing else "bounded_away")


@dataclass
class ConjectureCheck:
    deg: int
    z: float
    rows: list
    level_constant: bool


def check_conjecture(deg, z, levels, rtol=0.01):
    """Ratios ``lambda_min''(f_hat_{z,j})(0) / (z^2/2)^j`` for the ``Q_deg`` stiffness symbol."""
    if z <= 0:
        raise ValueError("z must be positive")
    f, _ = fem_symbols_1d(deg)
    rows = []
    for j, fh in enumerate(coarse_symbols(f, z, levels), start=1):
        rows.append((j, lambda_min_second_derivative_at_zero(fh) / (z * z / 2) ** j))
    ratios = np.array([r[1] for r in rows])
    constant = bool(np.all(np.abs(ratios - ratios[0]) <= rtol * abs(ratios[0])))
    return ConjectureCheck(deg, z, rows, constant)


# -- contraction ------------------------------------------------------------


def _a_norm(A, e):
    return float(np.sqrt(max(np.vdot(e, A @ e).real, 0.0)))


def estimate_contraction(h, trials=4, iterations=60, burn_in=40, seed=0):
    """Power-iteration estimate of the A-norm contraction factor of one cycle.

    Runs the homogeneous problem (``b = 0``) from random errors.  For each
    trial the per-cycle ratios ``||e_{k+1}||_A / ||e_k||_A`` after
    ``burn_in`` cycles are averaged geometrically (single ratios oscillate
    for non-normal iteration matrices); the largest trial value is returned.
    """
    A = h.fine.matrix
    rng = np.random.default_rng(seed)
    zero = np.zeros(A.shape[0], dtype=A.dtype)
    worst = 0.0
    for _ in range(trials):
        e = rng.standard_normal(A.shape[0]).astype(A.dtype)
        e /= _a_norm(A, e)
        logs = []
        for k in range(iterations):
            e_next = cycle_once(h, 0, e, zero)
            nrm = _a_norm(A, e_next)
            if nrm == 0.0:
                logs = [-np.inf]
                break
            if k >= burn_in:
                logs.append(np.log(nrm))
            e = e_next / nrm
        if logs:
            worst = max(worst, float(np.exp(np.mean(logs))))
    return worst


def cycle_matrix(h):
    """Dense iteration matrix of one cycle (columns = cycle applied to unit errors)."""
    N = h.fine.N
    zero = np.zeros(N, dtype=h.fine.matrix.dtype)
    cols = [cycle_once(h, 0, np.eye(N, 1, -i).ravel().astype(zero.dtype), zero) for i in range(N)]
    return np.column_stack(cols)


def a_norm_of(M, A):
    """``||M||_A = ||A^{1/2} M A^{-1/2}||_2`` for dense ``M`` and SPD ``A``."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    w, v = np.linalg.eigh(A)
    half = (v * np.sqrt(w)) @ v.conj().T
    ihalf = (v / np.sqrt(w)) @ v.conj().T
    return float(np.linalg.norm(half @ M @ ihalf, 2))


def smoother_iteration_matrix(op, cfg: SmootherConfig, omega=None):
    """Dense ``V = I - W^{-1} A`` of one sweep."""
    A = op.matrix.toarray()
    N = A.shape[0]
    omega = cfg.omega if omega is None else omega
    if cfg.method == "richardson":
        W_inv = omega * np.eye(N)
    elif cfg.method == "jacobi":
        W_inv = omega * np.diag(1.0 / np.diag(A))
    else:
        W_inv = sla.solve_triangular(np.tril(A), np.eye(N), lower=True)
    return np.eye(N) - W_inv @ A


def smoothing_property_alpha(op, cfg: SmootherConfig, omega=None, tol=1e-10, steps=80):
    """Largest ``alpha`` (by bisection) with ``V^H A V <= A - alpha A^2`` up to ``tol * scale``.

    Returns ``0.0`` when no positive ``alpha`` works.
    """
    A = op.matrix.toarray()
    V = smoother_iteration_matrix(op, cfg, omega)
    A2 = A @ A
    base = V.conj().T @ A @ V - A
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(A2, 2))

    def holds(alpha):
        return np.linalg.eigvalsh(_herm(base + alpha * A2))[-1] <= tol * scale

    hi = 1.0 / np.linalg.norm(A, 2)
    if not holds(0.0):
        return 0.0
    while holds(hi):
        hi *= 2
        if hi > 1e6:
            return hi
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo
