"""Two-grid and V-cycle drivers over a chain of Galerkin operators."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .smoother import SmootherConfig, smooth
from .structured import DENSE_CAP, GridTransfer, StructuredOperator, galerkin, make_transfer, prolong, restrict

__all__ = [
    "Level",
    "MgHierarchy",
    "SolveReport",
    "SingularCoarseOperator",
    "build_hierarchy",
    "cycle_once",
    "solve",
    "make_rhs_sine",
    "CYCLES",
]

log = logging.getLogger(__name__)

CYCLES = ("two_grid", "v_cycle")
_CYCLE_ALIASES = {"tgm": "two_grid", "two_grid": "two_grid", "v": "v_cycle", "v_cycle": "v_cycle", "mgm": "v_cycle"}


class SingularCoarseOperator(ValueError):
    """The coarsest Galerkin operator could not be factorized."""


class CoarseSolver:
    """Direct solver for the coarsest level (dense Cholesky, sparse LU above the dense cap)."""

    def __init__(self, op, dense_cap=DENSE_CAP):
        self.n = op.N
        if op.N <= dense_cap:
            dense = op.matrix.toarray()
            try:
                self._chol = sla.cho_factor(dense, lower=True, check_finite=True)
            except np.linalg.LinAlgError as exc:
                raise SingularCoarseOperator(f"coarsest operator (size {op.N}) is not positive definite") from exc
            # rounding can leave a tiny positive pivot on an exactly singular matrix
            pivots = np.abs(np.diag(self._chol[0])) ** 2
            if pivots.min() <= op.N * np.finfo(float).eps * pivots.max():
                raise SingularCoarseOperator(f"coarsest operator (size {op.N}) is numerically singular")
            self._lu = None
        else:
            self._chol = None
            try:
                self._lu = spla.splu(op.matrix.tocsc())
            except RuntimeError as exc:
                raise SingularCoarseOperator(f"coarsest operator (size {op.N}) is singular") from exc

    def __call__(self, b):
        if self._chol is not None:
            return sla.cho_solve(self._chol, b, check_finite=False)
        return self._lu.solve(np.asarray(b))


@dataclass(eq=False)
class Level:
    op: StructuredOperator
    transfer: Optional[GridTransfer] = None


@dataclass(eq=False)
class MgHierarchy:
    """Operators, transfers and smoother for every level; direct solve at the last one."""

    levels: list
    smoother: SmootherConfig
    cycle: str
    coarse_solver: CoarseSolver = field(repr=False)

    @property
    def depth(self):
        return len(self.levels)

    @property
    def sizes(self):
        return [lvl.op.sizes for lvl in self.levels]

    @property
    def dims(self):
        return [lvl.op.N for lvl in self.levels]

    @property
    def fine(self):
        return self.levels[0].op


def _default_threshold(kind):
    return 3 if kind == "toeplitz" else 2


def build_hierarchy(fine, p_symbol, smoother=None, cycle="v_cycle", coarsest_threshold=None, dense_cap=DENSE_CAP):
    """Galerkin hierarchy for ``fine`` with transfers generated by ``p_symbol``.

    Coarsening stops once every level size is ``<= coarsest_threshold``
    (3 blocks for Toeplitz, 2 for circulant chains).  A two-grid hierarchy
    always has exactly one transfer.
    """
    cycle = _CYCLE_ALIASES.get(cycle, cycle)
    if cycle not in CYCLES:
        raise ValueError(f"unknown cycle {cycle!r}")
    smoother = smoother or SmootherConfig()
    threshold = _default_threshold(fine.kind) if coarsest_threshold is None else coarsest_threshold

    levels = []
    op = fine
    while True:
        done = all(n <= threshold for n in op.sizes)
        if cycle == "two_grid":
            done = len(levels) == 1
        if done:
            levels.append(Level(op))
            break
        transfer = make_transfer(p_symbol, op.sizes, op.kind, op.cut, op.block_size)
        levels.append(Level(op, transfer))
        op = galerkin(op, transfer)
    log.debug("hierarchy dims %s", [lvl.op.N for lvl in levels])
    return MgHierarchy(levels, smoother, cycle, CoarseSolver(levels[-1].op, dense_cap))


def cycle_once(h, level, x, b):
    """One multigrid cycle on ``A_level x = b`` starting from ``x``."""
    lvl = h.levels[level]
    if lvl.transfer is None:
        return h.coarse_solver(b)
    op = lvl.op
    cfg = h.smoother
    x = smooth(op, x, b, cfg, cfg.sweeps_pre)
    defect = op.matrix @ x - b
    coarse_b = restrict(lvl.transfer, defect)
    y = cycle_once(h, level + 1, np.zeros_like(coarse_b), coarse_b)
    x = x - prolong(lvl.transfer, y)
    return smooth(op, x, b, cfg, cfg.sweeps_post, omega=cfg.post_omega)


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    converged: bool
    final_error_A_norm: Optional[float] = None
    solution: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        out = asdict(self)
        out.pop("solution")
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @property
    def count_label(self):
        """Iteration count as printed in tables (``'4000+'`` when not converged)."""
        return str(self.iterations) if self.converged else f"{self.iterations}+"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "relative_residual"])
        for i, r in enumerate(self.residual_history):
            writer.writerow([i, repr(float(r))])
        return buf.getvalue()


def _a_norm(op, e):
    return float(np.sqrt(abs(np.vdot(e, op.matrix @ e))))


def solve(h, b, tol=1e-7, max_iter=4000, x0=None, x_true=None):
    """Iterate cycles until ``||b - A x|| / ||b|| <= tol`` or ``max_iter`` cycles."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = h.fine.matrix
    b = np.asarray(b)
    x = np.zeros(A.shape[0], dtype=np.result_type(A.dtype, b.dtype)) if x0 is None else np.array(x0)
    bnorm = np.linalg.norm(b)
    scale = bnorm if bnorm > 0 else 1.0
    history = [float(np.linalg.norm(b - A @ x) / scale)]
    converged = history[0] <= tol
    it = 0
    while not converged and it < max_iter:
        x = cycle_once(h, 0, x, b)
        it += 1
        history.append(float(np.linalg.norm(b - A @ x) / scale))
        converged = history[-1] <= tol
    err = None if x_true is None else _a_norm(h.fine, x - x_true)
    return SolveReport(it, history, converged, err, solution=x)


def make_rhs_sine(op):
    """Exact solution sampling ``sin`` on ``[0, pi]`` over the flattened unknowns, and ``b = A x``."""
    N = op.N
    if N == 1:
        x = np.zeros(1)
    else:
        x = np.sin(np.pi * np.arange(N) / (N - 1))
    return x, op.matrix @ x
