"""Dense phase-1 simplex for feasibility of ``A x = b, x >= 0``."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_SCALE_FLOOR = np.sqrt(np.finfo(float).tiny)


@dataclass(frozen=True)
class LpProblem:
    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        A = np.ascontiguousarray(np.array(self.matrix, dtype=float))
        b = np.array(self.rhs, dtype=float).reshape(-1)
        if A.ndim != 2:
            raise ValueError("constraint matrix must be two-dimensional")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("constraint matrix needs at least one row and one column")
        if b.size != A.shape[0]:
            raise ValueError(f"rhs has {b.size} entries for {A.shape[0]} rows")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("constraint data must be finite")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    basis: tuple
    residual_norm: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x > 0)


def residual_norm(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    r = A.astype(np.longdouble) @ x.astype(np.longdouble) - b.astype(np.longdouble)
    return float(np.max(np.abs(r))) if r.size else 0.0


def _refine(A: np.ndarray, b: np.ndarray, cols: list[int], rounds: int = 3,
            start: np.ndarray | None = None) -> np.ndarray:
    """Least-squares solve on the chosen columns with iterative refinement."""
    x = np.zeros(A.shape[1])
    if not cols:
        return x
    B = A[:, cols]
    if start is None:
        xs = np.linalg.lstsq(B, b, rcond=None)[0]
    else:
        xs = np.array(start, dtype=float)
    Bl = B.astype(np.longdouble)
    bl = b.astype(np.longdouble)
    for _ in range(rounds):
        r = np.asarray(bl - Bl @ xs.astype(np.longdouble), dtype=float)
        xs = xs + np.linalg.lstsq(B, r, rcond=None)[0]
    x[cols] = xs
    return x


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray):
        m, n = A.shape
        self.m, self.n = m, n
        self.T = np.zeros((m, n + m + 1))
        self.T[:, :n] = A
        self.T[:, n:n + m] = np.eye(m)
        self.T[:, -1] = b
        self.basis = list(range(n, n + m))
        # phase-1 reduced costs: minimise the sum of artificials
        self.cost = np.zeros(n + m + 1)
        self.cost[:n] = -A.sum(axis=0)
        self.cost[-1] = -b.sum()
        self.allowed = np.ones(n + m, dtype=bool)

    def pivot(self, i: int, j: int):
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        T -= np.outer(col, T[i])
        self.cost -= self.cost[j] * T[i]
        leaving = self.basis[i]
        self.basis[i] = j
        if leaving >= self.n:
            self.allowed[leaving] = False

    def run(self, max_iter: int):
        for _ in range(max_iter):
            d = self.cost[:-1]
            candidates = np.flatnonzero((d < -_COST_TOL) & self.allowed)
            if candidates.size == 0:
                return
            j = int(candidates[0])
            colj = self.T[:, j]
            rows = np.flatnonzero(colj > PIVOT_TOL)
            if rows.size == 0:
                # unbounded direction cannot occur in phase 1; treat as stalled
                self.allowed[j] = False
                continue
            ratios = self.T[rows, -1] / colj[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-15 * max(1.0, abs(best))]
            i = min(tied, key=lambda r: self.basis[r])
            self.pivot(int(i), j)
        raise RuntimeError("simplex iteration limit reached")

    def drive_out_artificials(self):
        n = self.n
        for i in range(self.m):
            if self.basis[i] < n:
                continue
            row = np.abs(self.T[i, :n])
            row[[b for b in self.basis if b < n]] = 0.0
            j = int(np.argmax(row))
            if row[j] > 1e-9:
                self.pivot(i, j)
            # otherwise the row is redundant and its artificial stays at zero


def solve_feasibility(problem: LpProblem, feas_tol: float = FEAS_TOL) -> LpSolution | None:
    """Basic feasible solution of ``A x = b, x >= 0``, or ``None`` when infeasible.

    Columns are scaled to unit max-norm and rows sign-normalised before the
    phase-1 simplex (Bland's rule).  The returned ``x`` is polished by a
    refined least-squares solve on the final basis.
    """
    A, b = problem.matrix, problem.rhs
    m, n = A.shape
    scale = np.abs(A).max(axis=0)
    # columns below the floor stay tiny after scaling and never enter the basis
    scale = np.where(scale < _SCALE_FLOOR, 1.0, scale)
    As = A / scale
    sign = np.where(b < 0, -1.0, 1.0)
    tab = _Tableau(As * sign[:, None], b * sign)
    tab.run(max_iter=50 * (m + n) + 100)
    phase1 = -tab.cost[-1]
    if phase1 > feas_tol * max(1.0, np.abs(b).max()):
        return None
    tab.drive_out_artificials()
    cols = sorted(j for j in tab.basis if j < n)
    x_tab = np.zeros(n)
    for i, j in enumerate(tab.basis):
        if j < n:
            x_tab[j] = max(tab.T[i, -1], 0.0)
    x_ref = _refine(As, b, cols, start=x_tab[cols])
    best = None
    for xs in (x_ref, x_tab):
        if np.any(xs < -feas_tol):
            continue
        x = np.maximum(xs, 0.0) / scale
        res = residual_norm(A, x, b)
        if res <= feas_tol and (best is None or res < best[1]):
            best = (x, res)
    if best is None:
        log.debug("phase 1 succeeded but no basic solution meets the residual tolerance")
        return None
    return LpSolution(best[0], tuple(cols), best[1])


def certify_infeasible(problem: LpProblem, tol: float = FEAS_TOL) -> np.ndarray | None:
    """Farkas vector ``v`` with ``v^T A <= tol`` and ``v^T b = 1``, or ``None``.

    Solved as its own feasibility problem in ``(v+, v-, s)``:
    ``A^T (v+ - v-) + s = 0``, ``b^T (v+ - v-) = 1``.
    """
    A, b = problem.matrix, problem.rhs
    m, n = A.shape
    M = np.zeros((n + 1, 2 * m + n))
    M[:n, :m] = A.T
    M[:n, m:2 * m] = -A.T
    M[:n, 2 * m:] = np.eye(n)
    M[n, :m] = b
    M[n, m:2 * m] = -b
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    sol = solve_feasibility(LpProblem(M, rhs))
    if sol is None:
        return None
    v = sol.x[:m] - sol.x[m:2 * m]
    if np.max(v @ A) > tol or v @ b <= 0:
        return None
    return v
