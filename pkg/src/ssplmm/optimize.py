"""Optimal SSP multistep methods by bisection over linear feasibility problems.

For a trial coefficient ``r`` (and ``r_second = y r``) the monotonicity slacks
``gamma_j = alpha_j - r beta_j - r_second beta2_j`` turn the order conditions
into a linear system in nonnegative unknowns.  The largest feasible ``r`` is the
optimal SSP coefficient.  Rows are divided by ``k**i`` so that every system has
a right-hand side of ones; this leaves the feasible set unchanged.
"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .lp import LpProblem, LpSolution, _refine, residual_norm, solve_feasibility
from .methods import Family, MethodTable, SspCertificate, moment_derivative

log = logging.getLogger(__name__)

BISECT_TOL = 1e-6
R_CAP = 1e6
SUPPORT_TOL = 1e-10
_MARGIN = 1e-3
# the row-normalised systems are O(1), so a residual well below the generic
# LP tolerance is attainable and keeps bisection from accepting r past the vertex
LP_TOL = 1e-12


class OptFamily(str, enum.Enum):
    CLASSICAL = "classical"
    PERTURBED = "perturbed"
    ADDITIVE = "additive"
    IMEX = "imex"


class BracketCapError(RuntimeError):
    """Raised when the feasible range of r extends past the bracket cap."""


@dataclass(frozen=True)
class OptimalMethodResult:
    family: OptFamily
    method: MethodTable
    certificate: SspCertificate
    k: int
    p: int
    y: float
    bisection_gap: float
    nonzero_count: int
    lp_solution: np.ndarray

    @property
    def r(self) -> float:
        return self.certificate.r


@dataclass(frozen=True)
class RegionSample:
    y: float
    c: float
    c_second: float


def _moments(k: int, p: int):
    j = np.arange(k + 1, dtype=float)
    a = j[None, :] ** np.arange(p + 1, dtype=float)[:, None]
    da = np.column_stack([moment_derivative(jj, p) for jj in range(k + 1)])
    scale = float(k) ** np.arange(p + 1, dtype=float)
    return a, da, scale


def _check_sizes(k, p, y, r):
    if k < 1 or p < 1:
        raise ValueError(f"need k >= 1 and p >= 1, got k={k}, p={p}")
    if y < 0 or r < 0:
        raise ValueError("y and r must be nonnegative")


def _perturbed_matrix(k, p, y, r, explicit, downwind=True):
    a, da, scale = _moments(k, p)
    rt = y * r
    M = np.zeros((p + 1, 3 * k + 2))
    M[:, :k] = a[:, :k]
    beta = r * a + da
    beta[:, k] = da[:, k]
    tilde = rt * a - da
    tilde[:, k] = -da[:, k]
    M[:, k:2 * k + 1] = beta
    if downwind:
        M[:, 2 * k + 1:] = tilde
    if explicit:
        M[:, 2 * k] = 0.0
        M[:, 3 * k + 1] = 0.0
    return LpProblem(M / scale[:, None], a[:, k] / scale)


def build_perturbed_lp(k: int, p: int, y: float, r: float, explicit: bool = True) -> LpProblem:
    """Feasibility system in ``(gamma_0..k-1, beta_0..k, beta2_0..k)``."""
    _check_sizes(k, p, y, r)
    return _perturbed_matrix(k, p, y, r, explicit)


def build_classical_lp(k: int, p: int, r: float, explicit: bool = True) -> LpProblem:
    """Perturbed layout with the downwind columns zeroed."""
    _check_sizes(k, p, 0.0, r)
    return _perturbed_matrix(k, p, 0.0, r, explicit, downwind=False)


def build_additive_lp(k: int, p: int, y: float, r: float, explicit: bool = True) -> LpProblem:
    """Both order-condition sets of an additive method in ``(gamma, beta, beta_hat)``.

    The zeroth-order row is shared, giving ``2p + 1`` rows.
    """
    _check_sizes(k, p, y, r)
    a, da, scale = _moments(k, p)
    rh = y * r
    ak = a[:, :k]
    rows = []
    for deriv_on_first in (True, False):
        block = np.zeros((p + 1, 3 * k + 2))
        block[:, :k] = ak
        block[:, k:2 * k] = r * ak
        block[:, 2 * k + 1:3 * k + 1] = rh * ak
        if deriv_on_first:
            block[:, k:2 * k + 1] += da
        else:
            block[:, 2 * k + 1:] += da
        rows.append(block / scale[:, None])
    M = np.vstack([rows[0], rows[1][1:]])
    if explicit:
        M[:, 2 * k] = 0.0
        M[:, 3 * k + 1] = 0.0
    rhs = np.concatenate([a[:, k] / scale, a[1:, k] / scale[1:]])
    return LpProblem(M, rhs)


def build_imex_lp(k: int, p: int, y: float, r: float) -> LpProblem:
    """IMEX system in ``(gamma_0..k-1, beta_0..k-1, beta_hat_0..k)``.

    Order rows ``i = 0..p`` of the explicit part, with
    ``alpha_j = gamma_j + r (beta_j + y beta_hat_j)``, plus coupling rows
    ``sum_j (beta_j - beta_hat_j) j^i - beta_hat_k k^i = 0`` for ``i = 0..p-1``.
    """
    _check_sizes(k, p, y, r)
    a, da, scale = _moments(k, p)
    ak = a[:, :k]
    top = np.zeros((p + 1, 3 * k + 1))
    top[:, :k] = ak
    top[:, k:2 * k] = r * ak + da[:, :k]
    top[:, 2 * k:3 * k] = y * r * ak
    coupling = np.zeros((p, 3 * k + 1))
    coupling[:, k:2 * k] = a[:p, :k]
    coupling[:, 2 * k:3 * k] = -a[:p, :k]
    coupling[:, 3 * k] = -a[:p, k]
    M = np.vstack([top / scale[:, None], coupling / scale[:p, None]])
    rhs = np.concatenate([a[:, k] / scale, np.zeros(p)])
    return LpProblem(M, rhs)


def _builder(family: OptFamily, k, p, y, explicit):
    if family is OptFamily.CLASSICAL:
        return lambda r: build_classical_lp(k, p, r, explicit)
    if family is OptFamily.PERTURBED:
        return lambda r: build_perturbed_lp(k, p, y, r, explicit)
    if family is OptFamily.ADDITIVE:
        return lambda r: build_additive_lp(k, p, y, r, explicit)
    return lambda r: build_imex_lp(k, p, y, r)


def _reconstruct(family: OptFamily, x, k, y, r, explicit):
    """Method table and slack vector from an LP solution at ``r``."""
    gamma = x[:k].copy()
    if family is OptFamily.IMEX:
        beta = np.append(x[k:2 * k], 0.0)
        beta2 = x[2 * k:3 * k + 1].copy()
        alpha = gamma + r * beta[:k] + y * r * beta2[:k]
        return MethodTable(k, Family.ADDITIVE, alpha, beta, beta2, explicit=False), gamma
    beta = x[k:2 * k + 1].copy()
    beta2 = x[2 * k + 1:3 * k + 2].copy()
    if family is OptFamily.CLASSICAL:
        alpha = gamma + r * beta[:k]
        return MethodTable(k, Family.CLASSICAL, alpha, beta, None, explicit), gamma
    alpha = gamma + r * beta[:k] + y * r * beta2[:k]
    fam = Family.PERTURBED if family is OptFamily.PERTURBED else Family.ADDITIVE
    return MethodTable(k, fam, alpha, beta, beta2, explicit), gamma


def _follow_basis(build, cols, lo: float, hi: float):
    """Largest r near ``lo`` at which the basis ``cols`` stays nonnegative.

    Returns ``(r, x)`` with one basic variable driven to zero, or ``None``.
    """
    def basic(r):
        prob = build(r)
        return _refine(prob.matrix, prob.rhs, cols)[cols]

    # degenerate basic variables hover at rounding level; the final
    # nonnegativity check below still covers them
    tracked = np.abs(basic(lo)) > 1e-12
    if not np.any(tracked):
        return None

    def g(r):
        return float(np.min(basic(r)[tracked]))

    # a tolerance-accepted lo may sit marginally past the vertex; look back
    # at most one bisection gap
    lower = lo
    if g(lo) <= 0:
        lower = max(lo - max(hi - lo, 1e-12), 0.0)
        if g(lower) <= 0:
            return None
    upper = lo if lower < lo else hi
    for _ in range(20):
        if g(upper) < 0:
            break
        upper = lower + 2.0 * (upper - lower)
    else:
        return None
    r_star = brentq(g, lower, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    vals = np.where(tracked, basic(r_star), np.inf)
    keep = [c for c in cols if c != cols[int(np.argmin(vals))]]
    prob = build(r_star)
    x = _refine(prob.matrix, prob.rhs, keep)
    if np.any(x < -1e-12) or residual_norm(prob.matrix, np.maximum(x, 0.0), prob.rhs) > 1e-12:
        return None
    return r_star, np.maximum(x, 0.0)


def _polish(build, sol: LpSolution, lo: float, hi: float):
    """Move from the last feasible bisection point to the vertex of its basis.

    At the optimum one basic variable vanishes, which is what gives optimal
    methods their small support.  Falls back to ``(lo, sol.x)``.
    """
    if sol.basis:
        found = _follow_basis(build, list(sol.basis), lo, hi)
        if found is not None:
            return found
    return lo, sol.x


def optimal_method(family, k: int, p: int, y: float = 1.0, explicit: bool = True,
                   bisect_tol: float = BISECT_TOL, r_cap: float = R_CAP) -> OptimalMethodResult | None:
    """Largest SSP coefficient of a k-step order-p method in ``family``.

    Returns ``None`` if no method with a positive coefficient exists.  Raises
    :class:`BracketCapError` if feasibility persists up to ``r_cap``.
    ``family='imex'`` always treats the second operator implicitly and ignores
    ``explicit``; ``family='classical'`` ignores ``y``.
    """
    family = OptFamily(family)
    if family is OptFamily.CLASSICAL:
        y = 0.0
    if family is OptFamily.IMEX:
        explicit = False
    build = _builder(family, k, p, y, explicit)

    def feasible(r):
        return solve_feasibility(build(r), feas_tol=LP_TOL)

    best = feasible(0.0)
    if best is None:
        return None
    lo = 0.0
    hi = 2.0 * (1.0 + _MARGIN) if p >= 2 else 1.0
    while True:
        sol = feasible(hi)
        if sol is None:
            break
        lo, best = hi, sol
        if hi >= r_cap:
            raise BracketCapError(f"feasible at r={hi:g}; SSP coefficient unbounded (capped)")
        hi = min(2.0 * hi, r_cap)
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        sol = feasible(mid)
        if sol is None:
            hi = mid
        else:
            lo, best = mid, sol
    if lo == 0.0:
        return None
    r, x = _polish(build, best, lo, hi)
    method, gamma = _reconstruct(family, x, k, y, r, explicit)
    cert = SspCertificate(r, y * r, float(y), gamma)
    nonzero = int(np.count_nonzero(x > SUPPORT_TOL))
    return OptimalMethodResult(family, method, cert, k, p, float(y), hi - lo, nonzero, x)


def _region_point(family, k, p, explicit, y):
    res = optimal_method(family, k, p, y, explicit)
    c = 0.0 if res is None else res.r
    return RegionSample(float(y), c, float(y) * c)


def region_scan(family, k: int, p: int, y_grid, explicit: bool = True,
                workers: int | None = None) -> list[RegionSample]:
    """Optimal coefficient at each ``y``; zero where no SSP method exists."""
    ys = [float(v) for v in np.asarray(y_grid, dtype=float).reshape(-1)]
    if any(v < 0 for v in ys):
        raise ValueError("y grid must be nonnegative")
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise ValueError("y grid must be strictly increasing")
    point = partial(_region_point, OptFamily(family), k, p, explicit)
    if workers and workers > 1 and len(ys) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(point, ys))
    return [point(v) for v in ys]


def _split(result: OptimalMethodResult):
    k = result.k
    x = result.lp_solution
    if result.family is OptFamily.IMEX:
        return x[:k], x[k:2 * k], x[2 * k:]
    return x[:k], x[k:2 * k + 1], x[2 * k + 1:]


def verify_nonzero_bound(result: OptimalMethodResult, tol: float = SUPPORT_TOL) -> bool:
    """At most ``p`` positive coefficients at the optimum.

    Perturbed and classical results count ``(gamma, beta, beta2)``; additive
    results count ``(delta, beta)`` with ``delta_j = alpha_j - r beta_j`` after
    the canonical reconstruction ``beta_hat = beta``.
    """
    if result.family is OptFamily.IMEX:
        raise ValueError("no support bound is claimed for IMEX methods")
    if result.family is OptFamily.ADDITIVE:
        canon = canonical_additive(result)
        if canon is None:
            return False
        m = canon.method
        delta = m.alpha - result.r * m.beta[:result.k]
        count = np.count_nonzero(delta > tol) + np.count_nonzero(m.beta > tol)
        return bool(count <= result.p)
    return bool(np.count_nonzero(result.lp_solution > tol) <= result.p)


def canonical_additive(result: OptimalMethodResult, tol: float = 1e-10) -> OptimalMethodResult | None:
    """Additive result rewritten with ``beta_hat = beta``, checked at the same r.

    Tries ``beta_hat := beta`` first and then ``beta := beta_hat``; returns
    ``None`` if neither choice keeps the slacks nonnegative and the order
    conditions satisfied.
    """
    from .methods import order_residuals

    if result.family is not OptFamily.ADDITIVE:
        raise ValueError("canonical_additive expects an additive result")
    m, r, y, k = result.method, result.r, result.y, result.k
    for shared in (m.beta, m.beta_second):
        gamma = m.alpha - (1.0 + y) * r * shared[:k]
        if np.min(gamma) < -tol:
            continue
        table = MethodTable(k, Family.ADDITIVE, m.alpha, shared, shared, m.explicit)
        if np.max(np.abs(order_residuals(table, result.p))) > 1e-8:
            continue
        gamma = np.maximum(gamma, 0.0)
        x = np.concatenate([gamma, shared, shared])
        cert = SspCertificate(r, y * r, y, gamma)
        return OptimalMethodResult(result.family, table, cert, k, result.p, y,
                                   result.bisection_gap,
                                   int(np.count_nonzero(x > SUPPORT_TOL)), x)
    return None


def verify_additive_beta_equality(result: OptimalMethodResult, tol: float = 1e-8) -> bool:
    """Optimal additive methods share one weight sequence for both operators."""
    if result.family is not OptFamily.ADDITIVE:
        raise ValueError("verify_additive_beta_equality expects an additive result")
    m = result.method
    if np.max(np.abs(m.beta - m.beta_second)) <= tol:
        return True
    canon = canonical_additive(result)
    return canon is not None and bool(
        np.max(np.abs(canon.method.beta - canon.method.beta_second)) <= tol)


class Uniqueness(str, enum.Enum):
    UNIQUE = "unique"
    INCONCLUSIVE = "inconclusive"


def uniqueness_test(result: OptimalMethodResult, margin: float = 1e-9) -> Uniqueness:
    """Sufficient determinant test for uniqueness of an optimal perturbed method.

    The ``p`` active columns of the feasibility system at the optimum are
    completed by each inactive column in turn; a constant nonzero sign of the
    resulting determinants proves that no other optimal method exists.
    """
    if result.family is not OptFamily.PERTURBED:
        raise ValueError("uniqueness_test expects a perturbed result")
    x = result.lp_solution
    active = np.flatnonzero(x > SUPPORT_TOL)
    if active.size != result.p:
        raise ValueError(f"active support has size {active.size}, expected p={result.p}")
    k = result.k
    explicit = result.method.explicit
    A = build_perturbed_lp(k, result.p, result.y, result.r, explicit).matrix
    cols = A / np.maximum(np.linalg.norm(A, axis=0), 1e-300)
    base = cols[:, active]
    inactive = [c for c in range(A.shape[1]) if c not in set(active)]
    if explicit:
        inactive = [c for c in inactive if c not in (2 * k, 3 * k + 1)]
    dets = np.array([np.linalg.det(np.column_stack([base, cols[:, c]])) for c in inactive])
    if dets.size == 0:
        return Uniqueness.UNIQUE
    if np.all(dets > margin) or np.all(dets < -margin):
        return Uniqueness.UNIQUE
    return Uniqueness.INCONCLUSIVE


def random_restart_solutions(result: OptimalMethodResult, n_restarts: int = 20,
                             offset: float = 1e-6, seed: int = 0) -> np.ndarray:
    """Basic solutions at ``r = C - offset`` under random column orderings.

    Different orderings steer Bland's rule to different vertices; a tight
    spread is empirical evidence of a unique optimum.
    """
    rng = np.random.default_rng(seed)
    r = max(result.r - offset, 0.0)
    family = result.family
    build = _builder(family, result.k, result.p, result.y, result.method.explicit)
    prob = build(r)
    out = []
    for _ in range(n_restarts):
        perm = rng.permutation(prob.n_cols)
        sol = solve_feasibility(LpProblem(prob.matrix[:, perm], prob.rhs))
        if sol is None:
            continue
        x = np.empty(prob.n_cols)
        x[perm] = sol.x
        out.append(x)
    return np.array(out)


def theoretical_step(result: OptimalMethodResult, dt_fe: float, dt_fe_second: float) -> float:
    """Guaranteed monotone step ``min(C dt_fe, C_second dt_fe_second)``."""
    return min(result.r * dt_fe, result.certificate.r_second * dt_fe_second)
