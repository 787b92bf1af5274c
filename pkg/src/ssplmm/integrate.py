"""Fixed-step integration of multistep tables and monotonicity measurement."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .methods import Family, MethodTable

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
MAX_NEWTON_ITERS = 50
MAX_HALVINGS = 8
FD_STEP = 1e-7
MONOTONE_TOL = 1e-13
DT_REL_TOL = 1e-3


class NewtonError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"Newton failed after {iterations} iterations, residual {residual:.3e}")
        self.residual = residual
        self.iterations = iterations


class Starting(str, enum.Enum):
    EULER_SPINUP = "euler_spinup"
    SUPPLIED = "supplied"


def containment_violation(u) -> float:
    """``max(u - 1, -u, 0)`` over all components."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        return np.inf
    return float(max(np.max(u - 1.0), np.max(-u), 0.0))


@dataclass(frozen=True)
class IvpProblem:
    """Right-hand sides ``F`` and a second operator with their Euler radii.

    ``rhs_second`` is the downwind twin when integrated by a perturbed table
    and the stiff part when integrated by an additive table.  With
    ``containment`` set the functional is a containment violation and a
    trajectory is monotone when it never becomes positive.  ``componentwise``
    marks operators acting entry by entry, so that several scalar initial
    values can be stacked into one state; ``second_componentwise`` says the
    same of ``rhs_second`` alone.  ``bounds`` is the invariant interval, used
    to pick the admissible root when an implicit equation has several.
    """

    dimension: int
    rhs_f: Callable
    rhs_second: Callable
    dt_fe: float
    dt_fe_second: float
    functional: Callable
    initial_state: np.ndarray
    jacobian_f: Callable | None = None
    jacobian_second: Callable | None = None
    containment: bool = False
    componentwise: bool = False
    second_componentwise: bool = False
    bounds: tuple | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not (self.dt_fe > 0 and self.dt_fe_second > 0):
            raise ValueError("forward-Euler radii must be positive")
        u0 = np.array(self.initial_state, dtype=float).reshape(-1)
        if u0.size != self.dimension:
            raise ValueError(f"initial state has {u0.size} entries, expected {self.dimension}")
        object.__setattr__(self, "initial_state", u0)

    def with_initial(self, u0) -> "IvpProblem":
        u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        return replace(self, dimension=u0.size, initial_state=u0)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    dt: float
    measures: np.ndarray = field(repr=False)
    containment: bool = False

    def __post_init__(self):
        if len(self.states) != len(self.measures):
            raise ValueError("states and measures differ in length")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _sign(method: MethodTable) -> float:
    # the downwind operator enters with a minus sign, the additive one with a plus
    return -1.0 if method.family is Family.PERTURBED else 1.0


def _fd_jacobian(fun, u):
    f0 = fun(u)
    J = np.empty((f0.size, u.size))
    for j in range(u.size):
        h = FD_STEP * (1.0 + abs(u[j]))
        up = u.copy()
        up[j] += h
        J[:, j] = (fun(up) - f0) / h
    return J


def _newton(method, problem, rhs, guess, dt):
    """Solve ``u - dt (b F(u) + s b2 G(u)) = rhs``."""
    b, b2 = method.beta[-1], _sign(method) * method.beta_second[-1]

    def residual(u):
        out = u - rhs
        if b != 0.0:
            out = out - dt * b * problem.rhs_f(u)
        if b2 != 0.0:
            out = out - dt * b2 * problem.rhs_second(u)
        return out

    def jacobian(u):
        J = np.eye(u.size)
        for c, fun, jac in ((b, problem.rhs_f, problem.jacobian_f),
                            (b2, problem.rhs_second, problem.jacobian_second)):
            if c != 0.0:
                J -= dt * c * (jac(u) if jac is not None else _fd_jacobian(fun, u))
        return J

    decoupled = ((b == 0.0 or problem.componentwise)
                 and (b2 == 0.0 or problem.componentwise or problem.second_componentwise))
    if decoupled:
        return _solve_decoupled(residual, lambda u: np.diag(jacobian(u)), guess, problem.bounds)

    u = np.array(guess, dtype=float)
    res = residual(u)
    for it in range(MAX_NEWTON_ITERS):
        if _converged(res, u):
            return u
        delta = np.linalg.solve(jacobian(u), res)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u - lam * delta
            tres = residual(trial)
            if np.max(np.abs(tres)) < np.max(np.abs(res)):
                break
            lam *= 0.5
        # after the last halving the smallest step is taken regardless
        u, res = trial, tres
        if not np.all(np.isfinite(res)):
            raise NewtonError(float("inf"), it + 1)
    if _converged(res, u):
        return u
    raise NewtonError(float(np.max(np.abs(res))), MAX_NEWTON_ITERS)


def _converged(res, u):
    return np.max(np.abs(res)) <= NEWTON_TOL * max(1.0, np.max(np.abs(u)))


def _solve_decoupled(residual, deriv, guess, bounds):
    """Independent scalar equations, safeguarded by a bracket where one exists.

    Inside ``bounds`` a sign change of the residual brackets the admissible
    root; Newton steps leaving the bracket are replaced by bisection.  Other
    components use Newton damped on their own residual.
    """
    u = np.array(guess, dtype=float)
    if bounds is not None:
        a = np.full_like(u, bounds[0])
        c = np.full_like(u, bounds[1])
        ra, rc = residual(a), residual(c)
        bracketed = ra * rc <= 0.0
        u = np.where(bracketed, np.clip(u, bounds[0], bounds[1]), u)
    else:
        bracketed = np.zeros(u.shape, dtype=bool)
    res = residual(u)
    for it in range(MAX_NEWTON_ITERS):
        if _converged(res, u):
            return u
        if np.any(bracketed):
            left = bracketed & (np.sign(res) == np.sign(ra))
            a = np.where(left, u, a)
            ra = np.where(left, res, ra)
            right = bracketed & ~left
            c = np.where(right, u, c)
            rc = np.where(right, res, rc)
        d = deriv(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = res / d
        newton = u - delta
        if bounds is not None:
            lo, hi = np.minimum(a, c), np.maximum(a, c)
            outside = bracketed & ~((newton > lo) & (newton < hi))
            newton = np.where(outside, 0.5 * (lo + hi), newton)
        trial = newton
        tres = residual(trial)
        free = ~bracketed
        lam = np.ones_like(u)
        for _ in range(MAX_HALVINGS):
            worse = free & ~(np.abs(tres) < np.abs(res))
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
            trial = np.where(free, u - lam * delta, trial)
            tres = residual(trial)
        u, res = trial, tres
        if not np.all(np.isfinite(res)):
            raise NewtonError(float("inf"), it + 1)
    if _converged(res, u):
        return u
    raise NewtonError(float(np.max(np.abs(res))), MAX_NEWTON_ITERS)


def _advance(method, problem, hist, fhist, ghist, dt):
    k = method.k
    s = _sign(method)
    u = method.alpha @ hist + dt * (method.beta[:k] @ fhist + s * method.beta_second[:k] @ ghist)
    if method.beta[-1] != 0.0 or method.beta_second[-1] != 0.0:
        # the explicit part is the first guess; the newest state is the fallback
        try:
            u = _newton(method, problem, u, u, dt)
        except NewtonError:
            u = _newton(method, problem, u, hist[-1], dt)
    return u


def _check_history(method, problem, history):
    hist = np.array(history, dtype=float)
    if hist.ndim == 1 and problem.dimension == 1:
        hist = hist[:, None]
    if hist.ndim != 2 or hist.shape[0] != method.k or hist.shape[1] != problem.dimension:
        raise ValueError(f"history must hold {method.k} states of dimension {problem.dimension}")
    return hist


def step(method: MethodTable, problem: IvpProblem, history, dt: float) -> np.ndarray:
    """One step from the ``k`` most recent states (oldest first)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    hist = _check_history(method, problem, history)
    fhist = np.array([problem.rhs_f(u) for u in hist])
    ghist = np.array([problem.rhs_second(u) for u in hist])
    return _advance(method, problem, hist, fhist, ghist, dt)


def spinup_radius(method: MethodTable, problem: IvpProblem) -> float:
    """Largest dt at which the forward-Euler start is itself monotone."""
    if method.family is Family.ADDITIVE:
        return 1.0 / (1.0 / problem.dt_fe + 1.0 / problem.dt_fe_second)
    return problem.dt_fe


def integrate(method: MethodTable, problem: IvpProblem, dt: float, n_steps: int,
              starting: Starting | str = Starting.EULER_SPINUP, history=None) -> Trajectory:
    """Integrate ``n_steps`` steps after ``k`` starting states.

    ``euler_spinup`` builds the starting states from ``problem.initial_state``
    by forward Euler on ``F`` (plus the second operator for additive tables);
    ``supplied`` takes them from ``history``.
    """
    starting = Starting(starting)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    k = method.k
    additive = method.family is Family.ADDITIVE
    states = np.empty((n_steps + k, problem.dimension))
    if starting is Starting.SUPPLIED:
        if history is None:
            raise ValueError("supplied start needs a history")
        states[:k] = _check_history(method, problem, history)
    else:
        radius = spinup_radius(method, problem)
        if dt > radius:
            raise ValueError(f"euler spin-up needs dt <= {radius}, got {dt}")
        states[0] = problem.initial_state
        for n in range(1, k):
            u = states[n - 1]
            f = problem.rhs_f(u)
            if additive:
                f = f + problem.rhs_second(u)
            states[n] = u + dt * f
    fvals = np.empty_like(states)
    gvals = np.empty_like(states)
    for n in range(k):
        fvals[n] = problem.rhs_f(states[n])
        gvals[n] = problem.rhs_second(states[n])
    for n in range(k, n_steps + k):
        states[n] = _advance(method, problem, states[n - k:n], fvals[n - k:n], gvals[n - k:n], dt)
        fvals[n] = problem.rhs_f(states[n])
        gvals[n] = problem.rhs_second(states[n])
    measures = np.array([problem.functional(u) for u in states])
    return Trajectory(states, float(dt), measures, problem.containment)


def monotone_measure(trajectory: Trajectory, k: int) -> float:
    """Largest excess of a measure over the max of the ``k`` before it.

    For containment trajectories the measures are violations and the largest
    one is returned.  Fewer than ``k + 1`` states means nothing was stepped
    and the result is 0.
    """
    m = np.asarray(trajectory.measures, dtype=float)
    m = np.where(np.isnan(m), np.inf, m)
    if trajectory.containment:
        return float(max(np.max(m), 0.0)) + 0.0 if m.size else 0.0
    worst = 0.0
    for n in range(k, m.size):
        worst = max(worst, m[n] - np.max(m[n - k:n]))
    return float(worst)


def default_u0_grid(n: int = 33) -> np.ndarray:
    """``n`` equispaced points strictly inside (0, 1)."""
    return np.arange(1, n + 1) / (n + 1)


def is_monotone(method: MethodTable, problem: IvpProblem, dt: float, u0_grid,
                n_steps: int = 1000, tol: float = MONOTONE_TOL) -> bool:
    """Monotone from every initial value in ``u0_grid``.

    The start is forward Euler when ``dt`` allows it; otherwise each initial
    value is repeated ``k`` times as a constant history.
    """
    if problem.componentwise:
        inits = [np.concatenate([np.atleast_1d(np.asarray(u, dtype=float)) for u in u0_grid])]
    else:
        inits = [np.asarray(u, dtype=float) for u in u0_grid]
    for u0 in inits:
        prob = problem.with_initial(u0)
        # unstable steps may overflow; the violation is then infinite
        with np.errstate(over="ignore", invalid="ignore"):
            if dt <= spinup_radius(method, prob):
                traj = integrate(method, prob, dt, n_steps)
            else:
                traj = integrate(method, prob, dt, n_steps, Starting.SUPPLIED,
                                 np.repeat(u0[None, :], method.k, axis=0))
        if monotone_measure(traj, method.k) > tol:
            return False
    return True


def max_monotone_dt(method: MethodTable, problem: IvpProblem, k: int, dt_bracket,
                    u0_grid=None, n_steps: int = 1000, rel_tol: float = DT_REL_TOL) -> float:
    """Largest dt in the bracket that is monotone over the whole grid.

    Returns the lower bracket end when even that fails, and the upper end when
    it passes.  Bisection assumes the predicate switches once in the bracket.
    """
    if k != method.k:
        raise ValueError(f"k = {k} does not match the table's k = {method.k}")
    lo, hi = (float(x) for x in dt_bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    grid = default_u0_grid() if u0_grid is None else list(u0_grid)
    if len(grid) == 0:
        raise ValueError("u0 grid must be nonempty")

    def ok(dt):
        try:
            return is_monotone(method, problem, dt, grid, n_steps)
        except NewtonError:
            return False

    if ok(hi):
        return hi
    if not ok(lo):
        log.info("lower bracket end %g is not monotone", lo)
        return lo
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
