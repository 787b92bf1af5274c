"""Test problems with known forward-Euler radii.

Both problems preserve the interval [0, 1]; their monotonicity functional is
the containment violation ``max(u - 1, -u, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import IvpProblem, containment_violation


def harmonic_step_size(eps_list) -> float:
    """Forward-Euler radius ``(sum 1/eps_i)^-1`` of a sum of operators."""
    eps = np.asarray(eps_list, dtype=float).reshape(-1)
    if eps.size == 0:
        raise ValueError("need at least one step size")
    if np.any(~np.isfinite(eps)) or np.any(eps <= 0):
        raise ValueError("step sizes must be positive and finite")
    return float(1.0 / np.sum(1.0 / eps))


def cubic_rhs(u):
    return u * u * (u - 1.0)


def cubic_jacobian(u):
    return np.diag(3.0 * u * u - 2.0 * u)


def scalar_cubic_problem(u0=0.5) -> IvpProblem:
    """``u' = u^2 (u - 1)`` with ``F = F̃``, ``dt_fe = 4`` and ``dt_fe_second = 1``.

    ``u0`` may be an array; the right-hand side acts componentwise, so each
    entry evolves as an independent copy of the scalar problem.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    return IvpProblem(
        dimension=u0.size,
        rhs_f=cubic_rhs,
        rhs_second=cubic_rhs,
        dt_fe=4.0,
        dt_fe_second=1.0,
        functional=containment_violation,
        initial_state=u0,
        jacobian_f=cubic_jacobian,
        jacobian_second=cubic_jacobian,
        containment=True,
        componentwise=True,
        bounds=(0.0, 1.0),
    )


@dataclass(frozen=True)
class LeVequeYeeConfig:
    """Grid and parameters of the advection-reaction problem.

    The flux is linear, ``f(U) = U``, so the upwind radius ``tau`` equals ``dx``
    unless set otherwise.
    """

    m: int = 200
    dx: float | None = None
    mu: float = 1.0
    tau: float | None = None
    flux: str = "linear"

    def __post_init__(self):
        if self.m < 3:
            raise ValueError("need at least 3 grid cells")
        dx = 1.0 / self.m if self.dx is None else float(self.dx)
        tau = dx if self.tau is None else float(self.tau)
        if dx <= 0 or tau <= 0 or self.mu <= 0:
            raise ValueError("dx, tau and mu must be positive")
        if self.flux != "linear":
            raise ValueError(f"unsupported flux {self.flux!r}")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_mu_tau(cls, mu_tau: float, m: int = 200) -> "LeVequeYeeConfig":
        dx = 1.0 / m
        return cls(m=m, dx=dx, mu=mu_tau / dx, tau=dx)


def reaction(u, mu):
    return -mu * u * (u - 1.0) * (u - 0.5)


def reaction_derivative(u, mu):
    return -mu * (3.0 * u * u - 3.0 * u + 0.5)


def upwind(u, dx):
    return -(u - np.roll(u, 1)) / dx


def downwind(u, dx):
    return -(np.roll(u, -1) - u) / dx


def _difference_matrix(m, dx, shift):
    eye = np.eye(m)
    if shift > 0:
        return -(eye - np.roll(eye, -1, axis=1)) / dx
    return -(np.roll(eye, 1, axis=1) - eye) / dx


def smoothed_step(m: int, width: float = 0.02) -> np.ndarray:
    """Periodic plateau of height one on [0.25, 0.75] with tanh edges."""
    x = (np.arange(m) + 0.5) / m
    return 0.5 * (np.tanh((x - 0.25) / width) - np.tanh((x - 0.75) / width))


def total_variation(u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sum(np.abs(u - np.roll(u, 1))))


def leveque_yee_problem(config: LeVequeYeeConfig, u0=None) -> IvpProblem:
    """Upwind ``F = D + S`` with downwind twin ``F̃ = D̃ + S`` on a periodic grid."""
    mu, dx, tau = config.mu, config.dx, config.tau
    u0 = smoothed_step(config.m) if u0 is None else np.asarray(u0, dtype=float)
    D = _difference_matrix(config.m, dx, 1)
    Dt = _difference_matrix(config.m, dx, -1)
    return IvpProblem(
        dimension=config.m,
        rhs_f=lambda u: upwind(u, dx) + reaction(u, mu),
        rhs_second=lambda u: downwind(u, dx) + reaction(u, mu),
        dt_fe=harmonic_step_size([tau, 2.0 / mu]),
        dt_fe_second=harmonic_step_size([tau, 16.0 / mu]),
        functional=containment_violation,
        initial_state=u0,
        jacobian_f=lambda u: D + np.diag(reaction_derivative(u, mu)),
        jacobian_second=lambda u: Dt + np.diag(reaction_derivative(u, mu)),
        containment=True,
        bounds=(0.0, 1.0),
    )


def leveque_yee_imex_problem(config: LeVequeYeeConfig, u0=None) -> IvpProblem:
    """Additive split: advection ``D`` explicit, stiff reaction ``S`` implicit."""
    mu, dx, tau = config.mu, config.dx, config.tau
    u0 = smoothed_step(config.m) if u0 is None else np.asarray(u0, dtype=float)
    D = _difference_matrix(config.m, dx, 1)
    return IvpProblem(
        dimension=config.m,
        rhs_f=lambda u: upwind(u, dx),
        rhs_second=lambda u: reaction(u, mu),
        dt_fe=tau,
        dt_fe_second=2.0 / mu,
        functional=containment_violation,
        initial_state=u0,
        jacobian_f=lambda u: D,
        jacobian_second=lambda u: np.diag(reaction_derivative(u, mu)),
        containment=True,
        second_componentwise=True,
        bounds=(0.0, 1.0),
    )
