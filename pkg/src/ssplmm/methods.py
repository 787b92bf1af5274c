"""Coefficient tables for classical, perturbed (downwind) and additive multistep methods.

A k-step method advances

    u_n = sum_j alpha_j u_{n-k+j} + dt * sum_j (beta_j F(u_{n-k+j}) -/+ beta2_j G(u_{n-k+j}))

where ``G`` is the downwind operator (subtracted) for perturbed tables and the
second additive operator (added) for additive tables.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

MAX_STEPS = 64
ORDER_TOL = 1e-10
FLUSH_TOL = 1e-13


class Family(str, enum.Enum):
    CLASSICAL = "classical"
    PERTURBED = "perturbed"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class MethodTable:
    """Dense coefficient arrays of a k-step method.

    ``alpha`` has k entries, ``beta`` and ``beta_second`` have k + 1; the last
    entry of each beta array is the implicit weight.  ``beta_second`` holds the
    downwind weights of a perturbed table or the weights on the second operator
    of an additive table, and is all zero for classical tables.
    """

    k: int
    family: Family
    alpha: np.ndarray
    beta: np.ndarray
    beta_second: np.ndarray = None
    explicit: bool = True

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.k > MAX_STEPS:
            raise ValueError(f"k = {self.k} exceeds the supported maximum {MAX_STEPS}")
        family = Family(self.family)
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if self.beta_second is None:
            beta2 = np.zeros(self.k + 1)
        else:
            beta2 = np.array(self.beta_second, dtype=float).reshape(-1)
        if alpha.size != self.k:
            raise ValueError(f"alpha must have {self.k} entries, got {alpha.size}")
        if beta.size != self.k + 1 or beta2.size != self.k + 1:
            raise ValueError(f"beta arrays must have {self.k + 1} entries")
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))
                and np.all(np.isfinite(beta2))):
            raise ValueError("coefficients must be finite")
        if family is Family.CLASSICAL and np.any(beta2 != 0.0):
            raise ValueError("classical tables carry no second beta array")
        if self.explicit and (beta[-1] != 0.0 or beta2[-1] != 0.0):
            raise ValueError("explicit tables need zero implicit weights")
        for a in (alpha, beta, beta2):
            a.flags.writeable = False
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta_second", beta2)
        object.__setattr__(self, "explicit", bool(self.explicit))

    @property
    def implicit(self) -> bool:
        return self.beta[-1] != 0.0 or self.beta_second[-1] != 0.0


@dataclass(frozen=True)
class SspCertificate:
    """SSP coefficient pair ``(r, r_second = y r)`` with the slack ``gamma``.

    When no step-size bound applies (all relevant weights vanish) ``unbounded``
    is set; ``r`` is then ``inf`` for display only and must not enter arithmetic.
    """

    r: float
    r_second: float
    y: float
    gamma: np.ndarray = field(repr=False)
    unbounded: bool = False


@dataclass(frozen=True)
class MomentVector:
    entries: np.ndarray

    def __len__(self):
        return self.entries.size


def _flush(a: np.ndarray, tol: float = FLUSH_TOL) -> np.ndarray:
    out = np.array(a, dtype=float)
    out[np.abs(out) < tol] = 0.0
    return out + 0.0  # drops negative zeros


def _condition_residuals(alpha, beta, k, p):
    # row i: sum_j alpha_j j^i + sum_j beta_j i j^(i-1) - k^i, summed exactly
    alpha = [Fraction(float(a)) for a in alpha]
    beta = [Fraction(float(b)) for b in beta]
    res = []
    for i in range(p + 1):
        total = sum(alpha[j] * j ** i for j in range(k)) - k ** i
        if i >= 1:
            total += sum(beta[j] * i * j ** (i - 1) for j in range(k + 1))
        res.append(float(total))
    return res


def order_residuals(method: MethodTable, p: int) -> np.ndarray:
    """Residuals of the order conditions up to order ``p``.

    Perturbed tables are checked through their underlying method.  Additive
    tables return the F-side residuals (orders 0..p) followed by the F̂-side
    residuals (orders 1..p); the zeroth-order row is shared.
    """
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValueError(f"order p must be a positive integer, got {p!r}")
    k = method.k
    if method.family is Family.ADDITIVE:
        first = _condition_residuals(method.alpha, method.beta, k, p)
        second = _condition_residuals(method.alpha, method.beta_second, k, p)
        return np.array(first + second[1:])
    if method.family is Family.PERTURBED:
        beta = method.beta - method.beta_second
    else:
        beta = method.beta
    return np.array(_condition_residuals(method.alpha, beta, k, p))


def satisfies_order(method: MethodTable, p: int, tol: float = ORDER_TOL) -> bool:
    return bool(np.max(np.abs(order_residuals(method, p))) <= tol)


def ssp_coefficient_pair(method: MethodTable, y: float = 1.0) -> SspCertificate | None:
    """SSP coefficient of a fixed table at forward-Euler ratio ``y``.

    Returns ``None`` when the coefficient is zero: a negative weight, a
    negative ``alpha_j``, or ``alpha_j = 0`` paired with a positive weight.
    Classical tables ignore ``y`` for the weights (their second array is zero).
    """
    if y < 0 or not math.isfinite(y):
        raise ValueError(f"y must be a finite nonnegative number, got {y!r}")
    k = method.k
    alpha = _flush(method.alpha)
    beta = _flush(method.beta)
    beta2 = _flush(method.beta_second)
    if np.any(beta < 0) or np.any(beta2 < 0) or np.any(alpha < 0):
        return None
    weight = _flush(beta[:k] + y * beta2[:k])
    active = weight > 0
    if np.any(active & (alpha == 0.0)):
        return None
    if not np.any(active):
        return SspCertificate(math.inf, math.inf, float(y), alpha.copy(), unbounded=True)
    ratios = alpha[active] / weight[active]
    r = float(np.min(ratios))
    gamma = alpha - r * beta[:k] - y * r * beta2[:k]
    # r <= alpha_j / weight_j for every j, so negatives are rounding only
    gamma = np.maximum(gamma, 0.0)
    gamma[np.flatnonzero(active)[ratios == r]] = 0.0
    return SspCertificate(r, y * r, float(y), gamma)


def to_underlying(method: MethodTable) -> MethodTable:
    """Collapse a perturbed table onto its classical underlying method."""
    if method.family is not Family.PERTURBED:
        raise ValueError("to_underlying expects a perturbed table")
    return MethodTable(method.k, Family.CLASSICAL, method.alpha.copy(),
                       method.beta - method.beta_second, None, method.explicit)


def canonicalize_downwind(method: MethodTable) -> MethodTable:
    """Remove cancelling upwind/downwind pairs so that beta_j * beta2_j = 0."""
    if method.family is not Family.PERTURBED:
        raise ValueError("canonicalize_downwind expects a perturbed table")
    beta = _flush(method.beta)
    beta2 = _flush(method.beta_second)
    if np.any(beta < 0) or np.any(beta2 < 0):
        raise ValueError("canonicalize_downwind needs nonnegative weights")
    diff = beta - beta2
    return MethodTable(method.k, Family.PERTURBED, method.alpha.copy(),
                       np.maximum(diff, 0.0) + 0.0, np.maximum(-diff, 0.0) + 0.0,
                       method.explicit)


def moment_vector(j: int, p: int) -> MomentVector:
    """``(1, j, j^2, ..., j^p)``."""
    if p < 1:
        raise ValueError("p must be positive")
    return MomentVector(float(j) ** np.arange(p + 1, dtype=float))


def moment_derivative(j: int, p: int) -> np.ndarray:
    """Derivative in j of the moment vector: ``(0, 1, 2j, ..., p j^(p-1))``."""
    i = np.arange(p + 1, dtype=float)
    out = np.zeros(p + 1)
    out[1:] = i[1:] * float(j) ** (i[1:] - 1)
    return out


def moment_vector_perturbed(j: int, p: int, sign: int, x: float, k: int) -> MomentVector:
    """``a_j + sign*x*a'_j`` for j < k and ``sign*x*a'_k`` for j = k."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not 0 <= j <= k:
        raise ValueError(f"index j={j} outside 0..{k}")
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    deriv = sign * x * moment_derivative(j, p)
    if j == k:
        return MomentVector(deriv + 0.0)
    return MomentVector(moment_vector(j, p).entries + deriv)


def forward_euler() -> MethodTable:
    return MethodTable(1, Family.CLASSICAL, [1.0], [1.0, 0.0])


def lmm32() -> MethodTable:
    """Two-step second-order explicit method; SSP coefficient zero."""
    return MethodTable(2, Family.CLASSICAL, [0.5, 0.5], [-0.25, 1.75, 0.0])


def plmm32() -> MethodTable:
    """A perturbed form of :func:`lmm32` with SSP coefficient 2/9 at y = 1."""
    return MethodTable(2, Family.PERTURBED, [0.5, 0.5], [0.25, 2.0, 0.0], [0.5, 0.25, 0.0])


def dlmm32() -> MethodTable:
    """The downwind form of :func:`lmm32` with SSP coefficient 2/7 at y = 1."""
    return MethodTable(2, Family.PERTURBED, [0.5, 0.5], [0.0, 1.75, 0.0], [0.25, 0.0, 0.0])


BUILTIN_METHODS = {
    "lmm32": lmm32,
    "plmm32": plmm32,
    "dlmm32": dlmm32,
    "forward-euler": forward_euler,
}
