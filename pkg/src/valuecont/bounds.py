"""Closed-form bounds on the modulus of continuity of a value function.

Notation: ``L`` is the LE-continuity constant of the system, ``gamma`` the
discount factor, ``D`` the diameter of the state space and ``R`` the
concave modulus of the reward.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .systems import DomainError, TimeDomain

__all__ = [
    "CASE_TOL",
    "CaseLabel",
    "CurveKind",
    "LinearModulus",
    "ConcaveModulus",
    "ContinuityParams",
    "ModulusCurve",
    "classify_case",
    "crossing_time",
    "k_delta",
    "k_of",
    "h_of",
    "discrete_modulus_bound",
    "holder_constants",
    "holder_bound",
    "variance_bound",
]

CASE_TOL = 1e-9
# d0 may exceed D by this relative amount (rounding) and is clamped to D.
_D_OVERSHOOT = 1e-9


class CaseLabel(enum.Enum):
    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"


class CurveKind(enum.Enum):
    EMPIRICAL = "empirical_modulus"
    CLOSED_FORM = "closed_form_modulus"
    BOUND = "modulus_bound"
    HOLDER = "holder_bound"


@dataclass(frozen=True)
class LinearModulus:
    """Reward modulus ``R(d) = C d``."""

    C: float

    def __post_init__(self):
        if not self.C >= 0:
            raise ValueError(f"C must be >= 0, got {self.C}")

    def __call__(self, d):
        return self.C * np.asarray(d, dtype=float)


@dataclass(frozen=True)
class ConcaveModulus:
    """User-supplied concave, nondecreasing ``R`` with ``R(0) = 0``.

    ``R`` must accept numpy arrays.  Concavity is only checked by sampling,
    see :meth:`check`.
    """

    R: Callable
    fallback: LinearModulus | None = None

    def __call__(self, d):
        return np.asarray(self.R(np.asarray(d, dtype=float)), dtype=float)

    def check(self, d_max: float, n: int = 1001, atol: float = 1e-12) -> bool:
        d = np.linspace(0.0, d_max, n)
        y = self(d)
        scale = atol * max(1.0, float(np.max(np.abs(y))))
        return (
            abs(float(y[0])) <= scale
            and bool(np.all(np.diff(y) >= -scale))
            and bool(np.all(np.diff(y, 2) <= scale))
        )


def classify_case(L: float, gamma: float, tol: float = CASE_TOL) -> CaseLabel:
    if abs(L * gamma - 1.0) <= tol:
        return CaseLabel.EQUAL
    return CaseLabel.LESS if L * gamma < 1.0 else CaseLabel.GREATER


@dataclass(frozen=True)
class ContinuityParams:
    L: float
    gamma: float
    D: float
    reward_modulus: LinearModulus | ConcaveModulus = LinearModulus(1.0)
    case_tol: float = CASE_TOL

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"D must be finite and > 0, got {self.D}")

    @property
    def beta(self) -> float:
        """``ln(1/gamma) / ln L``; only defined for L > 1."""
        if not self.L > 1:
            raise ValueError("beta is defined only for L > 1")
        return math.log(1.0 / self.gamma) / math.log(self.L)

    @property
    def case(self) -> CaseLabel:
        return classify_case(self.L, self.gamma, self.case_tol)


@dataclass(frozen=True)
class ModulusCurve:
    """Sampled pairs ``(d0, value)`` of a modulus or a bound on one."""

    d0: np.ndarray
    values: np.ndarray
    kind: CurveKind

    def __post_init__(self):
        d0 = np.asarray(self.d0, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if d0.shape != values.shape or d0.ndim != 1:
            raise ValueError("d0 and values must be 1-D arrays of equal length")
        if np.any(d0 <= 0) or np.any(np.diff(d0) <= 0):
            raise ValueError("d0 must be positive and strictly increasing")
        if np.any(values < 0):
            raise ValueError("modulus values must be nonnegative")
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "values", values)

    def is_monotone(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -atol))


def _check_d0(params: ContinuityParams, d0) -> np.ndarray:
    d0 = np.asarray(d0, dtype=float)
    if np.any(np.isnan(d0)) or np.any(d0 < 0):
        raise DomainError("d0 must be >= 0")
    if np.any(d0 > params.D * (1.0 + _D_OVERSHOOT)):
        raise DomainError(f"d0 exceeds the diameter D = {params.D}")
    return np.minimum(d0, params.D)


def crossing_time(L: float, D: float, d0):
    """Time ``delta`` at which ``L**delta * d0`` reaches ``D``."""
    if not L > 1:
        raise ValueError("crossing time needs L > 1")
    d0 = np.asarray(d0, dtype=float)
    if np.any(d0 <= 0) or np.any(d0 > D):
        raise DomainError("need 0 < d0 <= D")
    out = np.log(D / d0) / math.log(L)
    return out[()] if out.ndim == 0 else out


def k_delta(params: ContinuityParams, d0, delta):
    """Bound on the discounted distance when splitting the time axis at ``delta``.

    ``ln(1/gamma) * (int_0^delta (gamma L)^t d0 dt + int_delta^inf gamma^t D dt)``;
    :func:`k_of` is its minimum over ``delta``.
    """
    L, g, D = params.L, params.gamma, params.D
    d0 = np.asarray(d0, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lg = math.log(g * L)
    if lg == 0.0:
        head = d0 * delta
    else:
        head = d0 * np.expm1(lg * delta) / lg
    return math.log(1.0 / g) * (head + D * np.exp(math.log(g) * delta) / math.log(1.0 / g))


def k_of(params: ContinuityParams, d0):
    """Optimal split bound ``K(d0)``, with ``K(0) = 0``.

    Both branches of the closed form are evaluated through the identity

        K(d0) = d0 * (1 + u * expm1(z) / z),  u = ln(D/d0),  z = u ln(gamma L) / ln L,

    which equals the ``L != 1/gamma`` branch for ``z != 0`` and reduces to
    ``(ln(D/d0) + 1) d0`` at ``gamma L = 1``.  There is no cancellation as
    ``gamma L -> 1``.
    """
    L, g = params.L, params.gamma
    if not L > 1:
        raise ValueError(f"K is defined for L > 1 only, got L = {L}")
    d0 = _check_d0(params, d0)
    pos = d0 > 0
    safe = np.where(pos, d0, params.D)
    u = np.log(params.D / safe)
    z = u * (math.log(g * L) / math.log(L))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(z == 0.0, 1.0, np.expm1(z) / z)
    out = np.where(pos, safe * (1.0 + u * ratio), 0.0)
    return out[()] if out.ndim == 0 else out


def h_of(params: ContinuityParams, d0):
    """Continuous-time modulus bound ``R(K(d0)) / ln(1/gamma)``."""
    k = k_of(params, d0)
    out = np.asarray(params.reward_modulus(k), dtype=float) / math.log(1.0 / params.gamma)
    return out[()] if out.ndim == 0 else out


def discrete_modulus_bound(params: ContinuityParams, d0):
    """Discrete-time modulus bound ``ln(1/gamma) / (1 - gamma) * H(d0)``."""
    g = params.gamma
    return math.log(1.0 / g) / (1.0 - g) * h_of(params, d0)


def holder_constants(
    params: ContinuityParams, time_domain: TimeDomain, beta: float | None = None
) -> tuple[float, float]:
    """Constants ``(A, beta)`` with ``|v(x) - v(x')| <= A d(x, x')**beta``.

    Needs a linear reward modulus ``C d``.  In the boundary case
    ``L = 1/gamma`` any exponent in (0, 1) works and must be given; ``A``
    grows without bound as ``beta -> 1``.
    """
    if not isinstance(params.reward_modulus, LinearModulus):
        raise ValueError("Hoelder constants need a linear reward modulus")
    C, L, g, D = params.reward_modulus.C, params.L, params.gamma, params.D
    discrete = time_domain is TimeDomain.DISCRETE
    scale = 1.0 / (1.0 - g) if discrete else 1.0 / math.log(1.0 / g)
    case = params.case

    if case is CaseLabel.LESS:
        if discrete:
            return C / (1.0 - g * L), 1.0
        return C / math.log(1.0 / (g * L)), 1.0

    if case is CaseLabel.EQUAL:
        if beta is None:
            raise ValueError("L = 1/gamma: an exponent beta in (0, 1) is required")
        if not 0 < beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        if beta > 0.99:
            warnings.warn(
                f"beta = {beta} is close to 1; the Hoelder constant blows up like 1/(1 - beta)",
                RuntimeWarning,
                stacklevel=2,
            )
        if math.log(D) + 1.0 < 0.0:
            # the second term turns negative; observed to undercut the bound at D = 0.3 and 0.1
            warnings.warn(
                f"D = {D} < 1/e: the boundary-case constant may not dominate the modulus bound",
                RuntimeWarning,
                stacklevel=2,
            )
        A = C * (1.0 / (math.e * (1.0 - beta)) + D ** (1.0 - beta) * (math.log(D) + 1.0))
        return A * scale, float(beta)

    b = params.beta
    A = C * D ** (1.0 - b) * math.log(L) / math.log(g * L)
    return A * scale, b


def holder_bound(params: ContinuityParams, time_domain: TimeDomain, d0, beta: float | None = None):
    A, b = holder_constants(params, time_domain, beta)
    out = A * np.power(np.asarray(d0, dtype=float), b)
    return out[()] if out.ndim == 0 else out


def variance_bound(A: float, beta: float, component_variances) -> float:
    """Upper bound ``A**2 / 2**(1 - beta) * (sum Var[X_i])**beta`` on ``Var[v(X)]``."""
    var = np.asarray(component_variances, dtype=float).ravel()
    if np.any(var < 0) or np.any(np.isnan(var)):
        raise ValueError("component variances must be >= 0")
    if A < 0:
        raise ValueError("A must be >= 0")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    return float(A**2 / 2.0 ** (1.0 - beta) * float(np.sum(var)) ** beta)
