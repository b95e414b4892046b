"""Discounted value functions in discrete and continuous time."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds
from .bounds import ConcaveModulus, ContinuityParams, LinearModulus
from .systems import (
    ClippedLinear,
    DomainError,
    MetricInterval,
    PowerMap,
    RngLike,
    System,
    TimeDomain,
    _as_generator,
    flow,
)

__all__ = [
    "RewardSpec",
    "ValueEstimate",
    "DEFAULT_SAMPLES",
    "truncation_horizon",
    "value_discrete",
    "value_clipped_linear_closed_form",
    "value_continuous_from_discrete",
    "value_continuous_quadrature",
    "value_power_closed_series",
]

DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class RewardSpec:
    """Reward ``r`` with ``|r| <= sup_abs`` and modulus ``|r(x) - r(x')| <= R(|x - x'|)``.

    ``derivative`` is optional and only needed by the smoothing solver.
    """

    fn: Callable
    sup_abs: float
    modulus: LinearModulus | ConcaveModulus
    derivative: Callable | None = None

    def __post_init__(self):
        if not (self.sup_abs >= 0 and math.isfinite(self.sup_abs)):
            raise ValueError("sup_abs must be finite and >= 0")

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def linear(cls, A: float = 1.0, space: MetricInterval = MetricInterval(0.0, 1.0)) -> "RewardSpec":
        """``r(x) = A x`` on ``space``."""
        A = float(A)
        return cls(
            fn=lambda x: A * x,
            sup_abs=abs(A) * max(abs(space.lo), abs(space.hi)),
            modulus=LinearModulus(abs(A)),
            derivative=lambda x: np.full(np.shape(x), A),
        )

    @classmethod
    def constant(cls, c: float) -> "RewardSpec":
        c = float(c)
        return cls(
            fn=lambda x: np.full(np.shape(x), c),
            sup_abs=abs(c),
            modulus=LinearModulus(0.0),
            derivative=lambda x: np.zeros(np.shape(x)),
        )


@dataclass(frozen=True)
class ValueEstimate:
    """Value(s) with the certified truncation error and the Monte Carlo standard error."""

    value: np.ndarray | float
    truncation_error: float
    statistical_error: np.ndarray | float
    horizon_used: int


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def truncation_horizon(gamma: float, eps: float, sup_abs: float) -> int:
    """Smallest ``N`` from ``N >= ln(eps (1 - gamma) / sup_abs) / ln gamma``.

    Guarantees ``sum_{n > N} gamma**n sup_abs <= eps``.
    """
    _check_gamma(gamma)
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if sup_abs == 0:
        return 0
    arg = eps * (1.0 - gamma) / sup_abs
    if arg >= 1.0:
        return 0
    return max(0, math.ceil(math.log(arg) / math.log(gamma)))


def _scalarize(a):
    a = np.asarray(a)
    return a[()] if a.ndim == 0 else a


def value_discrete(
    system: System,
    reward: RewardSpec,
    gamma: float,
    x,
    eps: float = 1e-10,
    samples: int = DEFAULT_SAMPLES,
    rng: RngLike = None,
) -> ValueEstimate:
    """``sum_n gamma**n E[r(Phi_n(x))]`` truncated at a certified horizon.

    ``x`` may be an array.  For random systems every state is driven by the
    same ``samples`` noise paths (common random numbers), so the estimate is
    a smooth function of ``x`` within one call.
    """
    _check_gamma(gamma)
    if system.time_domain is not TimeDomain.DISCRETE:
        raise ValueError("value_discrete needs a discrete-time system")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = system.space.check(x)
    N = truncation_horizon(gamma, eps, reward.sup_abs)
    trunc = reward.sup_abs * gamma ** (N + 1) / (1.0 - gamma)
    space = system.space

    if not system.stochastic or system.sigma == 0:
        total = np.zeros(x.shape)
        state = x.copy()
        disc = 1.0
        for n in range(N + 1):
            if n:
                state = system.apply(state)
                disc *= gamma
            total += disc * reward(space.clamp(state))
        return ValueEstimate(_scalarize(total), trunc, _scalarize(np.zeros(x.shape)), N)

    gen = _as_generator(rng)
    flat = x.ravel()
    state = np.broadcast_to(flat, (samples, flat.size)).copy()
    returns = np.zeros_like(state)
    disc = 1.0
    for n in range(N + 1):
        if n:
            xi = gen.normal(0.0, system.sigma, size=(samples, 1))
            state = system.apply(state, xi)
            disc *= gamma
        returns += disc * reward(space.clamp(state))
    mean = returns.mean(axis=0).reshape(x.shape)
    if samples > 1:
        sem = (returns.std(axis=0, ddof=1) / math.sqrt(samples)).reshape(x.shape)
    else:
        sem = np.full(x.shape, np.inf)
    return ValueEstimate(_scalarize(mean), trunc, _scalarize(sem), N)


def value_clipped_linear_closed_form(A: float, L: float, gamma: float, D: float, x):
    """Value ``A K(x) / ln(1/gamma)`` of the clipped-linear flow with ``r(x) = A x``."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > D) or np.any(np.isnan(x)):
        raise DomainError(f"x outside [0, {D}]")
    params = ContinuityParams(L, gamma, D)
    return A * bounds.k_of(params, x) / math.log(1.0 / gamma)


def value_continuous_from_discrete(v, gamma: float):
    """Value of the floor-lifted system, ``(1 - gamma) / ln(1/gamma) * v``."""
    _check_gamma(gamma)
    lg = math.log(gamma)
    return (-math.expm1(lg) / -lg) * np.asarray(v, dtype=float)


# Gauss-Legendre rule on [0, 1] for the unit-interval pieces of the lift.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS
_GL16_NODES, _GL16_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL16_NODES = 0.5 * (_GL16_NODES + 1.0)
_GL16_WEIGHTS = 0.5 * _GL16_WEIGHTS


def _clipped_linear_quadrature(system: ClippedLinear, reward: RewardSpec, gamma: float, x: np.ndarray, T: float):
    """Composite Gauss-Legendre on ``[0, delta]`` and ``[delta, T]``, split at the kink of the flow."""
    flat = x.ravel()
    pos = flat > 0
    delta = np.zeros_like(flat)
    delta[pos] = np.minimum(bounds.crossing_time(system.L, system.D, flat[pos]), T)
    total = np.zeros_like(flat)
    for lo, hi, panels in ((np.zeros_like(flat), delta, 16), (delta, np.full_like(flat, T), 128)):
        width = (hi - lo) / panels
        # (states, panels, nodes) grid of times
        starts = lo[:, None] + width[:, None] * np.arange(panels)
        t = starts[..., None] + width[:, None, None] * _GL16_NODES
        state = flow(system, t, np.broadcast_to(flat[:, None, None], t.shape))
        f = gamma**t * reward(state)
        total += width * np.einsum("spn,n->s", f, _GL16_WEIGHTS)
    return total.reshape(x.shape)


def value_continuous_quadrature(system: System, reward: RewardSpec, gamma: float, x, eps: float = 1e-10):
    """``int_0^inf gamma**t r(Phi_t(x)) dt`` by numerical quadrature.

    Deterministic discrete systems are integrated through their floor lift
    (piecewise constant in ``t``, Gauss-Legendre on each unit interval).  The
    clipped-linear flow is integrated with composite Gauss-Legendre split at
    the crossing time, where the integrand has its only kink.  The tail beyond the integration range is bounded by
    ``eps``.  Used as an independent check on the closed forms.
    """
    _check_gamma(gamma)
    lg = math.log(gamma)
    x = system.space.check(x)
    # int_T^inf gamma^t sup|r| dt <= eps
    T = max(1.0, math.log(eps * -lg / max(reward.sup_abs, 1e-300)) / lg)

    if isinstance(system, ClippedLinear):
        return _scalarize(_clipped_linear_quadrature(system, reward, gamma, x, T))

    if system.stochastic or system.time_domain is not TimeDomain.DISCRETE:
        raise ValueError("quadrature supports deterministic discrete systems and the clipped-linear flow")
    n_max = math.ceil(T)
    state = x.copy()
    total = np.zeros(x.shape)
    for n in range(n_max + 1):
        if n:
            state = system.apply(state)
        piece = float(np.dot(_GL_WEIGHTS, gamma ** (n + _GL_NODES)))
        total += piece * reward(system.space.clamp(state))
    return _scalarize(total)


def value_power_closed_series(L: float, gamma: float, x, eps: float = 1e-12):
    """``sum_n gamma**n x**(L**n)`` truncated where ``gamma**(N+1) / (1 - gamma) <= eps``."""
    _check_gamma(gamma)
    if not L > 1:
        raise ValueError("L must be > 1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise DomainError("x outside [0, 1]")
    N = truncation_horizon(gamma, eps, 1.0)
    discounts = gamma ** np.arange(N + 1)
    at_one = x >= 1.0
    interior = (x > 0.0) & ~at_one
    out = np.where(at_one, np.sum(discounts), 0.0)
    if np.any(interior):
        logx = np.log(x[interior])
        acc = np.zeros_like(logx)
        worst = float(np.max(logx))
        for n in range(N + 1):
            with np.errstate(over="ignore"):
                expo = np.power(float(L), n)
            # every remaining term underflows to 0
            if expo * worst < -745.0:
                break
            acc += discounts[n] * np.exp(expo * logx)
        out[interior] = acc
    return _scalarize(out)
