"""Bounded one-dimensional (random) dynamical systems.

Every system lives on a closed interval with the Euclidean metric.  Discrete
systems expose ``apply`` (one noiseless transition) and are advanced with
:func:`step` / :func:`trajectory`; the single continuous-time system has a
closed-form flow.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np

__all__ = [
    "DomainError",
    "TimeDomain",
    "MetricInterval",
    "RngStream",
    "Logistic",
    "PowerMap",
    "ClippedLinear",
    "NoisyMap",
    "System",
    "step",
    "trajectory",
    "flow",
    "lift_to_continuous",
    "estimate_le_ratio",
    "power_iterate",
    "system_from_config",
    "DEFAULT_LE_HORIZON",
]

DEFAULT_LE_HORIZON = 20


class DomainError(ValueError):
    """A state or time lies outside the domain of an operation."""


class TimeDomain(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class MetricInterval:
    """Closed interval ``[lo, hi]`` with ``d(x, x') = |x - x'|``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def distance(self, x, y):
        return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lo) & (x <= self.hi)))

    def clamp(self, x):
        return np.clip(x, self.lo, self.hi)

    def check(self, x, what: str = "state") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(f"{what} outside [{self.lo}, {self.hi}]")
        return x


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``.

    Distinct stream ids map to independent children of one
    :class:`numpy.random.SeedSequence`.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


RngLike = Union[RngStream, np.random.Generator, None]


def _as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise ValueError("a stochastic system needs an RngStream or numpy Generator")


def power_iterate(x, L: float, n: int | float):
    """``x ** (L ** n)`` evaluated as ``exp(L**n * ln x)``.

    0 and 1 are fixed points and short-circuited; for 0 < x < 1 the result
    underflows cleanly to 0 once the exponent is large.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        expo = np.power(float(L), n)
        out = np.exp(expo * np.log(x))
    out = np.where(x <= 0.0, 0.0, out)
    out = np.where(x >= 1.0, 1.0, out)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Logistic:
    """The logistic map ``x -> 4 x (1 - x)`` on [0, 1]."""

    space: MetricInterval = field(default=MetricInterval(0.0, 1.0))
    time_domain = TimeDomain.DISCRETE
    stochastic = False

    @property
    def nominal_L(self) -> float:
        return 4.0

    def apply(self, x):
        return 4.0 * x * (1.0 - x)


@dataclass(frozen=True)
class PowerMap:
    """``x -> x ** L`` on [0, 1]; stable fixed point 0, unstable fixed point 1."""

    L: float
    space: MetricInterval = field(default=MetricInterval(0.0, 1.0))
    time_domain = TimeDomain.DISCRETE
    stochastic = False

    def __post_init__(self):
        if not self.L > 1:
            raise ValueError(f"PowerMap needs L > 1, got {self.L}")

    @property
    def nominal_L(self) -> float:
        return self.L

    def apply(self, x):
        return power_iterate(x, self.L, 1)


@dataclass(frozen=True)
class ClippedLinear:
    """Continuous-time flow ``(t, x) -> min(D, L**t x)`` on [0, D]."""

    L: float
    D: float = 1.0
    time_domain = TimeDomain.CONTINUOUS
    stochastic = False

    def __post_init__(self):
        if not self.L > 1:
            raise ValueError(f"ClippedLinear needs L > 1, got {self.L}")
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"ClippedLinear needs finite D > 0, got {self.D}")

    @property
    def space(self) -> MetricInterval:
        return MetricInterval(0.0, self.D)

    @property
    def nominal_L(self) -> float:
        return self.L


@dataclass(frozen=True)
class NoisyMap:
    """Discrete step ``x -> base(clamp(x + xi))`` with ``xi ~ N(0, sigma^2)``."""

    base: Union[Logistic, PowerMap]
    sigma: float

    time_domain = TimeDomain.DISCRETE
    stochastic = True

    def __post_init__(self):
        if self.base.time_domain is not TimeDomain.DISCRETE or self.base.stochastic:
            raise ValueError("NoisyMap needs a deterministic discrete base map")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def space(self) -> MetricInterval:
        return self.base.space

    @property
    def nominal_L(self) -> float:
        return self.base.nominal_L

    def apply(self, x, noise=0.0):
        return self.space.clamp(self.base.apply(self.space.clamp(x + noise)))


System = Union[Logistic, PowerMap, ClippedLinear, NoisyMap]


def _require_discrete(system: System) -> None:
    if system.time_domain is not TimeDomain.DISCRETE:
        raise ValueError(f"{type(system).__name__} is a continuous-time system")


def _advance(system: System, x: np.ndarray, gen: np.random.Generator | None, noise_shape):
    if system.stochastic:
        if system.sigma == 0:
            return system.apply(x)
        xi = gen.normal(0.0, system.sigma, size=noise_shape)
        return system.apply(x, xi)
    return system.apply(x)


def step(system: System, x, rng: RngLike = None):
    """One discrete-time transition.  Deterministic systems ignore ``rng``.

    For array input one noise value is shared by every entry (coupled noise).
    """
    _require_discrete(system)
    x = system.space.check(x)
    gen = _as_generator(rng) if system.stochastic else None
    out = _advance(system, x, gen, None)
    return out[()] if np.ndim(out) == 0 else out


def trajectory(system: System, x0, n: int, rng: RngLike = None) -> np.ndarray:
    """States ``x0, Phi_1(x0), ..., Phi_n(x0)`` stacked along axis 0."""
    _require_discrete(system)
    if n < 0:
        raise ValueError("n must be >= 0")
    x = system.space.check(x0)
    gen = _as_generator(rng) if system.stochastic else None
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    for k in range(1, n + 1):
        x = _advance(system, x, gen, None)
        out[k] = x
    return out


def flow(system: ClippedLinear, t, x):
    """``min(D, L**t x)``."""
    if not isinstance(system, ClippedLinear):
        raise ValueError("flow is defined for the clipped-linear system only")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("flow time must be >= 0")
    x = system.space.check(x)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.minimum(system.D, np.power(system.L, t) * x)
    # L**t may overflow to inf; inf * 0 is nan, and 0 is a fixed point.
    out = np.where(x == 0.0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def lift_to_continuous(system: System, t: float) -> Callable:
    """Transformer ``x -> Phi_floor(t)(x)`` of the floor-lifted system."""
    _require_discrete(system)
    if t < 0:
        raise DomainError("t must be >= 0")
    n = int(math.floor(t))

    def transform(x, rng: RngLike = None):
        return trajectory(system, x, n, rng)[-1]

    return transform


def estimate_le_ratio(
    system: System,
    pairs: Iterable,
    horizon: int = DEFAULT_LE_HORIZON,
    samples: int = 1000,
    L: float | None = None,
    rng: RngLike = None,
) -> float:
    """Largest observed ``E[d(Phi_t x, Phi_t x')] / (L**t d(x, x'))``.

    The maximum runs over all pairs and ``1 <= t <= horizon`` (integer times
    for discrete systems, a quarter-step grid for continuous ones).  Random
    systems use the same noise path for both points of a pair.  A value at
    most ``1`` plus Monte Carlo slack is empirical evidence of LE-continuity
    with constant ``L`` over the truncated horizon.
    """
    pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=float)
    if pairs.size == 0:
        raise ValueError("pair list is empty")
    pairs = pairs.reshape(-1, 2)
    if horizon < 1 or samples < 1:
        raise ValueError("horizon and samples must be >= 1")
    L = system.nominal_L if L is None else float(L)
    if not L > 0:
        raise ValueError("L must be > 0")
    a = system.space.check(pairs[:, 0], "pair point")
    b = system.space.check(pairs[:, 1], "pair point")
    d = np.abs(a - b)
    if np.any(d == 0):
        raise ValueError("pair points must be distinct")

    if system.time_domain is TimeDomain.CONTINUOUS:
        times = np.linspace(0.0, horizon, 4 * horizon + 1)[1:]
        worst = 0.0
        for t in times:
            gap = np.abs(flow(system, t, a) - flow(system, t, b))
            worst = max(worst, float(np.max(gap / (L**t * d))))
        return worst

    m = len(d)
    if system.stochastic:
        gen = _as_generator(rng)
        xa = np.broadcast_to(a, (samples, m)).copy()
        xb = np.broadcast_to(b, (samples, m)).copy()
        noise_shape = (samples, 1)
    else:
        gen, xa, xb, noise_shape = None, a.copy(), b.copy(), None
    worst = 0.0
    for t in range(1, horizon + 1):
        if system.stochastic and system.sigma > 0:
            xi = gen.normal(0.0, system.sigma, size=noise_shape)
            xa, xb = system.apply(xa, xi), system.apply(xb, xi)
        else:
            xa, xb = system.apply(xa), system.apply(xb)
        gap = np.abs(xa - xb)
        mean_gap = gap.mean(axis=0) if system.stochastic else gap
        worst = max(worst, float(np.max(mean_gap / (L**t * d))))
    return worst


def system_from_config(name: str, L: float | None = None, D: float = 1.0, sigma: float | None = None) -> System:
    """Build a system from the config keys ``system``, ``L``, ``D``, ``sigma``."""
    if name == "logistic":
        return Logistic()
    if name == "power":
        if L is None:
            raise ValueError("system 'power' needs L")
        return PowerMap(L)
    if name == "clipped_linear":
        if L is None:
            raise ValueError("system 'clipped_linear' needs L")
        return ClippedLinear(L, D)
    if name == "noisy_logistic":
        if sigma is None:
            raise ValueError("system 'noisy_logistic' needs sigma")
        return NoisyMap(Logistic(), sigma)
    raise ValueError(f"unknown system {name!r}")
