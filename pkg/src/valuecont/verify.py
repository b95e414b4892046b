"""Property suite behind the ``verify`` subcommand.

Each check returns one :class:`CheckResult`; the suite never raises, a check
that errors is reported as failed.  All randomness is drawn from
``RngStream(seed, k)`` with a fixed stream id per check, so reports are
reproducible byte for byte.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds, modulus, smoothing, systems, value
from .bounds import ContinuityParams
from .systems import MetricInterval, RngStream, TimeDomain

__all__ = ["CheckResult", "VerifyConfig", "run_checks", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerifyConfig:
    seed: int = 0
    samples: int = 2000
    variance_samples: int = 1_000_000
    smoothing_grid: int = 14001
    modulus_grid: int = 2000


UNIT = MetricInterval(0.0, 1.0)
IDENTITY = value.RewardSpec.linear(1.0)


def _le(name, observed, threshold, detail=""):
    return CheckResult(name, float(observed), float(threshold), bool(observed <= threshold), detail)


def _gt(name, observed, threshold, detail=""):
    return CheckResult(name, float(observed), float(threshold), bool(observed > threshold), detail)


def _ge(name, observed, threshold, detail=""):
    return CheckResult(name, float(observed), float(threshold), bool(observed >= threshold), detail)


def check_trajectories(cfg: VerifyConfig):
    rng = RngStream(cfg.seed, 1)
    x0 = np.linspace(0.0, 1.0, 201)
    worst = 0.0
    for k, system in enumerate([systems.Logistic(), systems.PowerMap(1.5), systems.NoisyMap(systems.Logistic(), 0.01)]):
        traj = systems.trajectory(system, x0, 50, rng.substream(k))
        sp = system.space
        worst = max(worst, float(np.max(np.maximum(sp.lo - traj, traj - sp.hi))), 0.0)
    yield _le("systems.trajectories_in_space", worst, 0.0)

    L = 1.5
    traj = systems.trajectory(systems.PowerMap(L), x0, 60)
    closed = np.stack([systems.power_iterate(x0, L, n) for n in range(61)])
    yield _le("systems.power_closed_form", np.max(np.abs(traj - closed)), 1e-12)

    noisy = systems.NoisyMap(systems.Logistic(), 0.01)
    a = systems.trajectory(noisy, x0, 30, RngStream(cfg.seed, 2))
    b = systems.trajectory(noisy, x0, 30, RngStream(cfg.seed, 2))
    yield _le("systems.determinism", np.max(np.abs(a - b)), 0.0)


def check_le_ratios(cfg: VerifyConfig):
    gen = RngStream(cfg.seed, 3).generator()
    slack = 1.0 + 3.0 / math.sqrt(cfg.samples)
    cases = [
        ("logistic", systems.Logistic()),
        ("power", systems.PowerMap(1.5)),
        ("clipped_linear", systems.ClippedLinear(2.0, 1.0)),
        ("noisy_logistic", systems.NoisyMap(systems.Logistic(), 0.01)),
    ]
    for k, (name, system) in enumerate(cases):
        sp = system.space
        a = sp.lo + sp.diameter * gen.random(40)
        b = np.clip(a + sp.diameter * 10.0 ** gen.uniform(-6, -1, 40) * gen.choice([-1, 1], 40), sp.lo, sp.hi)
        keep = a != b
        pairs = np.column_stack([a[keep], b[keep]])
        ratio = systems.estimate_le_ratio(system, pairs, samples=cfg.samples, rng=RngStream(cfg.seed, 10 + k))
        yield _le(f"systems.le_ratio.{name}", ratio, slack, f"horizon={systems.DEFAULT_LE_HORIZON}")


def check_values(cfg: VerifyConfig):
    worst = 0.0
    for g in (0.5, 0.9, 0.99):
        v0, v1 = value.value_power_closed_series(1.5, g, np.array([0.0, 1.0]), eps=1e-12)
        worst = max(worst, abs(v0), abs(v1 - 1.0 / (1.0 - g)))
    yield _le("value.power_anchors", worst, 1e-9)

    xs = np.linspace(0.0, 1.0, 1000)
    v = value.value_power_closed_series(1.5, 0.9, xs, eps=1e-12)
    yield _ge("value.power_monotone", np.min(np.diff(v)), 0.0)
    yield _ge("value.power_convex", np.min(np.diff(v, 2)), -1e-9)

    eps = 1e-10
    gap = np.max(np.abs(v - value.value_discrete(systems.PowerMap(1.5), IDENTITY, 0.9, xs, eps).value))
    yield _le("value.series_vs_discrete", gap, 2 * eps)

    excess = -np.inf
    x = np.linspace(0.0, 1.0, 21)
    for k, system in enumerate([systems.Logistic(), systems.PowerMap(2.0), systems.NoisyMap(systems.Logistic(), 0.01)]):
        est = value.value_discrete(system, IDENTITY, 0.8, x, 1e-8, samples=cfg.samples, rng=RngStream(cfg.seed, 20 + k))
        excess = max(excess, float(np.max(np.abs(est.value))) - IDENTITY.sup_abs / 0.2 - 1e-8)
    yield _le("value.sup_bound", excess, 0.0)

    x = np.linspace(0.0, 1.0, 20)
    worst = 0.0
    for system in (systems.PowerMap(1.5), systems.Logistic()):
        disc = value.value_discrete(system, IDENTITY, 0.9, x, 1e-13).value
        quad = value.value_continuous_quadrature(system, IDENTITY, 0.9, x, 1e-13)
        worst = max(worst, float(np.max(np.abs(quad - value.value_continuous_from_discrete(disc, 0.9)))))
    yield _le("value.floor_lift_factor", worst, 1e-8)


def _k_general_branch(L, g, D, d0):
    """The ``L != 1/gamma`` branch of K written out term by term."""
    b = math.log(1.0 / g) / math.log(L)
    lg = math.log(g * L)
    return math.log(L) / lg * D ** (1 - b) * d0**b + math.log(g) / lg * d0


def check_k(cfg: VerifyConfig):
    gen = RngStream(cfg.seed, 4).generator()
    worst = 0.0
    for _ in range(1000):
        p = ContinuityParams(1.0 + 4.0 * gen.random() + 1e-6, 0.01 + 0.98 * gen.random(), 10.0 ** gen.uniform(-1, 1))
        worst = max(worst, abs(float(bounds.k_of(p, p.D)) - p.D))
    yield _le("bounds.K_at_D", worst, 1e-12)

    d0 = np.linspace(0.0, 1.0, 10_001)[1:]
    mono, conc = np.inf, -np.inf
    for L, g in [(1.5, 0.5), (2.0, 0.5), (1.5, 0.9), (4.0, 0.8)]:
        k = bounds.k_of(ContinuityParams(L, g, 1.0), d0)
        mono = min(mono, float(np.min(np.diff(k))))
        conc = max(conc, float(np.max(np.diff(k, 2))))
    yield _ge("bounds.K_nondecreasing", mono, -1e-12)
    yield _le("bounds.K_concave", conc, 1e-12)

    d0 = np.array([1e-4, 1e-2, 0.3, 0.9])
    equal = (np.log(1.0 / d0) + 1.0) * d0
    gap = 0.0
    for s in (-1e-6, 1e-6):
        g = (1.0 + s) / 2.0
        gap = max(gap, float(np.max(np.abs(_k_general_branch(2.0, g, 1.0, d0) - equal) / equal)))
        gap = max(gap, float(np.max(np.abs(bounds.k_of(ContinuityParams(2.0, g, 1.0), d0) - equal) / equal)))
    yield _le("bounds.branch_continuity", gap, 1e-4)


def check_dominance(cfg: VerifyConfig):
    n = cfg.modulus_grid
    xs = np.linspace(0.0, 1.0, n)
    d0 = np.logspace(-4, 0, 100)
    for g in (0.5, 0.9, 0.99):
        v = value.value_power_closed_series(1.5, g, xs, eps=1e-13)
        emp = modulus.empirical_modulus(modulus.GridFunction(xs, v, UNIT), d0).values
        bound = bounds.discrete_modulus_bound(ContinuityParams(1.5, g, 1.0), d0)
        yield _le(f"bounds.dominance.power.gamma={g}", np.max(emp - bound), 0.0)
        j = np.searchsorted(xs, 1.0 - d0 * (1 + 1e-12), side="left")
        endpoint = v[-1] - v[j]
        yield _le(f"modulus.endpoint_difference.gamma={g}", np.max(np.abs(emp - endpoint)), 1e-12 / (1 - g))

    xs = np.linspace(0.0, 1.0, 5000)
    idx = np.unique(np.round(np.logspace(0, math.log10(xs.size - 1), 60)).astype(int))[-50:]
    for L, g in [(1.5, 0.5), (2.0, 0.5), (1.5, 0.9)]:
        p = ContinuityParams(L, g, 1.0)
        v = value.value_clipped_linear_closed_form(1.0, L, g, 1.0, xs)
        emp = modulus.empirical_modulus(modulus.GridFunction(xs, v, UNIT), xs[idx]).values
        h = bounds.h_of(p, xs[idx])
        yield _le(f"bounds.sharpness.{p.case.value}", np.max(np.abs(emp - h) / h), 1e-3)


def check_holder_constants(cfg: VerifyConfig):
    d0 = np.logspace(-6, 0, 200)
    disc, cont = TimeDomain.DISCRETE, TimeDomain.CONTINUOUS
    p = ContinuityParams(1.5, 0.5, 1.0)
    A, b = bounds.holder_constants(p, disc)
    series = sum((0.5 * 1.5) ** n for n in range(200)) * d0
    yield _ge("bounds.holder.less.discrete", np.min(A * d0**b - series * (1 - 1e-12)), 0.0)
    A, b = bounds.holder_constants(p, cont)
    yield _ge("bounds.holder.less.continuous", np.min(A * d0**b - bounds.h_of(p, d0)), 0.0)
    p = ContinuityParams(2.0, 0.5, 1.0)
    for beta in (0.3, 0.5, 0.9):
        for td in (disc, cont):
            A, b = bounds.holder_constants(p, td, beta)
            ref = bounds.discrete_modulus_bound(p, d0) if td is disc else bounds.h_of(p, d0)
            yield _ge(f"bounds.holder.equal.beta={beta}.{td.value}", np.min(A * d0**b - ref), 0.0)
    p = ContinuityParams(1.5, 0.9, 1.0)
    for td in (disc, cont):
        A, b = bounds.holder_constants(p, td)
        ref = bounds.discrete_modulus_bound(p, d0) if td is disc else bounds.h_of(p, d0)
        yield _ge(f"bounds.holder.greater.{td.value}", np.min(A * d0**b - ref), 0.0)


def check_variance(cfg: VerifyConfig):
    p = ContinuityParams(1.5, 0.9, 1.0)
    A, beta = bounds.holder_constants(p, TimeDomain.DISCRETE)
    X = RngStream(cfg.seed, 5).generator().random(cfg.variance_samples)
    vals = value.value_power_closed_series(1.5, 0.9, X, eps=1e-10)
    var = float(np.var(vals, ddof=1))
    centered = (vals - vals.mean()) ** 2
    se = float(np.std(centered, ddof=1) / math.sqrt(vals.size))
    bound = bounds.variance_bound(A, beta, [1.0 / 12.0])
    yield _le("bounds.variance", var, bound * (1 + 3 * se), f"margin={bound - var:.6g}")


def check_fit(cfg: VerifyConfig):
    d0 = np.logspace(-6, -3, 60)
    W = modulus.modulus_power_example(1.5, 0.9, d0)
    beta_hat, _, _ = modulus.holder_exponent_fit(bounds.ModulusCurve(d0, W, bounds.CurveKind.CLOSED_FORM), (1e-6, 1e-3))
    beta = math.log(10 / 9) / math.log(1.5)
    yield _le("modulus.holder_fit", abs(beta_hat - beta) / beta, 0.1, f"beta_hat={beta_hat:.6f}")

    d0 = np.logspace(-3, 0, 50)
    closed = modulus.modulus_power_example(1.5, 0.9, d0, eps=1e-13)
    prev = np.zeros_like(d0)
    worst_drop, worst_excess = -np.inf, -np.inf
    # nested grids: each one contains every pair of the previous one
    for n in (501, 1001, 2001):
        xs = np.linspace(0.0, 1.0, n)
        emp = modulus.empirical_modulus(
            modulus.GridFunction(xs, value.value_power_closed_series(1.5, 0.9, xs, eps=1e-13), UNIT), d0
        ).values
        worst_drop = max(worst_drop, float(np.max(prev - emp)))
        worst_excess = max(worst_excess, float(np.max(emp - closed)))
        prev = emp
    yield _le("modulus.refinement_nondecreasing", worst_drop, 1e-12)
    yield _le("modulus.refinement_below_closed_form", worst_excess, 1e-11)


def check_smoothing(cfg: VerifyConfig):
    lg = systems.Logistic()
    xs = np.linspace(-0.2, 1.2, cfg.smoothing_grid)
    pts = np.linspace(0.01, 0.99, 50)
    for sigma in (0.01, 0.05):
        w = smoothing.solve_smoothed_value(lg, IDENTITY, 0.8, sigma, xs, quad_nodes=64, tol=1e-8)
        sup_r = float(np.max(np.abs(IDENTITY(xs))))
        yield _le(f"smoothing.residual.sigma={sigma}", w.residual, 1e-8)
        yield _le(f"smoothing.bounded.sigma={sigma}", np.max(np.abs(w.ws)) - sup_r / 0.2, 1e-8)
        inc = np.asarray(w.increments)
        yield _le(f"smoothing.contraction.sigma={sigma}", np.max(inc[1:] / inc[:-1]), 0.8 + 1e-6)
        grad = smoothing.gradient_smoothed(w, lg, IDENTITY, pts, quad_nodes=64)
        # two grid cells at the default grid; see finite_difference
        fd = smoothing.finite_difference(w, pts, 2.0 * w.spacing)
        yield _le(f"smoothing.gradient_identity.sigma={sigma}", np.max(np.abs(grad - fd) / (1 + np.abs(fd))), 1e-2)


def check_roughness(cfg: VerifyConfig):
    lg = systems.Logistic()
    hs = [1e-2, 1e-3, 1e-4, 1e-5]
    xs = np.linspace(0.0, 0.99, 2001)
    v = lambda x: value.value_discrete(lg, IDENTITY, 0.8, x, 1e-12).value
    rough = modulus.difference_quotient_profile(v, xs, hs)[:, 1]
    yield _gt("roughness.logistic_growth", np.min(np.diff(rough)), 0.0, "strict")
    w = smoothing.solve_smoothed_value(lg, IDENTITY, 0.8, 0.01, np.linspace(-0.2, 1.2, cfg.smoothing_grid))
    smooth = modulus.difference_quotient_profile(w, xs, hs)[:, 1]
    yield _le("roughness.smoothed_stable", abs(smooth[-1] / smooth[-2] - 1.0), 0.05)


CHECKS: list[Callable] = [
    check_trajectories,
    check_le_ratios,
    check_values,
    check_k,
    check_dominance,
    check_holder_constants,
    check_variance,
    check_fit,
    check_smoothing,
    check_roughness,
]


def run_checks(cfg: VerifyConfig = VerifyConfig()) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                results.extend(check(cfg))
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            results.append(CheckResult(check.__name__, float("nan"), float("nan"), False, f"error: {exc}"))
    return results
