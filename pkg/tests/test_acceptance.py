"""Acceptance gate: one test per criterion, each at its stated tolerance and time budget.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
lists one PASS/FAIL line per criterion with its runtime.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from valuecont import bounds, cli, modulus, smoothing, systems, value
from valuecont.bounds import ContinuityParams, CurveKind, ModulusCurve
from valuecont.modulus import GridFunction
from valuecont.systems import ClippedLinear, Logistic, MetricInterval, PowerMap, RngStream, TimeDomain

R = value.RewardSpec.linear(1.0)
UNIT = MetricInterval(0.0, 1.0)
GAMMAS = (0.5, 0.9, 0.99)


class Gate:
    def __init__(self, number: int, budget: float):
        self.number, self.budget = number, budget

    def __enter__(self):
        self.t0 = time.perf_counter()
        self.checks: list[tuple[bool, str]] = []
        return self

    def check(self, ok, detail: str):
        self.checks.append((bool(ok), detail))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc_type is not None:
            self.checks.append((False, f"error: {exc}"))
        self.checks.append((elapsed < self.budget, f"runtime {elapsed:.2f}s < {self.budget:g}s"))
        ok = all(c for c, _ in self.checks)
        line = f"{'PASS' if ok else 'FAIL'} criterion {self.number}: " + "; ".join(d for _, d in self.checks)
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None:
            failed = [d for c, d in self.checks if not c]
            assert not failed, failed
        return False


def test_criterion_01_exact_anchors():
    with Gate(1, 1.0) as g:
        for gamma in GAMMAS:
            est = value.value_discrete(PowerMap(1.5), R, gamma, np.array([0.0, 1.0]), eps=1e-12)
            v0, v1 = est.value
            g.check(v0 == 0.0, f"gamma={gamma} v(0)={float(v0)!r}")
            g.check(abs(v1 - 1 / (1 - gamma)) <= 1e-9, f"|v(1)-1/(1-gamma)|={abs(v1 - 1 / (1 - gamma)):.1e}")


def test_criterion_02_k_at_diameter():
    with Gate(2, 1.0) as g:
        rng = RngStream(2024, 2).generator()
        L = 1.0 + 9.0 * rng.random(1000) + 1e-9
        gam = rng.uniform(1e-3, 1 - 1e-3, 1000)
        D = 10.0 ** rng.uniform(-2, 2, 1000)
        worst = max(abs(float(bounds.k_of(ContinuityParams(a, b, c), c)) - c) for a, b, c in zip(L, gam, D))
        zero = max(float(bounds.k_of(ContinuityParams(a, b, c), 0.0)) for a, b, c in zip(L[:50], gam[:50], D[:50]))
        g.check(worst <= 1e-12, f"max |K(D)-D|={worst:.1e} over 1000 draws")
        g.check(zero == 0.0, "K(0)=0 exactly")


@pytest.mark.parametrize("L,gamma", [(1.5, 0.5), (2.0, 0.5), (1.5, 0.9)])
def test_criterion_03_sharpness(L, gamma):
    with Gate(3, 30.0 / 3) as g:
        p = ContinuityParams(L, gamma, 1.0)
        sys_ = ClippedLinear(L, 1.0)
        xs = np.linspace(0.0, 1.0, 5000)
        # closed form against quadrature of the flow, with a non-unit reward slope
        probe = np.linspace(0.0, 1.0, 11)
        A = 2.5
        quad = value.value_continuous_quadrature(sys_, value.RewardSpec.linear(A), gamma, probe, eps=1e-12)
        closed = value.value_clipped_linear_closed_form(A, L, gamma, 1.0, probe)
        g.check(np.max(np.abs(quad - closed)) <= 1e-9, f"case={p.case.value} closed vs quadrature {np.max(np.abs(quad - closed)):.1e}")
        # modulus of the quadrature values, so H is compared with an independent route
        v = value.value_continuous_quadrature(sys_, R, gamma, xs, eps=1e-13)
        idx = np.unique(np.round(np.logspace(0, math.log10(xs.size - 1), 60)).astype(int))[-50:]
        d0 = xs[idx]
        emp = modulus.empirical_modulus(GridFunction(xs, v, UNIT), d0).values
        rel = float(np.max(np.abs(emp - bounds.h_of(p, d0)) / bounds.h_of(p, d0)))
        g.check(d0.size == 50 and rel <= 1e-3, f"max rel |W-H|/H={rel:.1e} at {d0.size} d0")


def test_criterion_04_bound_dominance():
    with Gate(4, 60.0) as g:
        xs = np.linspace(0.0, 1.0, 2000)
        h = xs[1] - xs[0]
        d0 = np.logspace(-4, 0, 100)
        for gamma in GAMMAS:
            v = value.value_power_closed_series(1.5, gamma, xs, eps=1e-13)
            emp = modulus.empirical_modulus(GridFunction(xs, v, UNIT), d0).values
            bound = bounds.discrete_modulus_bound(ContinuityParams(1.5, gamma, 1.0), d0)
            g.check(np.all(emp <= bound), f"gamma={gamma} max W/bound={np.max(emp / bound):.6f}")
            # closed-form modulus v(1) - v(1 - d0) brackets the grid estimate within one spacing
            hi = modulus.modulus_power_example(1.5, gamma, d0, eps=1e-13)
            lo = modulus.modulus_power_example(1.5, gamma, np.maximum(d0 - h, 0.0), eps=1e-13)
            tol = 1e-12 / (1 - gamma)
            g.check(np.all((emp <= hi + tol) & (emp >= lo - tol)), "endpoint-difference cross-check within grid tolerance")


def test_criterion_05_holder_exponent():
    with Gate(5, 10.0) as g:
        d0 = np.logspace(-6, -3, 60)
        curve = ModulusCurve(d0, modulus.modulus_power_example(1.5, 0.9, d0), CurveKind.CLOSED_FORM)
        beta_hat, _, r2 = modulus.holder_exponent_fit(curve, (1e-6, 1e-3))
        beta = math.log(10 / 9) / math.log(1.5)
        g.check(abs(beta_hat - beta) <= 0.1 * beta, f"beta_hat={beta_hat:.5f} vs {beta:.5f}, r2={r2:.6f}")


def test_criterion_06_holder_dominance():
    with Gate(6, 10.0) as g:
        d0 = np.logspace(-8, 0, 400)
        xs = np.linspace(0.0, 1.0, 2000)
        grid_d0 = np.logspace(-3, 0, 60)

        def empirical(L, gamma):
            v = value.value_power_closed_series(L, gamma, xs, eps=1e-13)
            return modulus.empirical_modulus(GridFunction(xs, v, UNIT), grid_d0).values

        # Less: geometric series sum (gamma L)**n C d0 and the continuous-time curve
        p = ContinuityParams(1.5, 0.5, 1.0)
        A, b = bounds.holder_constants(p, TimeDomain.DISCRETE)
        series = math.fsum(0.75**n for n in range(400)) * d0
        g.check(np.all(A * d0**b >= series * (1 - 1e-14)), f"less discrete A={A:g} vs geometric series")
        g.check(np.all(A * grid_d0**b >= empirical(1.5, 0.5)), "less discrete vs empirical modulus")
        A, b = bounds.holder_constants(p, TimeDomain.CONTINUOUS)
        g.check(np.all(A * d0**b >= bounds.h_of(p, d0)), f"less continuous A={A:.4g} vs H")

        cases = [("equal", 2.0, 0.5, beta) for beta in (0.3, 0.5, 0.9)] + [("greater", 1.5, 0.9, None)]
        for name, L, gamma, beta in cases:
            p = ContinuityParams(L, gamma, 1.0)
            for td in TimeDomain:
                A, b = bounds.holder_constants(p, td, beta)
                ref = bounds.discrete_modulus_bound(p, d0) if td is TimeDomain.DISCRETE else bounds.h_of(p, d0)
                g.check(np.all(A * d0**b >= ref), f"{name} beta={b:.3g} {td.value} min gap={np.min(A * d0**b - ref):.2e}")
            A, b = bounds.holder_constants(p, TimeDomain.DISCRETE, beta)
            g.check(np.all(A * grid_d0**b >= empirical(L, gamma)), f"{name} vs empirical modulus")


def test_criterion_07_variance_bound():
    with Gate(7, 30.0) as g:
        A, beta = bounds.holder_constants(ContinuityParams(1.5, 0.9, 1.0), TimeDomain.DISCRETE)
        X = RngStream(7, 0).generator().random(1_000_000)
        vals = value.value_power_closed_series(1.5, 0.9, X, eps=1e-10)
        var = float(np.var(vals, ddof=1))
        se = float(np.std((vals - vals.mean()) ** 2, ddof=1) / math.sqrt(vals.size))
        bound = bounds.variance_bound(A, beta, [1.0 / 12.0])
        g.check(var <= bound * (1 + 3 * se), f"Var={var:.5f} SE={se:.1e} bound={bound:.5f} margin={bound - var:.5f}")


def solve_figure1_grid():
    xs = np.linspace(*smoothing.DEFAULT_WINDOW, 14001)
    return smoothing.solve_smoothed_value(Logistic(), R, 0.8, 0.01, xs, quad_nodes=64, tol=1e-8)


def test_criterion_08_smoothing_gradient(identity_reward):
    with Gate(8, 60.0) as g:
        w = solve_figure1_grid()
        x = np.linspace(0.01, 0.99, 50)
        grad = smoothing.gradient_smoothed(w, Logistic(), identity_reward, x, quad_nodes=64)
        fd = smoothing.finite_difference(w, x, 2.0 * w.spacing)
        rel = float(np.max(np.abs(grad - fd) / np.abs(fd)))
        g.check(rel <= 1e-2, f"max rel gradient error={rel:.2e} at 50 points")
        g.check(w.residual <= 1e-8, f"residual={w.residual:.1e}")
        sup_w, cap = float(np.max(np.abs(w.ws))), float(np.max(np.abs(identity_reward(w.xs)))) / 0.2
        g.check(sup_w <= cap + 1e-8, f"sup|w|={sup_w:.4f} <= {cap:g}")


def test_criterion_09_roughness_contrast():
    with Gate(9, 60.0) as g:
        smoothed = solve_figure1_grid()
        hs = [1e-2, 1e-3, 1e-4, 1e-5]
        xs = np.linspace(0.0, 0.99, 2001)
        rough = modulus.difference_quotient_profile(
            lambda s: value.value_discrete(Logistic(), R, 0.8, s, eps=1e-12).value, xs, hs
        )[:, 1]
        smooth = modulus.difference_quotient_profile(smoothed, xs, hs)[:, 1]
        g.check(np.all(np.diff(rough) > 0), "undisturbed " + " < ".join(f"{q:.4g}" for q in rough))
        change = abs(smooth[-1] / smooth[-2] - 1)
        g.check(change <= 0.05, f"smoothed last change {change:.1e} ({smooth[-2]:.4f} -> {smooth[-1]:.4f})")


def test_criterion_10_floor_lift_factor():
    with Gate(10, 10.0) as g:
        x = np.linspace(0.0, 1.0, 20)
        for gamma in GAMMAS:
            disc = value.value_discrete(PowerMap(1.5), R, gamma, x, eps=1e-13).value
            quad = value.value_continuous_quadrature(PowerMap(1.5), R, gamma, x, eps=1e-13)
            err = float(np.max(np.abs(quad - value.value_continuous_from_discrete(disc, gamma))))
            g.check(err <= 1e-8, f"gamma={gamma} max err={err:.1e}")


def test_criterion_11_verify_determinism(tmp_path):
    with Gate(11, 120.0) as g:
        codes = [cli.main(["verify", "--seed", "11", "--out", str(tmp_path / s)]) for s in ("a", "b")]
        a, b = ((tmp_path / s / "verify.csv").read_bytes() for s in ("a", "b"))
        g.check(a == b, f"reports byte-identical ({len(a)} bytes)")
        g.check(codes == [0, 0], f"exit codes {codes}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
