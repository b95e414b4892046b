"""Empirical moduli of continuity, Hoelder exponent fits and roughness profiles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bounds import CurveKind, ModulusCurve
from .systems import DomainError, MetricInterval
from .value import _check_gamma, truncation_horizon

__all__ = [
    "GridFunction",
    "empirical_modulus",
    "modulus_power_example",
    "holder_exponent_fit",
    "difference_quotient_profile",
]

# absorbs rounding in xs[j] - xs[i] when d0 is itself a grid distance
_DIST_RTOL = 1e-12


@dataclass(frozen=True)
class GridFunction:
    """Samples ``ys = f(xs)`` of a function on an interval."""

    xs: np.ndarray
    ys: np.ndarray
    space: MetricInterval

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("xs and ys must be 1-D, of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        self.space.check(xs, "grid point")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def sample(cls, f: Callable, xs, space: MetricInterval) -> "GridFunction":
        xs = np.asarray(xs, dtype=float)
        return cls(xs, np.asarray(f(xs), dtype=float), space)


class _RangeExtrema:
    """Sparse tables answering max/min of ``ys[l..r]`` in O(1) per query."""

    def __init__(self, ys: np.ndarray):
        self.hi = [ys]
        self.lo = [ys]
        span = 1
        while 2 * span <= ys.size:
            prev_hi, prev_lo = self.hi[-1], self.lo[-1]
            self.hi.append(np.maximum(prev_hi[:-span], prev_hi[span:]))
            self.lo.append(np.minimum(prev_lo[:-span], prev_lo[span:]))
            span *= 2

    def spread(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """``max - min`` of ``ys`` over each inclusive window ``[left, right]``."""
        length = right - left + 1
        level = np.floor(np.log2(length)).astype(np.int64)
        out = np.empty(left.size)
        for k in np.unique(level):
            sel = level == k
            l, r = left[sel], right[sel] - (1 << int(k)) + 1
            top = np.maximum(self.hi[k][l], self.hi[k][r])
            bottom = np.minimum(self.lo[k][l], self.lo[k][r])
            out[sel] = top - bottom
        return out


def empirical_modulus(f: GridFunction, d0_grid) -> ModulusCurve:
    """``max |ys[i] - ys[j]|`` over grid pairs with ``|xs[i] - xs[j]| <= d0``.

    For each ``i`` the admissible partners form the window
    ``xs[i] <= xs[j] <= xs[i] + d0``; the largest spread over those windows
    is the supremum.  Window ends come from one ``searchsorted`` per ``d0``
    and window extrema from sparse tables, so the cost is
    ``O(n log n + n k)`` for ``k`` thresholds.
    """
    d0 = np.asarray(d0_grid, dtype=float).ravel()
    if d0.size == 0:
        raise ValueError("d0 grid is empty")
    if np.any(d0 <= 0) or np.any(d0 > f.space.diameter * (1 + _DIST_RTOL)) or np.any(np.diff(d0) <= 0):
        raise ValueError("d0 values must be increasing and lie in (0, D]")
    xs, ys = f.xs, f.ys
    table = _RangeExtrema(ys)
    left = np.arange(xs.size)
    out = np.empty(d0.size)
    for k, d in enumerate(d0):
        right = np.searchsorted(xs, xs + d * (1 + _DIST_RTOL), side="right") - 1
        out[k] = float(np.max(table.spread(left, right)))
    # a larger threshold admits a superset of pairs
    out = np.maximum.accumulate(out)
    return ModulusCurve(d0, out, CurveKind.EMPIRICAL)


def modulus_power_example(L: float, gamma: float, d0, eps: float = 1e-12):
    """Exact modulus ``v(1) - v(1 - d0)`` of the value of ``x -> x**L`` with ``r(x) = x``.

    Summed termwise as ``sum_n gamma**n (1 - (1 - d0)**(L**n))`` with the
    same truncation as :func:`value.value_power_closed_series`, which avoids
    subtracting two values close to ``1/(1 - gamma)``.
    """
    _check_gamma(gamma)
    if not L > 1:
        raise ValueError("L must be > 1")
    d0 = np.asarray(d0, dtype=float)
    if np.any(d0 < 0) or np.any(d0 > 1) or np.any(np.isnan(d0)):
        raise DomainError("d0 outside [0, 1]")
    N = truncation_horizon(gamma, eps, 1.0)
    with np.errstate(divide="ignore"):
        log_rest = np.log1p(-d0)  # -inf at d0 = 1
    total = np.zeros(d0.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(N + 1):
            expo = np.power(float(L), n)
            term = -np.expm1(expo * log_rest)
            total += gamma**n * np.where(d0 > 0, term, 0.0)
    return total[()] if total.ndim == 0 else total


def holder_exponent_fit(curve: ModulusCurve, d0_range: tuple[float, float] | None = None):
    """Least-squares fit of ``ln W = ln A + beta ln d0``.

    Returns ``(beta_hat, A_hat, r2)``.  Without ``d0_range`` the fit uses
    the smallest decade of positive curve points, where the exponent
    dominates.
    """
    d0, W = curve.d0, curve.values
    pos = W > 0
    if d0_range is None:
        if not np.any(pos):
            raise ValueError("curve has no positive values")
        lo = float(d0[pos].min())
        d0_range = (lo, 10.0 * lo)
    lo, hi = d0_range
    sel = pos & (d0 >= lo) & (d0 <= hi)
    if np.count_nonzero(sel) < 5:
        raise ValueError(f"need at least 5 positive points in [{lo}, {hi}], got {np.count_nonzero(sel)}")
    lx, ly = np.log(d0[sel]), np.log(W[sel])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(np.exp(intercept)), r2


def difference_quotient_profile(f: Callable, xs, hs) -> np.ndarray:
    """Rows ``(h, max_x |f(x + h) - f(x)| / h)`` for each step ``h``.

    A roughness diagnostic: bounded, settling rows suggest a derivative,
    rows that keep growing as ``h`` shrinks suggest none.  Nothing is
    decided from it.
    """
    xs = np.asarray(xs, dtype=float)
    hs = np.asarray(hs, dtype=float).ravel()
    if np.any(hs <= 0):
        raise ValueError("steps must be > 0")
    base = np.asarray(f(xs), dtype=float)
    rows = np.empty((hs.size, 2))
    for k, h in enumerate(hs):
        q = np.abs(np.asarray(f(xs + h), dtype=float) - base) / h
        rows[k] = h, float(np.max(q))
    return rows
