"""Value function of a system disturbed by Gaussian noise in every step.

The disturbed value ``w`` solves ``w(x) = r(x) + gamma E[w(Phi(clamp(x + xi)))]``
with ``xi ~ N(0, sigma^2)``.  It is computed on a uniform grid by fixed-point
iteration with linear interpolation of ``w`` between nodes.  Its derivative
is available in closed form as ``r'(x) + gamma / sigma^2 E[w(Phi(clamp(x + xi))) xi]``
and is evaluated with Gauss-Hermite quadrature.

Two quadratures are offered for the expectation inside the solver:

``"convolution"`` (default)
    ``u = w o Phi o clamp`` is sampled on the grid (extended by ``8 sigma``
    on both sides), and its piecewise-linear interpolant is integrated
    against the Gaussian exactly.  The result is a Gaussian convolution, so
    the grid solution inherits the smoothness of ``w`` and its finite
    differences are accurate.
``"gauss-hermite"``
    ``quad_nodes``-point Gauss-Hermite rule on ``w(Phi(clamp(x + sigma z)))``.
    Values are accurate, but with ``sigma`` small the nodes sample ``w`` at
    a spacing comparable to ``sigma``, and the x-derivative of the grid
    solution picks up quadrature noise of several percent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import signal, sparse
from scipy.special import ndtr

from .systems import DomainError, Logistic, PowerMap
from .value import RewardSpec

__all__ = [
    "SolverError",
    "SmoothedValueGrid",
    "gauss_hermite",
    "solve_smoothed_value",
    "gradient_smoothed",
    "finite_difference",
    "hat_kernel",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (-0.2, 1.2)


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


# numpy's Gauss-Hermite rule overflows to nan somewhere between 300 and 400 nodes
MAX_QUAD_NODES = 300


def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``E[f(Z)]``, ``Z ~ N(0, 1)``; weights sum to 1."""
    if not 1 <= n <= MAX_QUAD_NODES:
        raise ValueError(f"node count must lie in [1, {MAX_QUAD_NODES}], got {n}")
    z, w = hermegauss(n)
    return z, w / w.sum()


@dataclass(frozen=True)
class SmoothedValueGrid:
    xs: np.ndarray
    ws: np.ndarray
    sigma: float
    gamma: float
    iterations: int
    residual: float
    increments: tuple = ()

    @property
    def window(self) -> tuple[float, float]:
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def spacing(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def __call__(self, x):
        """Linear interpolation, constant beyond the window."""
        out = np.interp(np.asarray(x, dtype=float), self.xs, self.ws)
        return out[()] if np.ndim(out) == 0 else out


def _uniform_grid(grid) -> np.ndarray:
    xs = np.asarray(grid, dtype=float)
    if xs.ndim != 1 or xs.size < 3:
        raise ValueError("grid must be a 1-D array with at least 3 nodes")
    h = np.diff(xs)
    if np.any(h <= 0) or not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise ValueError("grid must be uniform and increasing")
    return xs


def _disturbed_images(base_map, x, sigma: float, z: np.ndarray) -> np.ndarray:
    """``Phi(clamp(x + sigma z))`` for every state (rows) and node (columns)."""
    pts = np.asarray(x, dtype=float)[..., None] + sigma * z
    return base_map.apply(base_map.space.clamp(pts))


def _interp_matrix(xs: np.ndarray, y: np.ndarray, weights: np.ndarray) -> sparse.csr_matrix:
    """Sparse ``P`` with ``(P w)_i = sum_j weights_j * interp(y_ij, xs, w)``."""
    n = xs.size
    h = xs[1] - xs[0]
    yc = np.clip(y, xs[0], xs[-1])
    pos = (yc - xs[0]) / h
    left = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
    frac = np.clip(pos - left, 0.0, 1.0)
    rows = np.broadcast_to(np.arange(y.shape[0])[:, None], y.shape)
    wj = np.broadcast_to(weights, y.shape)
    data = np.concatenate([(wj * (1.0 - frac)).ravel(), (wj * frac).ravel()])
    cols = np.concatenate([left.ravel(), (left + 1).ravel()])
    rr = np.concatenate([rows.ravel(), rows.ravel()])
    return sparse.csr_matrix((data, (rr, cols)), shape=(y.shape[0], n))


def _positive_part_mean(a: np.ndarray, s: float) -> np.ndarray:
    """``E[(T - a)_+]`` for ``T ~ N(0, s^2)``."""
    q = a / s
    return s * np.exp(-0.5 * q * q) / math.sqrt(2.0 * math.pi) - a * ndtr(-q)


def hat_kernel(spacing: float, sigma: float, reach: float = 8.0) -> np.ndarray:
    """Weights ``c_j = E[hat(xi / spacing - j)]`` for ``|j| <= m``, summing to 1.

    ``hat`` is the unit tent, so ``sum_j c_j u_{i+j}`` is the exact Gaussian
    expectation of the piecewise-linear interpolant of ``u`` at node ``i``.
    """
    s = sigma / spacing
    m = int(math.ceil(reach * s)) + 1
    j = np.arange(m + 1, dtype=float)
    # tent = (t + 1)_+ - 2 t_+ + (t - 1)_+ ; evaluated for j >= 0 to avoid cancellation
    half = _positive_part_mean(j - 1.0, s) - 2.0 * _positive_part_mean(j, s) + _positive_part_mean(j + 1.0, s)
    half = np.maximum(half, 0.0)
    c = np.concatenate([half[:0:-1], half])
    return c / c.sum()


class _ConvolutionOperator:
    """``w -> E[interp(u)(x_i + xi)]`` with ``u = w o Phi o clamp`` on the extended grid."""

    def __init__(self, base_map, xs: np.ndarray, sigma: float):
        h = xs[1] - xs[0]
        self.kernel = hat_kernel(h, sigma)
        m = (self.kernel.size - 1) // 2
        ys = xs[0] + h * np.arange(-m, xs.size + m)
        images = base_map.apply(base_map.space.clamp(ys))
        self.sample = _interp_matrix(xs, images[:, None], np.ones(1))

    def __matmul__(self, w: np.ndarray) -> np.ndarray:
        return signal.fftconvolve(self.sample @ w, self.kernel, mode="valid")


def solve_smoothed_value(
    base_map: Logistic | PowerMap,
    reward: RewardSpec,
    gamma: float,
    sigma: float,
    grid,
    quad_nodes: int = 64,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    method: str = "convolution",
) -> SmoothedValueGrid:
    """Fixed-point solve of the disturbed value function on ``grid``.

    ``base_map`` is projected onto its own state space before every
    application, so the grid may extend beyond that space.  Iteration stops
    once successive iterates differ by at most ``tol (1 - gamma) / gamma`` in
    sup norm, which bounds the distance to the discrete fixed point by
    ``tol``.  The reported residual is recomputed on the returned iterate.
    ``quad_nodes`` only matters for ``method="gauss-hermite"``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if not 8 <= quad_nodes <= MAX_QUAD_NODES:
        raise ValueError(f"quad_nodes must lie in [8, {MAX_QUAD_NODES}]")
    xs = _uniform_grid(grid)
    if method == "convolution":
        P = _ConvolutionOperator(base_map, xs, sigma)
    elif method == "gauss-hermite":
        z, wq = gauss_hermite(quad_nodes)
        P = _interp_matrix(xs, _disturbed_images(base_map, xs, sigma, z), wq)
    else:
        raise ValueError(f"unknown method {method!r}")
    r = reward(xs)

    stop = tol * (1.0 - gamma) / gamma
    w = r.copy()
    increments = []
    for it in range(1, max_iter + 1):
        w_next = r + gamma * (P @ w)
        diff = float(np.max(np.abs(w_next - w)))
        increments.append(diff)
        w = w_next
        if diff <= stop:
            residual = float(np.max(np.abs(w - (r + gamma * (P @ w)))))
            return SmoothedValueGrid(xs, w, float(sigma), float(gamma), it, residual, tuple(increments))
    raise SolverError(f"no convergence within {max_iter} iterations", increments[-1])


def gradient_smoothed(
    w: SmoothedValueGrid,
    base_map: Logistic | PowerMap,
    reward: RewardSpec,
    x,
    quad_nodes: int = 64,
):
    """Derivative of the disturbed value at interior states via the noise identity."""
    if reward.derivative is None:
        raise ValueError("reward has no derivative")
    x = np.asarray(x, dtype=float)
    lo, hi = w.window
    if np.any(x <= lo) or np.any(x >= hi):
        raise DomainError(f"x must lie strictly inside the window ({lo}, {hi})")
    z, wq = gauss_hermite(quad_nodes)
    vals = w(_disturbed_images(base_map, x, w.sigma, z))
    # E[w(.) xi] / sigma^2 with xi = sigma z
    out = np.asarray(reward.derivative(x), dtype=float) + w.gamma / w.sigma * (vals @ (wq * z))
    return out[()] if out.ndim == 0 else out


def finite_difference(w: SmoothedValueGrid, x, h: float):
    """Centered difference ``(w(x + h) - w(x - h)) / 2h`` of the interpolated grid.

    Take ``h`` of at least one grid spacing: a smaller step only sees the
    slope of a single interpolation cell, which is off by ``O(spacing w'')``.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = w.window
    if not h > 0:
        raise ValueError("h must be > 0")
    if np.any(x - h < lo) or np.any(x + h > hi):
        raise DomainError("x +- h leaves the evaluation window")
    out = (w(x + h) - w(x - h)) / (2.0 * h)
    return out[()] if np.ndim(out) == 0 else out
