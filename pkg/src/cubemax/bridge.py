"""Brownian bridge and discrete Brownian motion experiments.

Two exact constructions of the bridge on a finite grid are provided: the
subtraction ``B_t - t B_1`` and the time change ``(1-t) B_{t/(1-t)}``. Both
have covariance ``t(1-u)`` for ``t <= u``. Suprema of ``beta_t/sqrt(t(1-t))``
are taken over grid points and therefore underestimate the continuous
supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import special, stats

from . import rng as rngmod
from .empirical import ProportionEstimate, proportion
from .errors import ConfigError, ParameterError

DEFAULT_RESOLUTION = 2048


@dataclass(frozen=True)
class BridgePath:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid.shape != self.values.shape:
            raise ParameterError("grid and values differ in shape")


def check_grid(grid, *, closed: bool = True) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise ParameterError("grid must be a 1-D array with at least two times")
    if np.any(np.diff(g) <= 0):
        raise ParameterError("grid must be strictly increasing")
    if g[0] < 0 or g[-1] > 1:
        raise ParameterError("grid must lie in [0, 1]")
    if closed and (g[0] != 0.0 or g[-1] != 1.0):
        raise ParameterError("grid must contain 0 and 1")
    return g


def make_grid(eps: float, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Grid on [0, 1] covering [eps, 1-eps].

    Geometric spacing from eps up to 1/4 (and mirrored towards 1) with a
    uniform middle section through 1/2; about ``resolution`` points in total.
    """
    if not 0.0 < eps < 0.5:
        raise ParameterError("eps must lie in (0, 1/2)")
    if resolution < 8:
        raise ParameterError("resolution must be >= 8")
    if eps >= 0.25:
        mid = np.linspace(eps, 1.0 - eps, resolution | 1)
        pts = [mid]
    else:
        k = resolution // 4
        geo = np.geomspace(eps, 0.25, k)
        mid = np.linspace(0.25, 0.75, (resolution - 2 * k) | 1)
        pts = [geo, mid, 1.0 - geo]
    pts.append(np.array([0.0, 0.5, 1.0, eps, 1.0 - eps]))
    return np.unique(np.concatenate(pts))


def _motion(generator: np.random.Generator, times: np.ndarray, size: int) -> np.ndarray:
    """Standard Brownian motion at increasing ``times`` (B_0 = 0)."""
    dt = np.diff(np.concatenate([[0.0], times]))
    steps = generator.standard_normal((size, times.size)) * np.sqrt(dt)
    return np.cumsum(steps, axis=1)


def sample_bridges(grid, generator: np.random.Generator, size: int) -> np.ndarray:
    """``size`` bridge paths on ``grid`` via ``B_t - t B_1``; one row per path."""
    g = check_grid(grid)
    b = _motion(generator, g[1:], size)
    out = np.zeros((size, g.size))
    out[:, 1:] = b - g[1:] * b[:, -1:]
    out[:, -1] = 0.0
    return out


def sample_bridge(grid, generator: np.random.Generator) -> BridgePath:
    g = check_grid(grid)
    return BridgePath(g, sample_bridges(g, generator, 1)[0])


def time_inversion_bridge(motion_values, grid) -> np.ndarray:
    """Map motion values sampled at ``t/(1-t)`` to ``(1-t) B_{t/(1-t)}``.

    ``motion_values`` has one column per grid time below 1 (a trailing
    ``t == 1`` column is allowed and ignored); the result is 0 at ``t == 1``.
    """
    g = check_grid(grid, closed=False)
    v = np.atleast_2d(np.asarray(motion_values, dtype=float))
    inner = g < 1.0
    out = np.zeros((v.shape[0], g.size))
    out[:, inner] = (1.0 - g[inner]) * v[:, : int(inner.sum())]
    return out


def sample_time_inversion_bridges(grid, generator: np.random.Generator, size: int) -> np.ndarray:
    g = check_grid(grid)
    inner = g[(g > 0) & (g < 1)]
    b = np.zeros((size, g.size - 1))
    b[:, 1:] = _motion(generator, inner / (1.0 - inner), size)
    return time_inversion_bridge(b, g)


def _window(grid: np.ndarray, eps: float) -> np.ndarray:
    if not 0.0 < eps < 0.5:
        raise ParameterError("eps must lie in (0, 1/2)")
    mask = (grid >= eps) & (grid <= 1.0 - eps)
    if grid[0] > eps or grid[-1] < 1.0 - eps or not np.any(mask):
        raise ParameterError("grid does not cover the window [eps, 1-eps]")
    return mask


def sup_normalized_bridge_values(values, grid, eps: float) -> np.ndarray:
    """Row-wise max over grid points in [eps, 1-eps] of ``value/sqrt(t(1-t))``."""
    g = np.asarray(grid, dtype=float)
    mask = _window(g, eps)
    t = g[mask]
    v = np.atleast_2d(values)[:, mask]
    return np.max(v / np.sqrt(t * (1.0 - t)), axis=1)


def sup_normalized_bridge(path: BridgePath, eps: float) -> float:
    return float(sup_normalized_bridge_values(path.values[None, :], path.grid, eps)[0])


def _sup_block(generator, size, *, grid, eps, construction):
    sampler = sample_bridges if construction == "subtraction" else sample_time_inversion_bridges
    return sup_normalized_bridge_values(sampler(grid, generator, size), grid, eps)


def sample_sup_bridge(
    eps: float,
    trials: int,
    seed: int,
    resolution: int = DEFAULT_RESOLUTION,
    construction: str = "subtraction",
    workers: int = 1,
    stream: int | None = None,
) -> np.ndarray:
    """Draws of the grid supremum of ``beta_t/sqrt(t(1-t))`` over [eps, 1-eps]."""
    if construction not in ("subtraction", "inversion"):
        raise ParameterError(f"unknown construction {construction!r}")
    if stream is None:
        stream = rngmod.BRIDGE if construction == "subtraction" else rngmod.INVERSION
    grid = make_grid(eps, resolution)
    fn = partial(_sup_block, grid=grid, eps=eps, construction=construction)
    return np.concatenate(rngmod.run_blocks(fn, trials, seed, stream, workers, block_size=256))


def _points_block(generator, size, *, grid, construction):
    if construction == "subtraction":
        return sample_bridges(grid, generator, size)
    return sample_time_inversion_bridges(grid, generator, size)


def sample_bridge_points(
    ts, trials: int, seed: int, construction: str = "subtraction", workers: int = 1, stream: int | None = None
) -> np.ndarray:
    """Bridge values at the interior times ``ts``; rows are paths."""
    ts = np.asarray(ts, dtype=float)
    grid = np.unique(np.concatenate([[0.0, 1.0], ts]))
    if stream is None:
        stream = rngmod.BRIDGE if construction == "subtraction" else rngmod.INVERSION
    fn = partial(_points_block, grid=grid, construction=construction)
    values = np.concatenate(rngmod.run_blocks(fn, trials, seed, stream, workers, block_size=8192))
    return values[:, np.searchsorted(grid, ts)]


def bridge_covariance(t: float, u: float) -> float:
    t, u = min(t, u), max(t, u)
    return t * (1.0 - u)


@dataclass(frozen=True)
class CovarianceCheck:
    times: tuple
    sample: np.ndarray
    expected: np.ndarray
    stderr: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.abs(self.sample - self.expected) / self.stderr

    def passed(self, tol: float = 4.0) -> bool:
        return bool(np.all(self.z <= tol))


def covariance_check(values: np.ndarray, times, expected_fn) -> CovarianceCheck:
    """Sample covariance matrix of the columns of ``values`` against a model.

    The standard error of entry (i, j) is the standard deviation of the
    centered products divided by sqrt(samples).
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    c = v - v.mean(axis=0)
    k = v.shape[1]
    sample = np.empty((k, k))
    se = np.empty((k, k))
    expected = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            prod = c[:, i] * c[:, j]
            sample[i, j] = prod.sum() / (m - 1)
            se[i, j] = prod.std(ddof=1) / math.sqrt(m)
            expected[i, j] = expected_fn(times[i], times[j])
    return CovarianceCheck(tuple(times), sample, expected, se)


# -- discrete Brownian motion -------------------------------------------------


def _motion_sup_block(generator, size, *, N, K):
    b = np.cumsum(generator.standard_normal((size, N)), axis=1)
    stat = np.max(b / np.sqrt(np.arange(1, N + 1)), axis=1)
    return int(np.count_nonzero(stat > K))


def discrete_motion_sup(N: int, K: float, trials: int, seed: int, workers: int = 1) -> ProportionEstimate:
    """Estimate of P(max_{k<=N} B_k/sqrt(k) > K) for a Gaussian random walk."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    fn = partial(_motion_sup_block, N=int(N), K=float(K))
    hits = sum(rngmod.run_blocks(fn, trials, seed, rngmod.MOTION, workers, block_size=max(1, 1 << 20 // N)))
    return proportion(hits, trials)


def _walk_block(generator, size, *, ks):
    b = np.cumsum(generator.standard_normal((size, max(ks))), axis=1)
    return np.stack([b[:, k - 1] / math.sqrt(k) for k in ks], axis=1)


def sample_normalized_walk(ks, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Values of B_k/sqrt(k) at the indices ``ks``."""
    fn = partial(_walk_block, ks=tuple(int(k) for k in ks))
    return np.concatenate(rngmod.run_blocks(fn, trials, seed, rngmod.MOTION, workers, block_size=8192))


# -- iterated logarithm -----------------------------------------------------


def gaussian_tail_lower(x):
    """``(1/x - 1/x^3) e^{-x^2/2} / sqrt(2 pi)``, a lower bound for P(G > x)."""
    x = np.asarray(x, dtype=float)
    return (1.0 / x - 1.0 / x**3) * np.exp(-(x**2) / 2.0) / math.sqrt(2.0 * math.pi)


def gaussian_tail(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def tail_ratio(x, rho: float):
    """``gaussian_tail_lower(x) / exp(-x^2/rho)``, computed in log space."""
    x = np.asarray(x, dtype=float)
    return np.exp(
        np.log(1.0 / x - 1.0 / x**3) - 0.5 * math.log(2.0 * math.pi) + x**2 * (1.0 / rho - 0.5)
    )


def tail_ratio_stationary_points(rho: float) -> list[float]:
    """Stationary points of ``tail_ratio`` in x >= 2.

    With c = 1/rho - 1/2 and y = x^2 the log-derivative vanishes where
    2c y^2 - (2c+1) y + 3 = 0.
    """
    c = 1.0 / rho - 0.5
    roots = np.roots([2.0 * c, -(2.0 * c + 1.0), 3.0])
    return sorted(math.sqrt(y.real) for y in roots if abs(y.imag) < 1e-12 and y.real >= 4.0)


def tail_constant(rho: float) -> float:
    """``inf_{x >= 2} tail_ratio(x, rho)`` for rho < 2.

    The ratio tends to infinity, so the infimum is at x = 2 or at a local
    minimum; it is increasing from 2 only when rho <= 24/13.
    """
    if not 0.0 < rho < 2.0:
        raise ConfigError("rho must lie in (0, 2)")
    cands = [2.0] + tail_ratio_stationary_points(rho)
    return float(min(tail_ratio(x, rho) for x in cands))


def rho_for(eta: float, alpha: float) -> float:
    return (2.0 - eta) * (1.0 + math.sqrt(alpha)) ** 2 / (alpha - 1.0)


def alpha_for(eta: float, rho: float) -> float:
    """Inverse of :func:`rho_for` in alpha, for 2 - eta < rho."""
    base = 2.0 - eta
    if not rho > base:
        raise ConfigError("rho must exceed 2 - eta")
    return ((rho + base) / (rho - base)) ** 2


@dataclass(frozen=True)
class LilConfig:
    """Parameters of the iterated-logarithm estimate with ``eps = 1/A``.

    ``alpha`` defaults to the value putting rho halfway between 2 - eta and 2.
    """

    eta: float
    A: float
    alpha: float | None = None
    rho: float = field(init=False)
    N: int = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.eta < 2.0:
            raise ConfigError("eta must lie in (0, 2)")
        if not self.A >= math.e:
            raise ConfigError("A must be >= e")
        alpha = self.alpha
        if alpha is None:
            alpha = alpha_for(self.eta, 2.0 - self.eta / 2.0)
            object.__setattr__(self, "alpha", alpha)
        if not alpha > 1.0:
            raise ConfigError("alpha must be > 1")
        rho = rho_for(self.eta, alpha)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "N", int(math.floor(math.log(self.A - 1.0) / math.log(alpha))) - 1)

    @property
    def eps(self) -> float:
        return 1.0 / self.A

    @property
    def threshold(self) -> float:
        return math.sqrt((2.0 - self.eta) * math.log(math.log(self.A)))

    @property
    def event_threshold(self) -> float:
        """Normalized increment level sqrt(rho log log A) of each event."""
        return math.sqrt(self.rho * math.log(math.log(self.A)))


@dataclass(frozen=True)
class LilFloor:
    value: float
    exact_tail_value: float
    tail_constant: float
    events: int
    tail_bound_valid: bool

    @property
    def vacuous(self) -> bool:
        return self.events < 1


def lil_analytic_floor(cfg: LilConfig) -> LilFloor:
    """Lower bound ``(1/2)(1 - exp(-C(rho) N / log A))`` for the LIL probability.

    ``exact_tail_value`` runs the same chain with the exact probability of
    each increment event, ``(1/2)(1 - (1 - P(G > x))^N)``. Both are 0 when no
    event fits in [1, A-1]. ``tail_bound_valid`` records whether the event
    level is >= 2, where the polynomial tail bound is stated.
    """
    if not cfg.rho < 2.0:
        raise ConfigError("rho must be < 2; choose a larger alpha")
    c = tail_constant(cfg.rho)
    n_ev = max(cfg.N, 0)
    log_a = math.log(cfg.A)
    value = 0.5 * (1.0 - math.exp(-c * n_ev / log_a))
    p = float(gaussian_tail(cfg.event_threshold))
    exact = 0.5 * (1.0 - (1.0 - p) ** n_ev)
    return LilFloor(value, exact, c, cfg.N, cfg.event_threshold >= 2.0)


def _lil_block(generator, size, *, grid, eps, threshold):
    sup = sup_normalized_bridge_values(sample_bridges(grid, generator, size), grid, eps)
    return int(np.count_nonzero(sup >= threshold))


def lil_probability(
    cfg: LilConfig, trials: int, seed: int, resolution: int = DEFAULT_RESOLUTION, workers: int = 1
) -> ProportionEstimate:
    """Estimate of P(sup_{eps<=t<=1-eps} beta_t/sqrt(t(1-t)) >= sqrt((2-eta) log log A))."""
    grid = make_grid(cfg.eps, resolution)
    fn = partial(_lil_block, grid=grid, eps=cfg.eps, threshold=cfg.threshold)
    hits = sum(rngmod.run_blocks(fn, trials, seed, rngmod.BRIDGE, workers, block_size=256))
    return proportion(hits, trials)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and p-value."""
    res = stats.ks_2samp(a, b)
    return float(res.statistic), float(res.pvalue)
