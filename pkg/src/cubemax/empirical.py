"""Uniform points, the empirical process of their folded coordinates, and the
sets of points with many t-centered coordinates.

A point x of [0,1]^n is folded to X_i = 2|x_i - 1/2|, which is again uniform
on [0,1]; x_i is t-centered exactly when X_i <= t. The empirical process is

    alpha_t = (#{i : X_i <= t} - n t) / sqrt(n),

right-continuous with jumps at the order statistics of X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import stats

from . import rng as rngmod
from .errors import ParameterError
from .lattice import as_point


@dataclass(frozen=True)
class EmpiricalPath:
    n: int
    sorted_values: np.ndarray

    def alpha(self, t: float) -> float:
        k = np.searchsorted(self.sorted_values, t, side="right")
        return (k - self.n * t) / math.sqrt(self.n)

    def alpha_left(self, t: float) -> float:
        """Left limit of alpha at ``t``."""
        k = np.searchsorted(self.sorted_values, t, side="left")
        return (k - self.n * t) / math.sqrt(self.n)


@dataclass(frozen=True)
class ESetQuery:
    t: float
    K: float

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise ParameterError("t must lie in (0, 1)")
        if not self.K >= 0.0:
            raise ParameterError("K must be >= 0")

    def threshold(self, n: int) -> float:
        return n * self.t + self.K * math.sqrt(n * self.t * (1.0 - self.t))


@dataclass(frozen=True)
class ProportionEstimate:
    """A Monte Carlo proportion with its exact 95% interval."""

    hits: int
    trials: int
    low: float
    high: float

    @property
    def estimate(self) -> float:
        return self.hits / self.trials

    def overlaps(self, other: "ProportionEstimate") -> bool:
        return self.low <= other.high and other.low <= self.high


def clopper_pearson(hits: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if not 0 <= hits <= trials:
        raise ParameterError("hits must lie in [0, trials]")
    a = (1.0 - level) / 2.0
    low = 0.0 if hits == 0 else float(stats.beta.ppf(a, hits, trials - hits + 1))
    high = 1.0 if hits == trials else float(stats.beta.ppf(1 - a, hits + 1, trials - hits))
    return low, high


def proportion(hits: int, trials: int) -> ProportionEstimate:
    low, high = clopper_pearson(hits, trials)
    return ProportionEstimate(int(hits), int(trials), low, high)


def sample_uniform_points(generator: np.random.Generator, size: int, n: int) -> np.ndarray:
    """``size`` points of [0,1]^n as rows."""
    return generator.random((size, n))


def sample_uniform_point(n: int, seed: int, index: int = 0, stream: int = rngmod.POINTS) -> np.ndarray:
    """The ``index``-th point of a stream, addressable without drawing the others."""
    if n < 1:
        raise ParameterError("dimension must be >= 1")
    block, offset = divmod(index, rngmod.point_block_size(n))
    g = rngmod.block_generator(seed, stream, block)
    # rows are drawn in order, so skip the earlier rows of this block
    if offset:
        g.random((offset, n))
    return g.random(n)


def fold(points: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(np.asarray(points, dtype=float) - 0.5)


def alpha_path(x) -> EmpiricalPath:
    x = as_point(x)
    return EmpiricalPath(x.size, np.sort(fold(x)))


def _check_eps(eps: float):
    if not 0.0 < eps < 0.5:
        raise ParameterError("eps must lie in (0, 1/2)")


def _normalized(k, n, t):
    return (k - n * t) / (math.sqrt(n) * np.sqrt(t * (1.0 - t)))


def sup_normalized_alpha_sorted(sorted_values: np.ndarray, eps: float) -> np.ndarray:
    """Exact ``sup_{eps <= t <= 1-eps} alpha_t / sqrt(t(1-t))`` for each row.

    On the segment [X_(k), X_(k+1)) the process equals (k - n t)/sqrt(n). Per
    segment, clipped to the window, the candidates are the left end, the
    right end when the window closes inside the segment, and the stationary
    point t = k / (2k - n) of (k - n t)/sqrt(t(1-t)) when it falls inside.
    """
    _check_eps(eps)
    xs = np.atleast_2d(np.asarray(sorted_values, dtype=float))
    m, n = xs.shape
    lo_edge = np.concatenate([np.zeros((m, 1)), xs], axis=1)
    hi_edge = np.concatenate([xs, np.ones((m, 1))], axis=1)
    k = np.arange(n + 1, dtype=float)[None, :]
    a = np.maximum(lo_edge, eps)
    b = np.minimum(hi_edge, 1.0 - eps)
    live = a <= b
    # left end of each live segment
    best = np.where(live, _normalized(k, n, np.clip(a, eps, 1 - eps)), -np.inf)
    # window closes inside the segment (t = 1-eps belongs to it)
    closes = live & (hi_edge > 1.0 - eps)
    best = np.maximum(best, np.where(closes, _normalized(k, n, np.full_like(a, 1.0 - eps)), -np.inf))
    with np.errstate(divide="ignore", invalid="ignore"):
        tc = k / (2.0 * k - n)
    inside = live & np.isfinite(tc) & (tc > a) & (tc < b)
    if np.any(inside):
        tcc = np.where(inside, tc, 0.5)
        best = np.maximum(best, np.where(inside, _normalized(k, n, tcc), -np.inf))
    return best.max(axis=1)


def sup_normalized_alpha(path: EmpiricalPath, eps: float) -> float:
    return float(sup_normalized_alpha_sorted(path.sorted_values[None, :], eps)[0])


def e_set_member(x, q: ESetQuery) -> bool:
    """Whether x has at least ``n t + K sqrt(n t (1-t))`` t-centered coordinates."""
    x = as_point(x)
    lo, hi = (1.0 - q.t) / 2.0, (1.0 + q.t) / 2.0
    count = int(np.count_nonzero((x >= lo) & (x <= hi)))
    return count >= q.threshold(x.size)


def _sup_block(generator, size, *, n, eps, K):
    pts = sample_uniform_points(generator, size, n)
    sup = sup_normalized_alpha_sorted(np.sort(fold(pts), axis=1), eps)
    return int(np.count_nonzero(sup >= K))


def _grid_block(generator, size, *, n, K, t_grid):
    pts = sample_uniform_points(generator, size, n)
    folded = fold(pts)
    hit = np.zeros(size, dtype=bool)
    for t in t_grid:
        counts = np.count_nonzero(folded <= t, axis=1)
        hit |= counts >= ESetQuery(float(t), K).threshold(n)
    return int(np.count_nonzero(hit))


def estimate_union_volume(
    n: int, K: float, eps: float, trials: int, seed: int, workers: int = 1, stream: int = rngmod.POINTS
) -> ProportionEstimate:
    """Monte Carlo estimate of P(sup_{eps<=t<=1-eps} alpha_t/sqrt(t(1-t)) >= K).

    This probability is the volume of the union over t in the window of the
    sets of points with at least n t + K sqrt(n t (1-t)) t-centered
    coordinates.
    """
    _check_eps(eps)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    fn = partial(_sup_block, n=n, eps=eps, K=K)
    hits = sum(rngmod.run_blocks(fn, trials, seed, stream, workers, rngmod.point_block_size(n)))
    return proportion(hits, trials)


def estimate_union_volume_grid(
    n: int, K: float, t_grid, trials: int, seed: int, workers: int = 1, stream: int = rngmod.POINTS
) -> ProportionEstimate:
    """Same volume counted directly by set membership on a finite t grid.

    Uses the same draws as :func:`estimate_union_volume` for equal seeds; the
    grid can only miss members, so it is a lower estimate.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    t_grid = np.asarray(t_grid, dtype=float)
    fn = partial(_grid_block, n=n, K=K, t_grid=t_grid)
    hits = sum(rngmod.run_blocks(fn, trials, seed, stream, workers, rngmod.point_block_size(n)))
    return proportion(hits, trials)


def _alpha_block(generator, size, *, n, ts):
    folded = fold(sample_uniform_points(generator, size, n))
    return np.stack([(np.count_nonzero(folded <= t, axis=1) - n * t) / math.sqrt(n) for t in ts], axis=1)


def sample_alpha(n: int, ts, trials: int, seed: int, workers: int = 1, stream: int = rngmod.POINTS) -> np.ndarray:
    """Values of alpha at fixed times ``ts`` for ``trials`` independent points."""
    fn = partial(_alpha_block, n=n, ts=tuple(float(t) for t in ts))
    return np.concatenate(rngmod.run_blocks(fn, trials, seed, stream, workers, rngmod.point_block_size(n)), axis=0)


def _sup_values_block(generator, size, *, n, eps):
    pts = sample_uniform_points(generator, size, n)
    return sup_normalized_alpha_sorted(np.sort(fold(pts), axis=1), eps)


def sample_sup_alpha(
    n: int, eps: float, trials: int, seed: int, workers: int = 1, stream: int = rngmod.EMPIRICAL
) -> np.ndarray:
    """Draws of the exact normalized supremum over [eps, 1-eps]."""
    _check_eps(eps)
    fn = partial(_sup_values_block, n=n, eps=eps)
    return np.concatenate(rngmod.run_blocks(fn, trials, seed, stream, workers, rngmod.point_block_size(n)))
