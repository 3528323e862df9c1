"""Centered cubic maximal function of the lattice counting measure.

The measure puts a unit mass on every point of Z^n. For a point ``x`` the
maximal function is ``sup_r count(Q(x, r)) / (2r)^n`` where ``Q(x, r)`` is the
closed cube of half-side ``r``. All values are natural logarithms; a point
with a coordinate on Z has an infinite maximal function and is reported as
``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ParameterError

DEFAULT_LEVEL = 2.0

# Upper bound on the number of (radius shell, breakpoint) pairs held in memory.
_CHUNK_ELEMENTS = 1 << 20


def as_point(x) -> np.ndarray:
    """Validate a point of [0, 1]^n and return it as a float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ParameterError("a point must be a non-empty 1-D vector")
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ParameterError("coordinates must lie in [0, 1]")
    return arr


def _as_real_vector(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ParameterError("a point must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("coordinates must be finite")
    return arr


def radius_cap(n: int, level: float) -> float:
    """Radius beyond which the density ratio cannot exceed ``level``.

    A cube of half-side r holds at most (2r+1)^n lattice points, so for
    r > n / (2 log L) the ratio is at most (1 + log L / n)^n <= L.
    """
    if not level > 1.0:
        raise ParameterError("level must be > 1")
    if n < 1:
        raise ParameterError("dimension must be >= 1")
    return n / (2.0 * math.log(level))


@dataclass(frozen=True)
class RadiusCapPolicy:
    """How far the radius search extends.

    ``mode="explicit"`` uses ``value`` as the cap itself. ``mode="threshold"``
    treats ``value`` as the smallest level L of interest and caps at
    ``radius_cap(n, L)``; values above log L are then exact.
    """

    mode: str = "threshold"
    value: float = DEFAULT_LEVEL

    def __post_init__(self):
        if self.mode == "explicit":
            if not self.value > 0:
                raise ParameterError("explicit radius cap must be positive")
        elif self.mode == "threshold":
            if not self.value > 1:
                raise ParameterError("threshold level must be > 1")
        else:
            raise ParameterError(f"unknown cap mode {self.mode!r}")

    def r_max(self, n: int) -> float:
        if self.mode == "explicit":
            return float(self.value)
        return radius_cap(n, self.value)


def _policy(cap) -> RadiusCapPolicy:
    if cap is None:
        return RadiusCapPolicy()
    if isinstance(cap, RadiusCapPolicy):
        return cap
    return RadiusCapPolicy("explicit", float(cap))


def count_lattice_points(x, r: float) -> float:
    """Log of the number of lattice points in the closed cube Q(x, r)."""
    if not r > 0:
        raise ParameterError("radius must be positive")
    x = _as_real_vector(x)
    counts = np.floor(x + r) - np.ceil(x - r) + 1.0
    if np.any(counts <= 0):
        return -math.inf
    return float(np.sum(np.log(counts)))


def t_centered_count(x, t: float) -> int:
    """Number of coordinates in the closed interval [(1-t)/2, (1+t)/2]."""
    if not 0.0 < t <= 1.0:
        raise ParameterError("t must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    lo, hi = (1.0 - t) / 2.0, (1.0 + t) / 2.0
    return int(np.count_nonzero((x >= lo) & (x <= hi)))


def structured_lower_bound(x, t: float, s_range: Iterable[int]) -> float:
    """Lower bound for the log maximal function from t-centered coordinates.

    At radius s - (1-t)/2 each t-centered coordinate sees 2s lattice points
    and every other coordinate at least 2s-1, which gives
    ``m log(2s) + (n-m) log(2s-1) - n log(2s-1+t)``; the best integer s in
    ``s_range`` is returned.
    """
    if not 0.0 < t < 1.0:
        raise ParameterError("t must lie in (0, 1)")
    s = np.asarray(list(s_range), dtype=float)
    if s.size == 0 or np.any(s < 1) or np.any(s != np.floor(s)):
        raise ParameterError("s_range must be a non-empty set of integers >= 1")
    x = np.asarray(x, dtype=float)
    n = x.size
    m = t_centered_count(x, t)
    return float(np.max(_structured_values(m, n, t, s)))


def _structured_values(m: float, n: float, t: float, s: np.ndarray) -> np.ndarray:
    # (n - m) * log(1) is 0 even when n == m; avoid 0 * -inf style surprises
    rest = np.where(n - m > 0, (n - m) * np.log(2 * s - 1), 0.0)
    return m * np.log(2 * s) + rest - n * np.log(2 * s - 1 + t)


def maximize(x, cap=None) -> tuple[float, float]:
    """Return ``(log M(x), radius)`` over radii in ``(0, r_max]``.

    Write r = j + u with integer j >= 0 and u in [0, 1). Coordinate i gains a
    lattice point when u passes ``d_i = dist(x_i, Z)`` and again at
    ``e_i = 1 - d_i``, so its count is ``2j + [u >= d_i] + [u >= e_i]``. The
    supremum is attained at a breakpoint ``j + d_i`` or ``j + e_i`` since the
    count is a right-continuous step function and the volume increases. The
    2n residues are sorted once; each shell j is then a vector expression.

    Shells are pruned with log(1+z) <= z: with S(u) = sum_i a_i(u) - 2nu the
    value at (j, u) is at most S(u) / (2j + 2u), so shells where that bound
    cannot beat the current best are skipped. Ties go to the smallest radius.
    """
    x = _as_real_vector(x)
    n = x.size
    r_max = _policy(cap).r_max(n)

    frac = x - np.floor(x)
    d = np.minimum(frac, 1.0 - frac)
    if np.any(d == 0.0):
        return math.inf, 0.0
    e = 1.0 - d
    ds = np.sort(d)
    es = np.sort(e)
    u = np.unique(np.concatenate([ds, es]))
    cd = np.searchsorted(ds, u, side="right").astype(float)
    ce = np.searchsorted(es, u, side="right").astype(float)

    best, best_r = -math.inf, 0.0

    # j = 0: every coordinate must already hold a lattice point
    full = (cd == n) & (u <= r_max)
    if np.any(full):
        vals = ce[full] * math.log(2.0) - n * np.log(2.0 * u[full])
        k = int(np.argmax(vals))
        best, best_r = float(vals[k]), float(u[full][k])

    j_top = int(math.floor(r_max - u[0])) if r_max > u[0] else 0
    if j_top < 1:
        return best, best_r

    slack = cd + ce - 2.0 * n * u
    j = 1
    j_stop = 1
    while j <= j_stop:
        rows = max(1, min(_CHUNK_ELEMENTS // u.size, j_stop - j + 1))
        js = np.arange(j, j + rows, dtype=float)[:, None]
        r = js + u[None, :]
        vals = (
            (n - cd) * np.log(2.0 * js)
            + (cd - ce) * np.log(2.0 * js + 1.0)
            + ce * np.log(2.0 * js + 2.0)
            - n * np.log(2.0 * r)
        )
        vals = np.where(r <= r_max, vals, -np.inf)
        k = int(np.argmax(vals))
        if vals.flat[k] > best:
            best, best_r = float(vals.flat[k]), float(r.flat[k])
        j += rows
        j_stop = min(j_top, _last_useful_shell(slack, u, best, j_top))
    return best, best_r


def _last_useful_shell(slack: np.ndarray, u: np.ndarray, best: float, j_top: int) -> int:
    pos = slack > 0
    if not np.any(pos):
        return 0
    if best <= 0:
        return j_top
    # S/(2j+2u) > best  <=>  j < S/(2 best) - u
    need = np.ceil(slack[pos] / (2.0 * best) - u[pos]) - 1
    return int(min(j_top, max(0.0, float(np.max(need)))))


def maximal_function(x, cap=None) -> float:
    """Log of the centered cubic maximal function of the lattice measure at ``x``.

    ``cap`` is a :class:`RadiusCapPolicy`, a positive float (explicit cap) or
    ``None`` for the default threshold policy at level 2. Returns ``math.inf``
    when a coordinate is an integer and ``-math.inf`` if no cube within the
    cap contains a lattice point.
    """
    return maximize(x, cap)[0]
