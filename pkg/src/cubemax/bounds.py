"""Constant tracking for the structured lower bound and the main estimate.

The structured bound concerns points with at least ``n t + K sqrt(n t (1-t))``
t-centered coordinates. Writing ``n = D K^2 / (t (1-t))``, the log of the
density ratio at radius ``s - (1-t)/2`` is ``F(s)``; its real maximizer is
``s0 = (sqrt(D) + 1 - t) / 2`` and the integer ``floor(s0)`` loses at most the
mean-value remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .empirical import ProportionEstimate, clopper_pearson
from .errors import ParameterError
from .lattice import structured_lower_bound


def phi(x):
    """``(1+x) log(1+x)`` for x > -1."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= -1.0):
        raise ParameterError("phi is defined for x > -1")
    out = (1.0 + arr) * np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def phi_cubic_minorant(x):
    x = np.asarray(x, dtype=float)
    return x + x**2 / 2.0 - x**3 / 6.0


@dataclass(frozen=True)
class Lemma2Params:
    K: float
    t: float
    n: float
    D: float = field(init=False)

    def __post_init__(self):
        if not self.K > 0:
            raise ParameterError("K must be > 0")
        if not 0.0 < self.t < 1.0:
            raise ParameterError("t must lie in (0, 1)")
        if not self.n > 0:
            raise ParameterError("n must be > 0")
        object.__setattr__(self, "D", self.n * self.t * (1.0 - self.t) / self.K**2)

    @classmethod
    def from_D(cls, K: float, t: float, D: float) -> "Lemma2Params":
        return cls(K, t, D * K**2 / (t * (1.0 - t)))

    @property
    def s0(self) -> float:
        return (math.sqrt(self.D) + 1.0 - self.t) / 2.0

    @property
    def m(self) -> float:
        """Threshold count ``n t + K sqrt(n t (1-t))``."""
        return self.n * self.t + self.K * math.sqrt(self.n * self.t * (1.0 - self.t))


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.5):
        raise ParameterError("F is defined for s > 1/2")
    return s


def F_forms(s, p: Lemma2Params) -> tuple:
    """Both algebraic forms of F: the three-logarithm form and the ratio form."""
    s = _check_s(s)
    K2, D, t = p.K**2, p.D, p.t
    rd = math.sqrt(D)
    a = D / (1.0 - t) + rd
    b = D / t - rd
    direct = K2 * (a * np.log(2 * s) + b * np.log(2 * s - 1) - D / (t * (1 - t)) * np.log(2 * s - 1 + t))
    ratio = K2 * (a * np.log1p((1 - t) / (2 * s - 1 + t)) + b * np.log1p(-t / (2 * s - 1 + t)))
    return direct, ratio


FORM_TOLERANCE = 1e-10


def F_value(s, p: Lemma2Params):
    """F(s), checking that both printed forms agree.

    Agreement is relative to ``max(|F|, K^2)``, the natural scale of F.
    """
    direct, ratio = F_forms(s, p)
    scale = np.maximum(np.maximum(np.abs(direct), np.abs(ratio)), p.K**2)
    if np.any(np.abs(direct - ratio) > FORM_TOLERANCE * scale):
        raise ArithmeticError("the two forms of F disagree")
    return float(ratio) if np.ndim(ratio) == 0 else ratio


def F_prime(s, p: Lemma2Params):
    s = _check_s(s)
    rd = math.sqrt(p.D)
    out = p.K**2 * rd * (rd + 1 - p.t - 2 * s) / (s * (2 * s - 1) * (2 * s - 1 + p.t))
    return float(out) if out.ndim == 0 else out


def F_at_s0(p: Lemma2Params) -> float:
    """Closed form of F(s0) through phi."""
    rd = math.sqrt(p.D)
    K2, D, t = p.K**2, p.D, p.t
    return K2 * D / (1 - t) * phi((1 - t) / rd) + K2 * D / t * phi(-t / rd)


def mean_value_remainder(p: Lemma2Params) -> float:
    """Bound ``4 K^2 D / (sqrt(D) - 3)^3`` on |F'| over [s0 - 1, s0]."""
    return 4.0 * p.K**2 * p.D / (math.sqrt(p.D) - 3.0) ** 3


@dataclass(frozen=True)
class Lemma2Bound:
    rhs_printed: float
    rhs_conservative: float
    status: str

    @property
    def applicable(self) -> bool:
        return self.status == "ok"


def lemma2_bound(p: Lemma2Params) -> Lemma2Bound:
    """Both printed right-hand sides of the log maximal function bound.

    ``rhs_printed`` uses the remainder ``4 K^2 sqrt(D) / (sqrt(D)-3)^3`` and
    ``rhs_conservative`` uses ``4 K^2 D / (sqrt(D)-3)^3`` from the derivative
    bound. Only D > 9 is covered.
    """
    if not p.D > 9.0:
        return Lemma2Bound(math.nan, math.nan, "not-applicable")
    K2, rd = p.K**2, math.sqrt(p.D)
    head = K2 / 2.0 - K2 / (6.0 * rd)
    return Lemma2Bound(
        head - 4.0 * K2 * rd / (rd - 3.0) ** 3,
        head - mean_value_remainder(p),
        "ok",
    )


def _lemma2_ratio(D: float) -> float:
    rd = math.sqrt(D)
    return 0.5 - 1.0 / (6.0 * rd) - 4.0 * D / (rd - 3.0) ** 3


def min_dimension(eta: float, tol: float = 1e-6) -> float:
    """Smallest D > 9 with conservative RHS >= K^2/(2+eta), by bisection.

    The condition does not depend on K. The returned value satisfies it.
    """
    if not 0.0 < eta < 2.0:
        raise ParameterError("eta must lie in (0, 2)")
    target = 1.0 / (2.0 + eta)
    lo, hi = 9.0, 16.0
    while _lemma2_ratio(hi) < target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _lemma2_ratio(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


# -- main estimate ------------------------------------------------------------

STRICT_SLACK = 1e-12


def minimal_x(c_eta: float) -> float:
    """Smallest x with 2 exp(-x/6) <= c_eta/2 - 1e-12."""
    if not 0.0 < c_eta <= 1.0:
        raise ParameterError("c_eta must lie in (0, 1]")
    return -6.0 * math.log((c_eta / 2.0 - STRICT_SLACK) / 2.0)


@dataclass(frozen=True)
class TheoremParams:
    n: float
    eta: float
    c_eta: float
    eps: float
    x: float
    lil_term: float
    correction: float
    K: float
    d_eta: float
    required_n: float
    eps_valid: bool
    applicable: bool
    vacuous: bool
    bound: float
    exponent: float
    printed_rate: float


def theorem_pipeline(n: float, eta: float, c_eta: float, x_override: float | None = None) -> TheoremParams:
    """Evaluate the main estimate's chain of constants at dimension ``n``.

    ``eps = (log n)^2 / n`` and
    ``K = sqrt((2-eta) log log(1/eps)) - (12 log n + x)/sqrt(n eps (1-eps))``.
    The bound ``(c_eta/2) exp(K^2/(2+eta))`` is reported only when eps <= 1/e,
    K > 0 and ``n >= D(eta) K^2 / (eps (1-eps))``; otherwise it is vacuous and 0.
    """
    if n < 3:
        raise ParameterError("n must be >= 3")
    if not 0.0 < eta < 2.0:
        raise ParameterError("eta must lie in (0, 2)")
    if not 0.0 < c_eta <= 1.0:
        raise ParameterError("c_eta must lie in (0, 1]")
    x = minimal_x(c_eta) if x_override is None else float(x_override)
    log_n = math.log(n)
    eps = log_n**2 / n
    eps_valid = 0.0 < eps <= 1.0 / math.e
    correction = (12.0 * log_n + x) / math.sqrt(n * eps * (1.0 - eps)) if eps < 1.0 else math.inf
    if eps_valid:
        lil_term = math.sqrt((2.0 - eta) * math.log(math.log(1.0 / eps)))
        K = lil_term - correction
    else:
        lil_term = math.nan
        K = math.nan
    d_eta = min_dimension(eta)
    if eps_valid and K > 0:
        required = d_eta * K**2 / (eps * (1.0 - eps))
    else:
        required = math.nan
    applicable = eps_valid and K > 0 and n >= required
    bound = (c_eta / 2.0) * math.exp(K**2 / (2.0 + eta)) if applicable else 0.0
    exponent = (2.0 - 2.0 * eta) / (2.0 + eta)
    return TheoremParams(
        n=float(n),
        eta=eta,
        c_eta=c_eta,
        eps=eps,
        x=x,
        lil_term=lil_term,
        correction=correction,
        K=K,
        d_eta=d_eta,
        required_n=required,
        eps_valid=eps_valid,
        applicable=applicable,
        vacuous=not applicable,
        bound=bound,
        exponent=exponent,
        printed_rate=(c_eta / 2.0) * log_n**exponent,
    )


# -- empirical certified bound --------------------------------------------------


@dataclass(frozen=True)
class LevelResult:
    level: float
    hits: int
    trials: int
    low: float
    high: float

    @property
    def fraction(self) -> float:
        return self.hits / self.trials


@dataclass(frozen=True)
class BoundReport:
    """Lower bound on the weak (1,1) constant from sampled maximal values.

    ``certified`` is ``max_L L * (lower 95% limit of vol{M > L})`` and is a
    95%-confidence statement for the level achieving it; ``estimate`` is the
    point estimate ``max_L L * fraction``.
    """

    estimate: float
    certified: float
    ci: tuple
    best_level: float
    levels: tuple
    status: str = "ok"
    parameters: dict = field(default_factory=dict)


def count_exceedances(log_ratios, levels) -> list[int]:
    """Per level, the number of log values strictly above log L."""
    lr = np.asarray(log_ratios, dtype=float)
    return [int(np.count_nonzero(lr > math.log(L))) for L in levels]


def theta_lower_from_counts(hits, trials: int, levels, parameters: dict | None = None) -> BoundReport:
    if trials < 1:
        raise ParameterError("no samples")
    levels = [float(L) for L in levels]
    if not levels or any(not L > 1.0 for L in levels):
        raise ParameterError("levels must be a non-empty list of values > 1")
    rows = []
    for L, h in zip(levels, hits):
        low, high = clopper_pearson(int(h), trials)
        rows.append(LevelResult(L, int(h), trials, low, high))
    point = max(rows, key=lambda r: r.level * r.fraction)
    cert = max(rows, key=lambda r: r.level * r.low)
    return BoundReport(
        estimate=point.level * point.fraction,
        certified=cert.level * cert.low,
        ci=(cert.level * cert.low, cert.level * cert.high),
        best_level=cert.level,
        levels=tuple(rows),
        parameters=dict(parameters or {}),
    )


def theta_lower_from_samples(log_ratios, levels, parameters: dict | None = None) -> BoundReport:
    """Bound from log maximal values of points sampled uniformly on [0,1]^n.

    Infinite values count as exceeding every level.
    """
    lr = np.asarray(log_ratios, dtype=float)
    if lr.size == 0:
        raise ParameterError("no samples")
    return theta_lower_from_counts(count_exceedances(lr, levels), lr.size, levels, parameters)


@dataclass(frozen=True)
class StructuredBound:
    bound: float
    certified: float
    level: float
    required_n: float
    status: str


def combine_structured_bound(volume, K: float, eta: float, n: int, t_window) -> StructuredBound:
    """``volume * exp(K^2/(2+eta))`` once the dimension condition holds on the window.

    ``volume`` is a probability or a :class:`ProportionEstimate`; for the
    latter ``certified`` uses its lower confidence limit.
    """
    if isinstance(volume, ProportionEstimate):
        point, low = volume.estimate, volume.low
    else:
        point = low = float(volume)
    a, b = t_window
    if not 0.0 < a <= b < 1.0:
        raise ParameterError("t window must lie inside (0, 1)")
    worst = min(a * (1 - a), b * (1 - b))
    required = min_dimension(eta) * K**2 / worst
    level = math.exp(K**2 / (2.0 + eta))
    if n < required:
        return StructuredBound(0.0, 0.0, level, required, "dimension-too-small")
    return StructuredBound(point * level, low * level, level, required, "ok")


# -- structured-bound verification grid ---------------------------------------

GRID_K = (0.5, 1.0, 2.0)
GRID_T = (0.1, 0.3, 0.5, 0.7, 0.9)
PHI_SWEEP = np.linspace(-1.0 + 1e-6, 10.0, 200001)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict
    status: str = "ok"


def centered_point(n: int, m: int, t: float) -> np.ndarray:
    """A point with exactly ``m`` t-centered coordinates and none on Z."""
    x = np.full(n, (1.0 - t) / 4.0)
    x[:m] = 0.5
    return x


def lemma2_case(K: float, t: float, D: float, perturb: float = 0.0) -> list[Check]:
    """All checks of the structured-bound chain at one (K, t, D).

    ``perturb`` inflates every lower-bound right-hand side by that fraction;
    it exists so the harness can confirm that it detects failures.
    """
    n = math.ceil(D * K**2 / (t * (1.0 - t)))
    p = Lemma2Params(K, t, n)
    tag = {"K": K, "t": t, "n": n, "D": p.D}
    bump = 1.0 + perturb
    bound = lemma2_bound(p)
    if not bound.applicable:
        return [Check("lemma2", True, tag, status="not-applicable")]
    s0 = p.s0
    s_floor = math.floor(s0)
    checks = []

    direct, ratio = F_forms(np.array([s0, s_floor]), p)
    rel = np.abs(direct - ratio) / np.maximum(np.maximum(np.abs(direct), np.abs(ratio)), K**2)
    checks.append(Check("dual-form", bool(np.all(rel <= FORM_TOLERANCE)), {**tag, "max_rel": float(rel.max())}))

    fp = F_prime(s0, p)
    checks.append(Check("stationary", abs(fp) <= 1e-10 * K**2, {**tag, "F_prime_s0": fp}))

    f_s0 = F_value(s0, p)
    phi_rhs = K**2 / 2.0 + K**2 * (2 * t - 1) / (6 * math.sqrt(p.D))
    checks.append(Check("phi-consequence", f_s0 >= bump * phi_rhs, {**tag, "F_s0": f_s0, "rhs": phi_rhs}))

    z = np.linspace(max(s0 - 1.0, 0.5 + 1e-9), s0, 2001)
    sup_fp = float(np.max(np.abs(F_prime(z, p))))
    remainder = mean_value_remainder(p)
    f_floor = F_value(s_floor, p)
    mvt_rhs = f_s0 - sup_fp
    checks.append(
        Check(
            "mean-value",
            f_floor >= bump * mvt_rhs and sup_fp <= remainder,
            {**tag, "F_floor": f_floor, "rhs": mvt_rhs, "sup_abs_F_prime": sup_fp, "remainder": remainder},
        )
    )

    checks.append(
        Check(
            "lemma2-analytic",
            f_floor >= bump * bound.rhs_conservative,
            {**tag, "F_floor": f_floor, "rhs_conservative": bound.rhs_conservative, "rhs_printed": bound.rhs_printed},
        )
    )

    m = math.ceil(p.m)
    x = centered_point(n, m, t)
    value = structured_lower_bound(x, t, range(1, math.ceil(s0) + 2))
    checks.append(
        Check(
            "structured-vs-rhs",
            value >= bump * bound.rhs_conservative,
            {**tag, "m": m, "structured": value, "rhs_conservative": bound.rhs_conservative},
        )
    )
    return checks


def phi_sweep_check(perturb: float = 0.0) -> Check:
    gap = phi(PHI_SWEEP) - phi_cubic_minorant(PHI_SWEEP) * (1.0 + perturb)
    # the minorant is negative for large x, where scaling it up loosens the test
    gap = np.where(phi_cubic_minorant(PHI_SWEEP) >= 0, gap, phi(PHI_SWEEP) - phi_cubic_minorant(PHI_SWEEP))
    return Check("phi-inequality", bool(np.all(gap >= 0)), {"points": int(PHI_SWEEP.size), "min_gap": float(gap.min())})


def verify_lemma2_grid(eta: float = 1.0, perturb: float = 0.0, extra_D: tuple = ()) -> list[Check]:
    """The full structured-bound grid with D = max(25, D(eta)), plus any extra D values."""
    D = max(25.0, min_dimension(eta))
    checks = [phi_sweep_check(perturb)]
    for K in GRID_K:
        for t in GRID_T:
            checks.extend(lemma2_case(K, t, D, perturb))
    for d in extra_D:
        p = Lemma2Params.from_D(1.0, 0.5, d)
        checks.append(Check("lemma2", True, {"K": 1.0, "t": 0.5, "D": p.D}, status=lemma2_bound(p).status))
    return checks
