"""Experiment drivers behind the command line.

Each ``run_*`` function takes an :class:`ExperimentConfig`, fills in the
command's defaults and returns a report document (a plain dict following
:data:`cubemax.reports.REPORT_SCHEMA`) plus the rows for optional CSV output.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace
from functools import partial

import numpy as np

from . import __version__
from . import bounds, bridge, empirical, lattice
from . import rng as rngmod
from .errors import ParameterError
from .reports import ExperimentConfig, plain

DEFAULT_SEEDLESS = ("lemma2-verify", "pipeline")
COVARIANCE_TIMES = (0.1, 0.25, 0.5, 0.75, 0.9)
MOTION_NS = (1, 10, 100, 1000)


def _check(name, passed, detail=None, status="ok"):
    return {"name": name, "passed": bool(passed), "status": status, "detail": plain(detail or {})}


def _document(cfg, results, checks, summary, started, status=None):
    if status is None:
        status = "pass" if all(c["passed"] for c in checks) else "fail"
    return {
        "command": cfg.command,
        "version": __version__,
        "status": status,
        "config": plain(cfg.as_dict()),
        "summary": summary,
        "results": plain(results),
        "checks": checks,
        "wall_clock_seconds": time.perf_counter() - started,
    }


def _require_seed(cfg):
    if cfg.seed is None:
        raise ParameterError(f"{cfg.command} is stochastic and needs --seed")
    if cfg.seed < 0:
        raise ParameterError("seed must be non-negative")


# -- theta-lower ----------------------------------------------------------------


def _theta_block(generator, size, *, n, levels, policy):
    pts = empirical.sample_uniform_points(generator, size, n)
    vals = np.array([lattice.maximal_function(p, policy) for p in pts])
    return bounds.count_exceedances(vals, levels), int(np.count_nonzero(np.isposinf(vals)))


def theta_lower_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    levels = cfg.levels or (2.0,)
    cap_value = cfg.cap_value
    if cap_value is None:
        if cfg.cap_mode == "explicit":
            raise ParameterError("--cap-mode explicit needs --cap-value")
        cap_value = lattice.DEFAULT_LEVEL
    return replace(
        cfg,
        n=cfg.n if cfg.n is not None else 1,
        trials=cfg.trials if cfg.trials is not None else 10_000,
        levels=tuple(float(L) for L in levels),
        cap_value=float(cap_value),
    )


def run_theta_lower(cfg: ExperimentConfig):
    started = time.perf_counter()
    _require_seed(cfg)
    cfg = theta_lower_defaults(cfg)
    if cfg.n < 1 or cfg.trials < 1:
        raise ParameterError("n and trials must be >= 1")
    if any(not L > 1 for L in cfg.levels):
        raise ParameterError("levels must exceed 1")
    policy = lattice.RadiusCapPolicy(cfg.cap_mode, cfg.cap_value)
    if cfg.cap_mode == "threshold" and min(cfg.levels) < cfg.cap_value:
        raise ParameterError("levels below the cap threshold would be evaluated on a truncated radius range")

    fn = partial(_theta_block, n=cfg.n, levels=cfg.levels, policy=policy)
    parts = rngmod.run_blocks(fn, cfg.trials, cfg.seed, rngmod.POINTS, cfg.workers, rngmod.point_block_size(cfg.n))
    hits = np.sum([p[0] for p in parts], axis=0)
    infinite = sum(p[1] for p in parts)
    rep = bounds.theta_lower_from_counts(hits, cfg.trials, cfg.levels)

    rows = [
        {
            "level": r.level,
            "hits": r.hits,
            "trials": r.trials,
            "fraction": r.fraction,
            "low": r.low,
            "high": r.high,
            "L_times_fraction": r.level * r.fraction,
            "L_times_low": r.level * r.low,
        }
        for r in rep.levels
    ]
    results = {
        "n": cfg.n,
        "trials": cfg.trials,
        "r_max": policy.r_max(cfg.n),
        "certified": rep.certified,
        "estimate": rep.estimate,
        "ci": list(rep.ci),
        "best_level": rep.best_level,
        "infinite_samples": infinite,
        "levels": rows,
    }
    summary = (
        f"theta-lower n={cfg.n} trials={cfg.trials}: certified Theta_n >= {rep.certified:.6f} "
        f"at L={rep.best_level:g} (point estimate {rep.estimate:.6f})"
    )
    return _document(cfg, results, [], summary, started), rows


# -- lemma2-verify --------------------------------------------------------------


def run_lemma2_verify(cfg: ExperimentConfig):
    started = time.perf_counter()
    cfg = replace(cfg, eta=cfg.eta if cfg.eta is not None else 1.0)
    perturb = 0.01 if cfg.self_test else 0.0
    extra = (cfg.inject_d,) if cfg.inject_d is not None else ()
    raw = bounds.verify_lemma2_grid(cfg.eta, perturb=perturb, extra_D=extra)
    checks = [_check(c.name, c.passed, c.detail, c.status) for c in raw]
    failed = [c for c in checks if not c["passed"]]
    skipped = [c for c in checks if c["status"] == "not-applicable"]
    if cfg.self_test:
        detected = len(failed) > 0
        status = "pass" if detected else "fail"
        summary = (
            f"lemma2-verify self-test: perturbed bounds {'detected' if detected else 'NOT detected'} "
            f"({len(failed)} of {len(checks)} checks failed)"
        )
    else:
        status = "fail" if failed else ("warn" if skipped else "pass")
        summary = f"lemma2-verify eta={cfg.eta:g}: {len(checks) - len(failed)}/{len(checks)} checks passed"
        if skipped:
            summary += f", {len(skipped)} not applicable (D <= 9)"
    results = {
        "d_eta": bounds.min_dimension(cfg.eta),
        "grid_D": max(25.0, bounds.min_dimension(cfg.eta)),
        "checks_total": len(checks),
        "checks_failed": len(failed),
        "not_applicable": len(skipped),
        "self_test": cfg.self_test,
    }
    rows = [{"name": c["name"], "passed": c["passed"], "status": c["status"]} for c in checks]
    return _document(cfg, results, checks, summary, started, status), rows


# -- bridge-suite ---------------------------------------------------------------


def bridge_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    e = math.e
    return replace(
        cfg,
        trials=cfg.trials if cfg.trials is not None else 100_000,
        ks_trials=cfg.ks_trials if cfg.ks_trials is not None else 10_000,
        eps=cfg.eps if cfg.eps is not None else 0.05,
        grid=cfg.grid if cfg.grid is not None else bridge.DEFAULT_RESOLUTION,
        eta=cfg.eta if cfg.eta is not None else 1.0,
        a_grid=cfg.a_grid if cfg.a_grid is not None else (e**2, e**3, e**4),
        n=cfg.n if cfg.n is not None else 10_000,
    )


def covariance_part(cfg):
    checks, results = [], {}
    for construction in ("subtraction", "inversion"):
        vals = bridge.sample_bridge_points(COVARIANCE_TIMES, cfg.trials, cfg.seed, construction, cfg.workers)
        cov = bridge.covariance_check(vals, COVARIANCE_TIMES, bridge.bridge_covariance)
        results[construction] = {
            "sample": cov.sample,
            "expected": cov.expected,
            "stderr": cov.stderr,
            "max_z": float(cov.z.max()),
        }
        checks.append(_check(f"covariance-{construction}", cov.passed(4.0), {"max_z": float(cov.z.max())}))
    return checks, results


def construction_part(cfg):
    a = bridge.sample_sup_bridge(cfg.eps, cfg.ks_trials, cfg.seed, cfg.grid, "subtraction", cfg.workers)
    b = bridge.sample_sup_bridge(cfg.eps, cfg.ks_trials, cfg.seed, cfg.grid, "inversion", cfg.workers)
    d, p = bridge.ks_two_sample(a, b)
    detail = {"ks": d, "p_value": p, "mean_subtraction": a.mean(), "mean_inversion": b.mean()}
    return [_check("construction-ks", p >= 0.01, detail)], detail


def lil_part(cfg):
    checks, rows = [], []
    for A in cfg.a_grid:
        lc = bridge.LilConfig(cfg.eta, float(A))
        floor = bridge.lil_analytic_floor(lc)
        est = bridge.lil_probability(lc, cfg.ks_trials, cfg.seed, cfg.grid, cfg.workers)
        row = {
            "A": float(A),
            "log_A": math.log(A),
            "eps": lc.eps,
            "threshold": lc.threshold,
            "alpha": lc.alpha,
            "rho": lc.rho,
            "events": lc.N,
            "tail_constant": floor.tail_constant,
            "floor": floor.value,
            "floor_exact_tail": floor.exact_tail_value,
            "floor_vacuous": floor.vacuous,
            "estimate": est.estimate,
            "low": est.low,
            "high": est.high,
        }
        rows.append(row)
        ok = est.estimate >= floor.value and est.estimate >= floor.exact_tail_value and est.low > 0
        checks.append(_check(f"lil-A={A:.6g}", ok, row))
    return checks, rows


def motion_part(cfg):
    ests = [bridge.discrete_motion_sup(N, 1.0, cfg.ks_trials, cfg.seed, cfg.workers) for N in MOTION_NS]
    rows = [{"N": N, "estimate": e.estimate, "low": e.low, "high": e.high} for N, e in zip(MOTION_NS, ests)]
    trend = all(b.estimate >= a.estimate or a.overlaps(b) for a, b in zip(ests, ests[1:]))
    walk = bridge.sample_normalized_walk((2, 8), cfg.trials, cfg.seed, cfg.workers)
    cov = bridge.covariance_check(walk, (2, 8), lambda i, j: math.sqrt(min(i, j) / max(i, j)))
    checks = [
        _check("motion-trend", trend, {"rows": rows}),
        _check("motion-covariance", cov.passed(4.0), {"sample": cov.sample[0, 1], "expected": cov.expected[0, 1]}),
    ]
    return checks, rows


def donsker_part(cfg):
    a = empirical.sample_sup_alpha(cfg.n, cfg.eps, cfg.ks_trials, cfg.seed, cfg.workers)
    b = bridge.sample_sup_bridge(cfg.eps, cfg.ks_trials, cfg.seed, cfg.grid, "subtraction", cfg.workers)
    d, p = bridge.ks_two_sample(a, b)
    detail = {"n": cfg.n, "eps": cfg.eps, "ks": d, "p_value": p, "mean_empirical": a.mean(), "mean_bridge": b.mean()}
    return [_check("donsker", d <= 0.05, detail)], detail


def run_bridge_suite(cfg: ExperimentConfig, donsker_only: bool = False):
    started = time.perf_counter()
    _require_seed(cfg)
    cfg = bridge_defaults(cfg)
    checks, results, rows = [], {}, []
    if not donsker_only:
        c, results["covariance"] = covariance_part(cfg)
        checks += c
        c, results["constructions"] = construction_part(cfg)
        checks += c
        c, results["lil"] = lil_part(cfg)
        checks += c
        rows = results["lil"]
        c, results["motion"] = motion_part(cfg)
        checks += c
    c, results["donsker"] = donsker_part(cfg)
    checks += c
    if donsker_only:
        rows = [results["donsker"]]
    passed = sum(ch["passed"] for ch in checks)
    summary = f"{cfg.command}: {passed}/{len(checks)} checks passed (donsker KS={results['donsker']['ks']:.4f})"
    return _document(cfg, results, checks, summary, started), rows


# -- pipeline -------------------------------------------------------------------


def pipeline_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(
        cfg,
        n_grid=cfg.n_grid if cfg.n_grid is not None else tuple(float(10**k) for k in range(3, 13)),
        eta_grid=cfg.eta_grid if cfg.eta_grid is not None else (0.25, 0.5, 1.0),
        trials=cfg.trials if cfg.trials is not None else 2_000,
        grid=cfg.grid if cfg.grid is not None else bridge.DEFAULT_RESOLUTION,
    )


def run_pipeline(cfg: ExperimentConfig):
    started = time.perf_counter()
    cfg = pipeline_defaults(cfg)
    if cfg.c_eta is None:
        _require_seed(cfg)
    rows = []
    for eta in cfg.eta_grid:
        for n in cfg.n_grid:
            if n < 3:
                raise ParameterError("pipeline dimensions must be >= 3")
            c_source, c_low, c_high = "override", None, None
            c = cfg.c_eta
            if c is None:
                eps = math.log(n) ** 2 / n
                if eps <= 1.0 / math.e:
                    est = bridge.lil_probability(bridge.LilConfig(eta, 1.0 / eps), cfg.trials, cfg.seed, cfg.grid, cfg.workers)
                    c, c_low, c_high, c_source = max(est.estimate, 1.0 / cfg.trials), est.low, est.high, "monte-carlo"
                else:
                    c, c_source = 1.0, "placeholder (eps > 1/e)"
            tp = bounds.theorem_pipeline(n, eta, c)
            rows.append({**plain(tp), "c_source": c_source, "c_low": c_low, "c_high": c_high})
    all_vacuous = all(r["vacuous"] for r in rows)
    checks = [
        _check(
            "exponent-echo",
            all(abs(r["exponent"] - (2 - 2 * r["eta"]) / (2 + r["eta"])) < 1e-15 for r in rows),
        ),
        _check("vacuity-reported", True, {"all_vacuous": all_vacuous, "rows": len(rows)}),
    ]
    exps = ", ".join(f"eta={e:g}: {(2 - 2 * e) / (2 + e):.6f}" for e in cfg.eta_grid)
    summary = (
        f"pipeline: {sum(r['vacuous'] for r in rows)}/{len(rows)} rows vacuous; "
        f"printed exponent (2-2eta)/(2+eta): {exps}"
    )
    results = {"rows": rows, "all_vacuous": all_vacuous}
    return _document(cfg, results, checks, summary, started), rows


RUNNERS = {
    "theta-lower": run_theta_lower,
    "lemma2-verify": run_lemma2_verify,
    "bridge-suite": run_bridge_suite,
    "donsker-diag": partial(run_bridge_suite, donsker_only=True),
    "pipeline": run_pipeline,
}


def run(cfg: ExperimentConfig):
    return RUNNERS[cfg.command](cfg)
