import math

import numpy as np
import pytest

from cubemax import rng as rngmod
from cubemax.bridge import (
    BridgePath,
    LilConfig,
    alpha_for,
    bridge_covariance,
    check_grid,
    covariance_check,
    discrete_motion_sup,
    gaussian_tail,
    gaussian_tail_lower,
    ks_two_sample,
    lil_analytic_floor,
    lil_probability,
    make_grid,
    rho_for,
    sample_bridge,
    sample_bridge_points,
    sample_bridges,
    sample_normalized_walk,
    sample_sup_bridge,
    sup_normalized_bridge,
    sup_normalized_bridge_values,
    tail_constant,
    tail_ratio,
    time_inversion_bridge,
)
from cubemax.errors import ConfigError, ParameterError


class TestGrid:
    @pytest.mark.parametrize("eps", [0.01, 0.05, 0.3])
    def test_contains_key_times(self, eps):
        g = make_grid(eps, 512)
        for t in (0.0, 0.5, 1.0, eps, 1 - eps):
            assert np.any(g == t)
        assert np.all(np.diff(g) > 0)
        assert abs(g.size - 512) < 16

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            make_grid(0.5)
        with pytest.raises(ParameterError):
            check_grid([0.0, 0.5, 0.4, 1.0])
        with pytest.raises(ParameterError):
            check_grid([0.1, 1.0])

    def test_endpoints_pinned(self):
        g = make_grid(0.05, 256)
        paths = sample_bridges(g, np.random.default_rng(0), 50)
        assert np.all(paths[:, 0] == 0.0)
        assert np.all(paths[:, -1] == 0.0)
        inv = time_inversion_bridge(np.ones((2, g.size - 1)), g)
        assert np.all(inv[:, -1] == 0.0)
        assert inv[0, 1] == pytest.approx(1 - g[1])


@pytest.fixture(scope="module")
def values():
    return sample_bridge_points((0.25, 0.5, 0.75), 100_000, seed=1)


class TestCovariance:
    def test_midpoint_variance(self, values):
        check = covariance_check(values, (0.25, 0.5, 0.75), bridge_covariance)
        assert check.sample[1, 1] == pytest.approx(0.25, abs=4 * check.stderr[1, 1])
        assert check.sample[0, 2] == pytest.approx(0.0625, abs=4 * check.stderr[0, 2])
        assert check.passed(4)

    def test_time_inversion_covariance(self):
        ts = (0.1, 0.5, 0.9)
        v = sample_bridge_points(ts, 100_000, seed=2, construction="inversion")
        assert covariance_check(v, ts, bridge_covariance).passed(4)

    def test_detects_wrong_model(self, values):
        check = covariance_check(values, (0.25, 0.5, 0.75), lambda t, u: min(t, u))
        assert not check.passed(4)

    def test_constructions_agree_in_law(self):
        a = sample_sup_bridge(0.05, 4000, seed=3, resolution=512)
        b = sample_sup_bridge(0.05, 4000, seed=3, resolution=512, construction="inversion")
        assert ks_two_sample(a, b)[1] >= 0.01


class TestSupremum:
    def test_zero_path(self):
        g = make_grid(0.1, 64)
        assert sup_normalized_bridge(BridgePath(g, np.zeros_like(g)), 0.1) == 0.0

    def test_spike(self):
        g = make_grid(0.1, 64)
        v = np.where(g == 0.5, 1.0, 0.0)
        assert sup_normalized_bridge(BridgePath(g, v), 0.1) == pytest.approx(2.0)

    def test_narrower_window_is_smaller(self):
        g = make_grid(0.02, 512)
        paths = sample_bridges(g, np.random.default_rng(4), 200)
        wide = sup_normalized_bridge_values(paths, g, 0.02)
        for eps in (0.05, 0.2, 0.4):
            assert np.all(sup_normalized_bridge_values(paths, g, eps) <= wide)

    def test_window_must_be_covered(self):
        g = make_grid(0.1, 64)
        with pytest.raises(ParameterError):
            sup_normalized_bridge_values(np.zeros((1, g.size)), g[g >= 0.2], 0.1)

    def test_single_path_helper(self):
        g = make_grid(0.1, 64)
        p = sample_bridge(g, np.random.default_rng(5))
        assert p.values[0] == 0.0 and p.values[-1] == 0.0

    def test_workers_do_not_change_result(self):
        a = sample_sup_bridge(0.1, 600, seed=6, resolution=128, workers=1)
        b = sample_sup_bridge(0.1, 600, seed=6, resolution=128, workers=2)
        assert np.array_equal(a, b)


class TestDiscreteMotion:
    def test_single_step_is_half(self):
        est = discrete_motion_sup(1, 0.0, 20_000, seed=7)
        assert est.low <= 0.5 <= est.high

    def test_increasing_in_N(self):
        ests = [discrete_motion_sup(N, 2.0, 20_000, seed=8) for N in (1, 10, 100)]
        assert ests[0].high < ests[1].low
        assert ests[1].high < ests[2].low

    def test_normalized_covariance(self):
        ks = (2, 8)
        v = sample_normalized_walk(ks, 100_000, seed=9)
        check = covariance_check(v, ks, lambda i, j: math.sqrt(min(i, j) / max(i, j)))
        assert check.expected[0, 1] == pytest.approx(0.5)
        assert check.passed(4)


class TestGaussianTail:
    def test_value_at_two(self):
        assert gaussian_tail_lower(2.0) == pytest.approx(0.020249, abs=1e-5)
        assert gaussian_tail(2.0) == pytest.approx(0.022750, abs=1e-5)

    def test_lower_bound_sweep(self):
        x = np.linspace(1.0, 8.0, 10_001)
        assert np.all(gaussian_tail_lower(x) <= gaussian_tail(x))

    @pytest.mark.parametrize("rho", [0.5, 1.0, 1.5, 24 / 13, 1.9, 1.99])
    def test_constant_matches_dense_grid(self, rho):
        x = np.linspace(2.0, 40.0, 400_001)
        with np.errstate(over="ignore"):
            oracle = float(np.min(tail_ratio(x, rho)))
        c = tail_constant(rho)
        assert c <= oracle * (1 + 1e-12)
        assert c == pytest.approx(oracle, rel=1e-6)

    def test_constant_bounds_tail(self):
        rho = 1.9
        c = tail_constant(rho)
        x = np.linspace(2.0, 10.0, 5001)
        assert np.all(gaussian_tail_lower(x) >= c * np.exp(-(x**2) / rho) * (1 - 1e-12))

    def test_constant_domain(self):
        with pytest.raises(ConfigError):
            tail_constant(2.0)


class TestLilConfig:
    def test_default_alpha(self):
        cfg = LilConfig(1.0, math.e**3)
        assert cfg.alpha == pytest.approx(25.0)
        assert cfg.rho == pytest.approx(1.5)
        assert cfg.eps == pytest.approx(math.exp(-3))

    @pytest.mark.parametrize("eta", [0.25, 1.0, 1.9])
    def test_alpha_rho_inverse(self, eta):
        rho = 2 - eta / 3
        assert rho_for(eta, alpha_for(eta, rho)) == pytest.approx(rho)

    def test_small_alpha_rejected(self):
        cfg = LilConfig(1.0, math.e**3, alpha=4.0)
        assert cfg.rho >= 2.0
        with pytest.raises(ConfigError):
            lil_analytic_floor(cfg)

    def test_bad_parameters(self):
        with pytest.raises(ConfigError):
            LilConfig(2.0, math.e**3)
        with pytest.raises(ConfigError):
            LilConfig(1.0, 2.0)

    def test_floor_vacuous_when_no_event_fits(self):
        floor = lil_analytic_floor(LilConfig(1.0, math.e**3))
        assert floor.events < 1
        assert floor.vacuous
        assert floor.value == 0.0
        assert floor.exact_tail_value == 0.0

    def test_floor_positive_for_large_A(self):
        floor = lil_analytic_floor(LilConfig(1.0, 1e8))
        assert floor.events >= 1
        assert 0.0 < floor.value < 0.5
        assert 0.0 < floor.exact_tail_value < 0.5


class TestLilProbability:
    def test_eta_near_two_at_least_half(self):
        est = lil_probability(LilConfig(1.999, math.e**3), 4000, seed=10, resolution=256)
        assert est.high >= 0.5

    def test_eta_one_is_positive(self):
        cfg = LilConfig(1.0, math.e**3)
        est = lil_probability(cfg, 4000, seed=11, resolution=256)
        assert est.low > 0.0
        assert est.estimate >= lil_analytic_floor(cfg).value

    def test_uses_bridge_stream(self):
        cfg = LilConfig(1.0, math.e**2)
        a = lil_probability(cfg, 300, seed=12, resolution=128)
        g = make_grid(cfg.eps, 128)
        paths = sample_bridges(g, rngmod.block_generator(12, rngmod.BRIDGE, 0), 256)
        paths2 = sample_bridges(g, rngmod.block_generator(12, rngmod.BRIDGE, 1), 44)
        sup = sup_normalized_bridge_values(np.vstack([paths, paths2]), g, cfg.eps)
        assert a.hits == int(np.count_nonzero(sup >= cfg.threshold))
