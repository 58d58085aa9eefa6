"""Tuning quantities: info numbers, MGF roots, design formulas.

Reference values used below were cross-checked three ways before freezing:
deterministic Gauss-Hermite quadrature, adaptive quadrature of the explicit
mixture integrand, and 1e7-sample Monte Carlo.  All three agree to the
digits asserted.
"""

import math

import numpy as np
import pytest

from lacusum import (
    ConfigError,
    NoPositiveRootError,
    QuadratureConfig,
    arl_lower_bound,
    b_gamma,
    d_opt,
    efficiency_improvement,
    info_number,
    info_number_closed_form,
    solve_lambda,
    solve_mgf_root,
    tuning_grid,
    tuning_report,
)
from lacusum.tuning import alpha_oracle, delay_budget

QUAD = QuadratureConfig.quadrature()

# exact roots of the mixture MGF equation for eps=0.1, g = N(0, 3^2)
LAMBDA_EXACT = {0.0: 0.4589, 0.21: 1.3792, 0.51: 2.4258}


class TestInfoNumber:
    def test_llr_closed_form(self, model0):
        assert info_number(1.0, 0.0, 0.0, model0) == pytest.approx(0.5, abs=1e-12)
        assert info_number(2.0, 0.0, 0.0, model0) == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, 0.21, 0.51, 1.0])
    @pytest.mark.parametrize("theta", [1.0, 1.5, 2.0])
    def test_closed_form_vs_monte_carlo(self, model0, alpha, theta):
        closed = info_number_closed_form(theta, alpha)
        qc = QuadratureConfig.monte_carlo(1_000_000, seed=17)
        mc = info_number(theta, 0.0, alpha, model0, qc)
        # MC standard error of the increment mean at this sample size
        from lacusum import LocalParams, lalpha_increment
        rng = np.random.default_rng(17)
        y = lalpha_increment(rng.normal(theta, 1.0, 200_000),
                             LocalParams(alpha, model0.nominal))
        se = y.std(ddof=1) / math.sqrt(1_000_000)
        assert abs(mc - closed) < 3 * max(se, 1e-9)

    def test_quadrature_matches_closed_form_when_contaminated_family_standard(self, model01):
        # eps > 0 goes through quadrature; at eps=0 it must agree with the closed form
        for alpha in (0.21, 0.51):
            quad = info_number(1.5, 0.0, alpha, model01.with_epsilon(0.0), QUAD)
            assert quad == pytest.approx(info_number_closed_form(1.5, alpha), abs=1e-10)

    def test_large_shift_hurts_robust_statistic(self, model0):
        # the robust info number rises then falls in theta
        assert info_number_closed_form(10.0, 0.51) < info_number_closed_form(2.0, 0.51)

    def test_rise_then_fall_shape(self, model0):
        thetas = np.arange(0.8, 8.0, 0.2)
        vals = [info_number_closed_form(t, 0.21) for t in thetas]
        peak = int(np.argmax(vals))
        assert 0 < peak < len(vals) - 1
        assert all(np.diff(vals[:peak + 1]) > 0)
        assert all(np.diff(vals[peak:]) < 0)

    def test_point_mass_outlier_expectation(self, fam):
        from lacusum import GrossErrorModel, OutlierSpec
        model = GrossErrorModel(0.2, fam, OutlierSpec.point_mass_outlier(0.5))
        # increment at the symmetric point is zero, so only the nominal term remains
        val = info_number(1.0, 0.2, 0.0, model, QUAD)
        assert val == pytest.approx(0.8 * 0.5, abs=1e-9)

    def test_warns_below_design_shift(self, model0):
        with pytest.warns(UserWarning, match="theta1"):
            info_number(0.5, 0.0, 0.21, model0)


class TestSolveLambda:
    def test_idealized_model_is_exactly_one(self, model0):
        assert solve_lambda(0.0, 0.0, model0, QUAD) == 1.0

    @pytest.mark.parametrize("alpha", [0.0, 0.21, 0.51])
    def test_contaminated_roots_quadrature(self, model01, alpha):
        lam = solve_lambda(0.1, alpha, model01, QUAD)
        assert lam == pytest.approx(LAMBDA_EXACT[alpha], abs=2e-3)

    @pytest.mark.parametrize("alpha", [0.0, 0.21, 0.51])
    def test_monte_carlo_agrees_with_quadrature(self, model01, alpha):
        qc = QuadratureConfig.monte_carlo(1_000_000, seed=0)
        lam = solve_lambda(0.1, alpha, model01, qc)
        assert lam == pytest.approx(LAMBDA_EXACT[alpha], abs=0.02)

    def test_residual_on_validation_sample(self, model01):
        # the root found on one evaluation method closes the equation on another
        from lacusum import LocalParams, lalpha_increment
        lam = solve_lambda(0.1, 0.21, model01, QUAD)
        rng = np.random.default_rng(99)
        n = 2_000_000
        mask = rng.random(n) < 0.1
        x = np.where(mask, rng.normal(0, 3, n), rng.normal(0, 1, n))
        y = lalpha_increment(x, LocalParams(0.21, model01.nominal))
        resid = np.mean(np.exp(lam * y)) - 1.0
        se = np.std(np.exp(lam * y), ddof=1) / math.sqrt(n)
        assert abs(resid) < 4 * se


class TestMgfRootContract:
    """Existence contract: a positive root exists iff E[Y] < 0."""

    def brute_force_root(self, values, probs):
        lams = np.linspace(1e-4, 60.0, 600_001)
        phi = np.exp(np.outer(lams, values)) @ probs
        sign_change = np.nonzero(np.diff(np.sign(phi - 1.0)))[0]
        assert sign_change.size, "oracle found no root"
        return lams[sign_change[0]]

    def test_positive_mean_raises(self):
        with pytest.raises(NoPositiveRootError):
            solve_mgf_root(np.array([-1.0, 2.0]), np.array([0.5, 0.5]))

    def test_matches_brute_force_scan(self, rng):
        checked = 0
        while checked < 20:
            size = rng.integers(2, 6)
            values = np.sort(rng.uniform(-3, 3, size))
            if values.max() < 0.5 or values.min() >= 0:
                continue
            probs = rng.dirichlet(np.ones(size)) + 0.05
            probs /= probs.sum()
            if values @ probs >= -1e-2:
                continue
            root = solve_mgf_root(values, probs, tolerance=1e-10)
            oracle = self.brute_force_root(values, probs)
            assert root == pytest.approx(oracle, abs=2e-4)
            checked += 1

    def test_negative_only_values_have_no_root(self):
        # MGF strictly decreasing: never returns to 1
        with pytest.raises(NoPositiveRootError):
            solve_mgf_root(np.array([-2.0, -1.0]), np.array([0.5, 0.5]))


class TestEfficiency:
    def test_baseline_is_zero(self, model01):
        assert efficiency_improvement(0.1, 0.0, model01, QUAD) == 0.0

    def test_idealized_small_alpha_loss(self, model0):
        # about a 5% efficiency price at eps = 0
        e = efficiency_improvement(0.0, 0.21, model0, QUAD)
        assert e == pytest.approx(-0.057, abs=0.01)

    def test_idealized_decreasing_in_alpha(self, model0):
        es = [efficiency_improvement(0.0, a, model0, QUAD) for a in (0.1, 0.3, 0.5)]
        assert es[0] > es[1] > es[2]

    def test_contaminated_gain_positive(self, model01):
        assert efficiency_improvement(0.1, 0.21, model01, QUAD) > 0.5


class TestAlphaOracle:
    def test_idealized_oracle_is_zero(self, model0):
        # exact objective is strictly decreasing in alpha at eps = 0
        assert alpha_oracle(0.0, model0, alpha_max=1.0, step=0.05, qc=QUAD) == 0.0
        # Monte Carlo: the decrease dominates sampling noise at this step size
        qc = QuadratureConfig.monte_carlo(200_000, seed=1)
        assert alpha_oracle(0.0, model0, alpha_max=1.0, step=0.25, qc=qc) == 0.0

    def test_contaminated_oracle_location(self, model01):
        # deterministic quadrature: exact argmax of lambda*I is at 0.24
        a = alpha_oracle(0.1, model01, alpha_max=1.0, step=0.01, qc=QUAD)
        assert a == pytest.approx(0.24, abs=1e-12)

    def test_objective_unimodal(self, model01):
        rows = tuning_grid(0.1, model01, alpha_max=1.0, step=0.02, qc=QUAD)
        obj = np.array([r.objective for r in rows if r.objective is not None])
        peak = int(np.argmax(obj))
        assert 0 < peak < len(obj) - 1
        assert np.all(np.diff(obj[:peak + 1]) > 0)
        assert np.all(np.diff(obj[peak:]) < 0)

    def test_grid_rows_skip_rootless_points(self, fam):
        from lacusum import GrossErrorModel, OutlierSpec
        # point mass above the breakdown level: positive drift, no root anywhere
        model = GrossErrorModel(0.45, fam, OutlierSpec.point_mass_outlier(2.7))
        rows = tuning_grid(0.45, model, alpha_max=0.4, step=0.1, qc=QUAD)
        assert all(r.lambda_ is None for r in rows)
        with pytest.raises(Exception):
            alpha_oracle(0.45, model, alpha_max=0.4, step=0.1, qc=QUAD)


class TestDesignFormulas:
    @pytest.mark.parametrize("lam,want", [(1.0, 2.3026), (1.3681, 1.6831),
                                          (2.3777, 0.9684), (0.4572, 5.0363)])
    def test_simplified_d_reproduces_reference(self, lam, want):
        assert d_opt(lam, 100, 10, 5000.0, "simplified") == pytest.approx(want, abs=5e-5)

    def test_all_streams_affected_gives_zero(self):
        assert d_opt(1.3, 100, 100, 5000.0, "simplified") == 0.0

    def test_exact_mode_minimizes_delay_budget(self):
        lam, K, m, gamma = 1.3681, 100, 10, 5000.0
        d = d_opt(lam, K, m, gamma, "exact")
        here = delay_budget(lam, K, m, gamma, d)
        assert here <= delay_budget(lam, K, m, gamma, d + 0.01)
        assert here <= delay_budget(lam, K, m, gamma, max(d - 0.01, 0.0))

    def test_delay_budget_convex_on_grid(self):
        lam, K, m, gamma = 1.0, 100, 10, 5000.0
        ds = np.linspace(0.0, 8.0, 81)
        ell = np.array([delay_budget(lam, K, m, gamma, d) for d in ds])
        second_diff = ell[2:] - 2 * ell[1:-1] + ell[:-2]
        assert np.all(second_diff > -1e-9)

    def test_auto_mode_rule(self):
        # log(5000) = 8.5 <= K = 100: simplified; K = 5 < 8.5: exact
        assert d_opt(1.0, 100, 10, 5000.0) == d_opt(1.0, 100, 10, 5000.0, "simplified")
        assert d_opt(1.0, 5, 2, 5000.0) == d_opt(1.0, 5, 2, 5000.0, "exact")

    def test_b_gamma_reference_value(self):
        assert b_gamma(1.0, 100, 2.3026, 5000.0) == pytest.approx(39.8, abs=0.1)

    def test_b_gamma_limit_without_tail(self):
        # K e^{-lambda d} -> 0 leaves log(4 gamma) / lambda
        val = b_gamma(2.0, 100, 60.0, 5000.0)
        assert val == pytest.approx(math.log(4 * 5000.0) / 2.0, rel=1e-6)

    def test_b_gamma_monotonicity(self):
        assert b_gamma(1.0, 200, 1.0, 5000.0) > b_gamma(1.0, 100, 1.0, 5000.0)
        assert b_gamma(1.0, 100, 1.0, 9000.0) > b_gamma(1.0, 100, 1.0, 5000.0)
        assert b_gamma(1.0, 100, 2.0, 5000.0) < b_gamma(1.0, 100, 1.0, 5000.0)

    def test_arl_bound_inverse_consistency(self):
        b = b_gamma(1.0, 100, 2.3026, 5000.0)
        assert arl_lower_bound(1.0, b, 2.3026, 100) == pytest.approx(5000.0, rel=1e-6)

    def test_arl_bound_degenerate_tail(self):
        # huge d: bound approaches exp(lambda b) / 4
        val = arl_lower_bound(1.0, 10.0, 80.0, 100)
        assert val == pytest.approx(0.25 * math.exp(10.0), rel=1e-4)

    def test_arl_bound_inapplicable(self):
        # lambda b = K e^{-lambda d} exactly on the boundary
        assert arl_lower_bound(1.0, 100.0, 0.0, 100) is None
        assert arl_lower_bound(1.0, 50.0, 0.0, 100) is None

    def test_validation(self):
        with pytest.raises(ConfigError):
            d_opt(1.0, 10, 11, 5000.0)
        with pytest.raises(ConfigError):
            d_opt(1.0, 10, 5, 0.5)
        with pytest.raises(ConfigError):
            b_gamma(-1.0, 10, 1.0, 100.0)


class TestQuadratureConfig:
    def test_monte_carlo_minimum_samples(self):
        with pytest.raises(ConfigError):
            QuadratureConfig.monte_carlo(n_samples=10_000)

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            QuadratureConfig(method="simpson")


class TestTuningReport:
    def test_report_fields_consistent(self, model01):
        qc = QuadratureConfig.monte_carlo(200_000, seed=3)
        rep = tuning_report(0.1, model01, K=100, m=10, gamma=5000.0,
                            alpha_max=0.6, step=0.05, qc=qc)
        assert rep.lambda_ > 0
        assert rep.info > 0
        assert rep.d_mode == "simplified"
        assert rep.d_opt == pytest.approx(math.log(10.0) / rep.lambda_, rel=1e-9)
        assert rep.b_gamma > 0
        assert 0.1 <= rep.alpha_oracle <= 0.4
