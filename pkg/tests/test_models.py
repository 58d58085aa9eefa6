"""Model layer: densities, mixtures, sampling."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from lacusum import (
    ChangeScenario,
    ConfigError,
    GrossErrorModel,
    MixtureStreamSampler,
    NoDensityError,
    NominalFamily,
    OutlierSpec,
    mixture_pdf,
    nominal_pdf,
    sample_matrix,
)


class TestNominalFamily:
    def test_validation(self):
        with pytest.raises(ConfigError):
            NominalFamily(0.0, 1.0, sigma=0.0)
        with pytest.raises(ConfigError):
            NominalFamily(1.0, 1.0)
        with pytest.raises(ConfigError):
            NominalFamily(2.0, 1.0)

    def test_pdf_standard_normal_peak(self, fam):
        assert nominal_pdf(0.0, 0.0, fam) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-12)
        assert nominal_pdf(0.0, 0.0, fam) == pytest.approx(0.3989422804, abs=1e-9)

    def test_pdf_location_shift(self, fam):
        assert nominal_pdf(1.0, 1.0, fam) == pytest.approx(nominal_pdf(0.0, 0.0, fam), abs=1e-15)

    def test_pdf_symmetry_about_midpoint(self, fam):
        assert nominal_pdf(0.5, 0.0, fam) == pytest.approx(nominal_pdf(0.5, 1.0, fam), abs=1e-15)

    def test_pdf_vectorized(self, fam):
        x = np.linspace(-3, 3, 7)
        vals = nominal_pdf(x, 0.0, fam)
        assert vals.shape == (7,)
        assert np.all(vals > 0)


class TestOutlierSpec:
    def test_gaussian_validation(self):
        with pytest.raises(ConfigError):
            OutlierSpec.gaussian_outlier(0.0, sd=-1.0)

    def test_point_mass_has_no_density(self):
        pm = OutlierSpec.point_mass_outlier(2.0)
        with pytest.raises(NoDensityError):
            pm.pdf(0.0)
        assert pm.expectation() == 2.0
        rng = np.random.default_rng(0)
        assert np.all(pm.sample(rng, (3, 4)) == 2.0)

    def test_table_must_integrate_to_one(self):
        x = np.linspace(0, 1, 11)
        with pytest.raises(ConfigError):
            OutlierSpec.table_outlier(x, np.full(11, 2.0))

    def test_table_pdf_and_moments(self):
        # symmetric triangle on [-1, 1]: density 1 - |x|
        x = np.linspace(-1, 1, 2001)
        spec = OutlierSpec.table_outlier(x, 1.0 - np.abs(x))
        assert spec.pdf(0.0) == pytest.approx(1.0, abs=1e-3)
        assert spec.pdf(2.0) == 0.0
        assert spec.expectation() == pytest.approx(0.0, abs=1e-12)

    def test_table_sampling_matches_cdf(self):
        x = np.linspace(-1, 1, 2001)
        spec = OutlierSpec.table_outlier(x, 1.0 - np.abs(x))
        rng = np.random.default_rng(7)
        draws = spec.sample(rng, 20_000)
        assert np.all((draws >= -1) & (draws <= 1))

        def cdf(v):
            v = np.clip(v, -1, 1)
            return np.where(v < 0, 0.5 * (1 + v) ** 2, 1 - 0.5 * (1 - v) ** 2)

        ks = stats.kstest(draws, cdf).statistic
        assert ks < 1.63 / math.sqrt(draws.size)  # 1% critical value


class TestMixturePdf:
    def test_no_contamination_equals_nominal(self, fam, model0):
        x = np.linspace(-4, 4, 17)
        np.testing.assert_array_equal(mixture_pdf(x, 0.3, model0),
                                      nominal_pdf(x, 0.3, fam))

    def test_known_value(self, model01):
        # 0.9 * phi(0) + 0.1 * phi(0; sd 3): 0.9/sqrt(2pi) + 0.1/(3 sqrt(2pi))
        want = 0.9 / math.sqrt(2 * math.pi) + 0.1 / (3 * math.sqrt(2 * math.pi))
        assert mixture_pdf(0.0, 0.0, model01) == pytest.approx(want, abs=1e-14)
        assert mixture_pdf(0.0, 0.0, model01) == pytest.approx(0.37235, abs=5e-6)

    def test_heavy_contamination_approaches_outlier(self, fam):
        outlier = OutlierSpec.gaussian_outlier(0.0, 3.0)
        model = GrossErrorModel(1.0 - 1e-9, fam, outlier)
        assert mixture_pdf(0.0, 0.0, model) == pytest.approx(outlier.pdf(0.0), rel=1e-6)

    def test_point_mass_mixture_rejected(self, fam):
        model = GrossErrorModel(0.1, fam, OutlierSpec.point_mass_outlier(1.0))
        with pytest.raises(NoDensityError):
            mixture_pdf(0.0, 0.0, model)

    @pytest.mark.parametrize("eps,theta", [(0.0, 0.0), (0.1, 0.0), (0.3, 1.5)])
    def test_integrates_to_one(self, fam, eps, theta, model01):
        model = model01.with_epsilon(eps)
        span = 12 * (fam.sigma + model.outlier.sd)
        total, _ = integrate.quad(lambda x: mixture_pdf(x, theta, model),
                                  theta - span, theta + span, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestChangeScenario:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ChangeScenario(K=0, m=1, nu=1, theta_post=1.0)
        with pytest.raises(ConfigError):
            ChangeScenario(K=10, m=11, nu=1, theta_post=1.0)
        with pytest.raises(ConfigError):
            ChangeScenario(K=10, m=1, nu=0, theta_post=1.0)

    def test_theta_post_below_theta1_rejected(self, fam, model01):
        scenario = ChangeScenario(K=2, m=1, nu=1, theta_post=0.5)
        with pytest.raises(ConfigError):
            sample_matrix(model01, scenario, 10, seed=0)


class TestSampleMatrix:
    def test_deterministic(self, model01):
        scenario = ChangeScenario(K=5, m=2, nu=3, theta_post=1.0)
        a = sample_matrix(model01, scenario, 20, seed=123)
        b = sample_matrix(model01, scenario, 20, seed=123)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (5, 20)

    def test_law_of_large_numbers_no_change(self, model01):
        scenario = ChangeScenario.no_change(K=1)
        horizon = 200_000
        x = sample_matrix(model01, scenario, horizon, seed=5)
        # mean = (1 - eps) * theta0 + eps * E_g[X] = 0; sd of mixture = sqrt(1.8)
        tol = 3 * math.sqrt(1.8) / math.sqrt(horizon)
        assert abs(x.mean()) < tol

    def test_mixture_variance(self, model01):
        # Var = 0.9 * 1 + 0.1 * 9 = 1.8 for centered components
        x = sample_matrix(model01, ChangeScenario.no_change(K=1), 1_000_000, seed=11)
        assert x.var() == pytest.approx(1.8, abs=0.01)

    def test_post_change_distribution_ks(self, model0):
        # nu=1, m=K, eps=0: every entry is N(theta_post, 1)
        scenario = ChangeScenario(K=10, m=10, nu=1, theta_post=2.0)
        x = sample_matrix(model0, scenario, 1000, seed=9).ravel()
        ks = stats.kstest(x, stats.norm(loc=2.0, scale=1.0).cdf).statistic
        assert ks < 1.63 / math.sqrt(x.size)  # 1% critical value

    def test_change_time_respected(self, model0):
        scenario = ChangeScenario(K=3, m=2, nu=50, theta_post=25.0)
        x = sample_matrix(model0, scenario, 80, seed=3)
        assert np.all(x[:, :49] < 15)           # pre-change block
        assert np.all(x[:2, 49:] > 15)          # affected streams after nu
        assert np.all(x[2, :] < 15)             # unaffected stream throughout

    def test_point_mass_outlier_sampling_allowed(self, fam):
        model = GrossErrorModel(0.5, fam, OutlierSpec.point_mass_outlier(40.0))
        x = sample_matrix(model, ChangeScenario.no_change(K=1), 10_000, seed=2)
        frac = np.mean(x == 40.0)
        assert frac == pytest.approx(0.5, abs=0.02)


class TestMixtureStreamSampler:
    def test_blocks_agree_with_full_draw(self, model01):
        # drawing in two blocks from one generator must continue the stream
        scenario = ChangeScenario(K=4, m=1, nu=30, theta_post=1.0)
        sampler = MixtureStreamSampler(model01, scenario)
        rng = np.random.default_rng(17)
        first = sampler.draw(rng, 0, 25)
        second = sampler.draw(rng, 25, 25)
        assert first.shape == second.shape == (4, 25)

    def test_change_offset_in_blocks(self, model0):
        scenario = ChangeScenario(K=2, m=2, nu=11, theta_post=30.0)
        sampler = MixtureStreamSampler(model0, scenario)
        block = sampler.draw(np.random.default_rng(1), 5, 10)  # times 6..15
        assert np.all(block[:, :5] < 15)   # times 6..10 pre-change
        assert np.all(block[:, 5:] > 15)   # times 11..15 post-change
