import numpy as np
import pytest

from lgptail.gpd import gpd_isf, sample_gpd
from lgptail.model import ChainState, SemiparametricModel
from lgptail.priors import alpha_untransform
from lgptail.summaries import (
    DEFAULT_PROBS,
    Interval,
    density,
    density_curve,
    quantile_report,
    return_period,
    summarize,
    survival,
    tail_quantile,
    tail_quantile_draws,
    xi_summary,
)


@pytest.fixture(scope="module")
def model(lambda_grid):
    return SemiparametricModel(sample_gpd((2.0, 1.0), 200, np.random.default_rng(8)), lambda_grid=lambda_grid)


@pytest.fixture(scope="module")
def draws(model):
    rng = np.random.default_rng(4)
    out = np.zeros((40, 13))
    out[:, 0] = rng.normal(scale=0.5, size=40)
    out[:, 1] = rng.normal(scale=0.3, size=40)
    out[:, 2:] = rng.normal(scale=0.8, size=(40, 11))
    return out


def flat(alpha=2.0, sigma=1.0):
    return ChainState(float(alpha_untransform(alpha)), float(np.log(sigma)), np.zeros(11)).to_vector()


class TestTailQuantile:
    def test_flat_field_example(self, model):
        assert tail_quantile(model, flat(), 0.25) == pytest.approx(2.0, rel=1e-12)

    def test_flat_field_matches_gpd(self, model):
        p = np.array(DEFAULT_PROBS)
        np.testing.assert_allclose(tail_quantile(model, flat(3.0, 0.7), p), gpd_isf((3.0, 0.7), p), rtol=1e-9)

    def test_monotone(self, model, draws):
        Q = tail_quantile_draws(model, draws, DEFAULT_PROBS)
        assert np.all(np.diff(Q, axis=1) > 0)

    def test_survival_roundtrip(self, model, draws):
        for row in draws:
            for p in DEFAULT_PROBS:
                assert abs(float(survival(model, row, tail_quantile(model, row, p))) - p) < 1e-8

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1e-13])
    def test_domain(self, model, p):
        with pytest.raises(ValueError):
            tail_quantile(model, flat(), p)

    def test_support_shift(self, lambda_grid):
        from lgptail.model import Dataset

        m = SemiparametricModel(Dataset([1.0, 2.0], support_shift=5.0), lambda_grid=lambda_grid)
        assert tail_quantile(m, flat(), 0.25) == pytest.approx(7.0, rel=1e-12)

    def test_inclusion_fraction(self, model, draws):
        a = tail_quantile_draws(model, draws[:3], [1e-3], inclusion_fraction=0.5)
        b = tail_quantile_draws(model, draws[:3], [2e-3])
        np.testing.assert_array_equal(a, b)
        with pytest.raises(ValueError):
            tail_quantile_draws(model, draws[:3], [0.6], inclusion_fraction=0.5)


class TestSummaries:
    def test_constant_draws(self, model):
        rows = np.tile(flat(), (10, 1))
        s = xi_summary(model, rows)
        assert s.lower95 == s.upper95 == s.estimate == pytest.approx(0.5)
        for rep in quantile_report(model, rows):
            assert rep.lower95 == rep.estimate == rep.upper95

    def test_report_ordering(self, model, draws):
        reps = quantile_report(model, draws)
        assert all(r.lower95 <= r.estimate <= r.upper95 for r in reps)
        assert all(a.estimate < b.estimate for a, b in zip(reps, reps[1:]))

    def test_summarize_median_vs_mean(self):
        s = summarize([1.0, 2.0, 10.0])
        assert s.estimate == 2.0 and s.mean == pytest.approx(13 / 3)
        assert summarize([1.0, 2.0, 10.0], point="mean").estimate == pytest.approx(13 / 3)
        with pytest.raises(ValueError):
            summarize([])

    def test_coverage_recount(self, model):
        # hand recount over five replicates: intervals containing the truth 0.5
        intervals = [(0.4, 0.6), (0.55, 0.7), (0.3, 0.5), (0.1, 0.49), (0.45, 0.52)]
        hand = 3
        counted = sum(Interval(0.5, lo, hi, 0.5, 0.5).contains(0.5) for lo, hi in intervals)
        assert counted == hand

    def test_density_curve(self, model, draws):
        y = np.linspace(0, 10, 50)
        curve = density_curve(model, draws, y)
        assert np.all(curve["lower95"] <= curve["mean"] + 1e-12)
        assert np.all(curve["mean"] <= curve["upper95"] + 1e-12)
        assert density(model, flat(), np.array([2.0]))[0] == pytest.approx(0.125, rel=1e-12)

    def test_density_integrates(self, model, draws):
        y = np.concatenate([np.linspace(0, 50, 200_001), np.geomspace(50.0001, 1e8, 200_001)])
        assert np.trapezoid(density(model, draws[0], y), y) == pytest.approx(1.0, abs=2e-3)


class TestReturnPeriod:
    def test_formula(self, model):
        rows = np.tile(flat(), (5, 1))
        rp = return_period(model, rows, 2.0, records_per_year=100.0, inclusion_fraction=0.5)
        assert rp.estimate == pytest.approx(1 / (100 * 0.5 * 0.25), rel=1e-12)

    def test_domain(self, model):
        with pytest.raises(ValueError):
            return_period(model, flat(), 0.0)
        with pytest.raises(ValueError):
            return_period(model, flat(), 1.0, inclusion_fraction=0.0)

    def test_whole_mass(self, lambda_grid):
        from lgptail.model import Dataset

        # a level at the support bound has F_bar = 1
        m = SemiparametricModel(Dataset([1.0, 2.0], support_shift=1.0), lambda_grid=lambda_grid)
        assert float(survival(m, flat(), 1.0)) == 1.0
