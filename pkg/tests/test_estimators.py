import numpy as np
import pytest
from sklearn.base import clone

from lgptail.estimators import PeaksOverThreshold, SemiparametricTailDensity
from lgptail.gpd import sample_gpd


@pytest.fixture(scope="module")
def y():
    return sample_gpd((2.0, 1.0), 500, np.random.default_rng(12))


@pytest.fixture(scope="module")
def fitted(y, tmp_path_factory):
    cache = tmp_path_factory.mktemp("lg")
    return SemiparametricTailDensity(n_iter=4000, burn_in=1000, random_state=0, lambda_grid_cache=cache).fit(y)


class TestSemiparametric:
    def test_params_and_clone(self):
        est = SemiparametricTailDensity(n_knots=7, random_state=3)
        params = est.get_params()
        assert params["n_knots"] == 7 and params["grid_size"] == 101
        assert clone(est).get_params() == params

    def test_fit_attributes(self, fitted):
        assert fitted.xi_.lower95 <= fitted.xi_.estimate <= fitted.xi_.upper95
        assert len(fitted.draws_) == (4000 - 1000) // 10
        assert fitted.n_features_in_ == 1

    def test_deterministic(self, y, fitted):
        again = clone(fitted).fit(y)
        np.testing.assert_array_equal(again.draws_.samples, fitted.draws_.samples)

    def test_column_input(self, y, fitted):
        np.testing.assert_allclose(fitted.score_samples(y[:5, None]), fitted.score_samples(y[:5]))

    def test_predict_and_score(self, fitted):
        x = np.array([0.1, 1.0, 10.0])
        np.testing.assert_allclose(np.log(fitted.predict(x)), fitted.score_samples(x))
        assert fitted.score(x) == pytest.approx(fitted.score_samples(x).sum())

    def test_transform_is_cdf(self, fitted):
        F = fitted.transform(np.array([-1.0, 0.0, 1.0, 10.0, 1e6]))
        assert F[0] == 0.0 and F[1] == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.diff(F) >= 0) and F[-1] == pytest.approx(1.0, abs=1e-4)

    def test_tail_quantiles(self, fitted):
        reps = fitted.tail_quantiles([1e-2, 1e-3])
        assert reps[0].estimate < reps[1].estimate
        assert fitted.return_period(reps[0].estimate, records_per_year=1.0).estimate == pytest.approx(100, rel=0.2)

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            SemiparametricTailDensity().score_samples([1.0])

    @pytest.mark.parametrize("X", [np.ones((5, 2)), [1.0, np.nan], [[1.0, 2.0]]])
    def test_invalid_input(self, X):
        with pytest.raises(ValueError):
            SemiparametricTailDensity(n_iter=200).fit(X)

    def test_invalid_grid(self, y):
        with pytest.raises(ValueError):
            SemiparametricTailDensity(grid_size=11, n_knots=11, n_iter=200).fit(y)


class TestPot:
    def test_fit(self, y):
        est = PeaksOverThreshold(threshold=0.5, n_iter=3000, burn_in=500, random_state=1).fit(y)
        assert est.fit_.k == int(np.sum(y > 0.5))
        q = est.tail_quantiles([1e-2, 1e-3])
        assert q[0].estimate < q[1].estimate
        assert clone(est).get_params()["threshold"] == 0.5

    def test_too_few(self, y):
        with pytest.raises(ValueError):
            PeaksOverThreshold(threshold=y.max()).fit(y)
