import csv
import json
import math

import numpy as np
import pytest
from scipy import stats

from lgptail.gpd import gpd_isf
from lgptail.simstudy import (
    ExperimentSpec,
    MetricsRow,
    ReplicateResult,
    aggregate,
    replicate_data,
    run_experiment,
    true_tail_quantile,
    write_manifest,
    write_table,
)


class TestTrueTailQuantile:
    def test_gpd(self):
        assert true_tail_quantile("gpd", 2.0, 0.25) == pytest.approx(2.0, rel=1e-14)

    def test_gpd4(self):
        p = np.array([1e-2, 1e-4])
        np.testing.assert_allclose(true_tail_quantile("gpd4", 3.0, p), gpd_isf((3.0, 1.0), 1 - (1 - p) ** 0.25),
                                   rtol=1e-10)

    def test_halft_cauchy_median(self):
        assert true_tail_quantile("halft", 1.0, 0.5) == pytest.approx(1.0, abs=1e-10)

    def test_halft_numeric_inversion(self):
        q = true_tail_quantile("halft", 5.0, 1e-3)
        assert 2 * stats.t.sf(q, 5.0) == pytest.approx(1e-3, rel=1e-10)


class TestSpec:
    @pytest.mark.parametrize("kw", [{"replicates": 0}, {"xi_true": 0.0}, {"method": "mle"}, {"family": "normal"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentSpec(**kw)

    def test_roundtrip_dict(self):
        d = ExperimentSpec(xi_true=0.2).to_dict()
        assert d["xi_true"] == 0.2 and d["probs"] == [1e-2, 1e-3, 1e-4, 1e-5]

    def test_arms_share_data(self):
        a = replicate_data(ExperimentSpec(method="semi", seed=5), 3)
        b = replicate_data(ExperimentSpec(method="thresh", seed=5), 3)
        np.testing.assert_array_equal(a, b)


def fake(index, xi, lo, hi, q=(1.0, 2.0), error=None):
    return ReplicateResult(index, xi, lo, hi, list(q), [v - 0.5 for v in q], [v + 0.5 for v in q], error=error)


class TestAggregate:
    def test_manual_recount(self):
        spec = ExperimentSpec(xi_true=0.5, replicates=5, probs=(0.25,))
        truth = true_tail_quantile("gpd", 2.0, 0.25)
        results = [fake(0, 0.45, 0.3, 0.6, (2.0,)), fake(1, 0.7, 0.55, 0.9, (2.6,)), fake(2, 0.5, 0.4, 0.6, (1.0,)),
                   fake(3, 0.3, 0.1, 0.49, (3.0,)), fake(4, 0.55, 0.45, 0.65, (2.2,))]
        row = aggregate(spec, results)
        err = np.array([-0.05, 0.2, 0.0, -0.2, 0.05])
        assert row.bias == pytest.approx(err.mean())
        assert row.rmse == pytest.approx(np.sqrt(np.mean(err**2)))
        assert row.coverage == pytest.approx(60.0)
        assert row.rmae[0] == pytest.approx(np.mean(np.abs(np.array([2.0, 2.6, 1.0, 3.0, 2.2]) - truth) / truth))
        assert row.q_coverage[0] == pytest.approx(40.0)
        assert row.valid and row.n_ok == 5

    def test_order_independent(self):
        spec = ExperimentSpec(replicates=3, probs=(0.25,))
        rs = [fake(i, 0.4 + 0.1 * i, 0.3, 0.7, (2.0,)) for i in range(3)]
        assert aggregate(spec, rs) == aggregate(spec, rs[::-1])

    def test_failure_threshold(self):
        spec = ExperimentSpec(replicates=10, probs=(0.25,))
        ok = [fake(i, 0.5, 0.4, 0.6, (2.0,)) for i in range(9)]
        one_bad = ok + [fake(9, math.nan, math.nan, math.nan, (), error="ValueError")]
        assert aggregate(spec, one_bad).valid
        two_bad = ok[:8] + [fake(i, math.nan, math.nan, math.nan, (), error="x") for i in (8, 9)]
        row = aggregate(spec, two_bad)
        assert not row.valid and row.n_failed == 2

    def test_all_failed(self):
        spec = ExperimentSpec(replicates=2, probs=(0.25,))
        row = aggregate(spec, [fake(i, math.nan, math.nan, math.nan, (), error="x") for i in range(2)])
        assert not row.valid and math.isnan(row.bias)


@pytest.fixture(scope="module")
def tiny():
    return ExperimentSpec(xi_true=0.5, n=300, replicates=2, n_iter=1500, thin=5, seed=7, method="thresh")


class TestRunExperiment:
    def test_deterministic(self, tiny):
        assert run_experiment(tiny) == run_experiment(tiny)

    def test_row_invariants(self, tiny):
        row, reps = run_experiment(tiny, return_replicates=True)
        assert isinstance(row, MetricsRow) and len(reps) == 2
        assert 0 <= row.coverage <= 100
        assert row.rmse >= abs(row.bias)

    def test_semi_arm_runs(self):
        spec = ExperimentSpec(xi_true=0.5, n=200, replicates=1, n_iter=1200, thin=5, seed=1)
        row, reps = run_experiment(spec, return_replicates=True)
        assert row.valid and reps[0].clamped == 0

    def test_outputs(self, tiny, tmp_path):
        row = run_experiment(tiny)
        write_table([row], tiny.probs, tmp_path / "t.csv")
        recs = list(csv.DictReader(open(tmp_path / "t.csv")))
        assert recs[0]["method"] == "thresh" and "rmae_0.0001" in recs[0]
        write_manifest([tiny], tmp_path / "m.json", {"note": 1})
        man = json.loads((tmp_path / "m.json").read_text())
        assert man["specs"][0]["seed"] == 7 and man["note"] == 1
