import logging
import math

import numpy as np
import pytest

from dcg_evaluator.core.config import Settings
from dcg_evaluator.core.evaluator import GraphEvaluator
from dcg_evaluator.core.measures.measure import DiscreteMeasure, wasserstein1
from dcg_evaluator.core.measures.quantize import compress, quantize_source
from dcg_evaluator.core.measures.sources import gaussian
from dcg_evaluator.core.sde.euler_maruyama import (
    EmExperiment, ExperimentRecord, SdeSpec, build_em_graph, em_error_experiment, em_mean_recursion,
    em_propagate, em_theorem2_bound, fit_theorem2_constants, state_id, summarize_experiment,
)
from dcg_evaluator.core.utils.plotting import em_error_figure


def _synthetic_records(T: float = 1.0):
    records = []
    for N in (1, 100, 400, 900):
        for n in (4, 6, 8):
            w1 = 0.3 * math.exp(0.02 * math.sqrt(n * N * T)) / 2 ** n
            records.append(ExperimentRecord(N=N, n=n, seed=0, w1=w1, diam=1.0, support=2 ** n, runtime_ms=1.0))
    return records


class TestSdeSpec:
    def test_gbm_defaults(self):
        spec = SdeSpec.gbm(N=4)
        assert spec.y0 == 100.0
        assert spec.dt == 0.25
        assert spec.time(3) == 0.75

    @pytest.mark.parametrize("kwargs", [{"T": 0.0}, {"N": 0}, {"y0": math.inf}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SdeSpec.gbm(**kwargs)

    def test_with_steps(self):
        assert SdeSpec.gbm(N=1).with_steps(10).dt == 0.1

    def test_state_ids(self):
        assert state_id(0) == "y0"
        assert state_id(4) == "y_4"


class TestEmGraph:
    def test_fused_structure(self):
        g = build_em_graph(SdeSpec.gbm(N=3))
        assert g.terminal == "y_3"
        assert sorted(g.sources()) == ["xi_0", "xi_1", "xi_2", "y0"]
        assert g.nodes["y_2"].inputs == ("y_1", "xi_1")

    def test_unfused_structure(self):
        g = build_em_graph(SdeSpec.gbm(N=2), fused=False)
        assert g.nodes["noise_1"].inputs == ("xi_1", "y_1")
        assert g.nodes["y_2"].inputs == ("drift_1", "noise_1")

    def test_representations_agree(self):
        spec = SdeSpec.gbm(N=5)
        evaluator = GraphEvaluator()
        fused = evaluator.eval_cq(build_em_graph(spec), 4).measure
        unfused = evaluator.eval_cq(build_em_graph(spec, fused=False), 4).measure
        assert wasserstein1(fused, unfused) <= 1e-9


class TestPropagation:
    def test_no_drift_no_noise(self):
        spec = SdeSpec.constant(0.0, 0.0, y0=2.0, N=3)
        for measure in em_propagate(spec, 4):
            assert measure.atoms.tolist() == [2.0]
            assert measure.weights[0] == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_single_step_is_quantized_noise(self, n):
        spec = SdeSpec.constant(0.0, 1.0, y0=0.0, T=1.0, N=1)
        (measure,) = em_propagate(spec, n)
        noise, _ = quantize_source(gaussian(0.0, 1.0), n)
        assert measure.atoms == pytest.approx(noise.atoms, abs=1e-15)
        assert measure.weights == pytest.approx(noise.weights, abs=1e-15)

    def test_two_steps_match_manual_recursion(self):
        spec = SdeSpec.gbm(N=2)
        n = 3
        noise, _ = quantize_source(gaussian(0.0, 1.0), n)
        dt = spec.dt
        state = DiscreteMeasure.point_mass(spec.y0)
        for _ in range(spec.N):
            y = np.repeat(state.atoms, len(noise))
            xi = np.tile(noise.atoms, len(state))
            weights = np.repeat(state.weights, len(noise)) * np.tile(noise.weights, len(state))
            values = y + 0.05 * y * dt + 0.4 * y * math.sqrt(dt) * xi
            state = compress(DiscreteMeasure(values, weights), n)

        measures = em_propagate(spec, n)
        assert len(measures[-1]) == len(state)
        assert wasserstein1(measures[-1], state) <= 1e-10

    def test_means_follow_recursion(self):
        spec = SdeSpec.gbm(N=20)
        measures = em_propagate(spec, 6)
        for measure, expected in zip(measures, em_mean_recursion(spec)):
            assert measure.mean() == pytest.approx(expected, abs=1e-8)

    def test_support_is_capped(self):
        for measure in em_propagate(SdeSpec.gbm(N=10), 5):
            assert len(measure) <= 32

    def test_deterministic(self):
        spec = SdeSpec.gbm(N=6)
        first = em_propagate(spec, 5)
        second = em_propagate(spec, 5)
        assert all(a == b for a, b in zip(first, second))

    def test_level_must_be_positive(self):
        with pytest.raises(ValueError):
            em_propagate(SdeSpec.gbm(N=1), 0)

    def test_mean_recursion_needs_linear_drift(self):
        with pytest.raises(ValueError):
            em_mean_recursion(SdeSpec.constant(1.0, 1.0))


class TestGrowthBound:
    def test_zero_steps(self):
        assert em_theorem2_bound(SdeSpec.gbm(N=10), 5, 0, 2.0, 1.0) == 2.0 / 32

    def test_halves_per_level_without_growth(self):
        spec = SdeSpec.gbm(N=10)
        assert em_theorem2_bound(spec, 4, 10, 1.0, 0.0) == 2 * em_theorem2_bound(spec, 5, 10, 1.0, 0.0)

    def test_grows_with_steps(self):
        spec = SdeSpec.gbm(N=100)
        values = [em_theorem2_bound(spec, 6, k, 1.0, 0.5) for k in range(0, 101, 10)]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("c, c_prime", [(0.0, 1.0), (1.0, -0.1)])
    def test_invalid_constants(self, c, c_prime):
        with pytest.raises(ValueError):
            em_theorem2_bound(SdeSpec.gbm(N=1), 3, 1, c, c_prime)

    def test_fit_dominates_measurements(self):
        records = _synthetic_records()
        c, c_prime = fit_theorem2_constants(records, 1.0)
        assert c_prime == pytest.approx(0.02, rel=1e-6)
        for r in records:
            bound = em_theorem2_bound(SdeSpec.gbm(N=r.N), r.n, r.N, c, c_prime)
            assert bound >= r.w1 * (1 - 1e-12)

    def test_fit_without_positive_errors(self):
        records = [ExperimentRecord(N=1, n=3, seed=0, w1=0.0, diam=0.0, support=1, runtime_ms=0.1)]
        assert fit_theorem2_constants(records, 1.0) is None

    def test_summary_trends(self):
        summary = summarize_experiment(_synthetic_records())
        for trend in summary.by_n.values():
            assert trend.increasing
            assert trend.r_squared > 0.99
        assert summary.by_N[1].slope == pytest.approx(-1.0, abs=0.05)
        assert all(trend.slope < 0 for trend in summary.by_N.values())


class TestExperiment:
    def test_point_process_has_zero_error(self, caplog):
        spec = SdeSpec.constant(0.0, 0.0, y0=1.0)
        with caplog.at_level(logging.WARNING, logger="dcg_evaluator"):
            records = em_error_experiment(spec, n_values=[2, 3], N_values=[1, 3], ref_samples=1000, seed=1)
        assert len(records) == 4
        assert all(r.w1 == 0.0 for r in records)
        assert all(math.isnan(r.bound_fit) for r in records)
        assert "ref_samples" in caplog.text

    def test_gbm_grid(self):
        spec = SdeSpec.gbm()
        records = EmExperiment(spec).run([3, 5], [1, 4], ref_samples=20_000, seed=3)
        assert [(r.N, r.n) for r in records] == [(1, 3), (1, 5), (4, 3), (4, 5)]
        for r in records:
            assert r.w1 > 0
            assert r.bound_fit >= r.w1 * (1 - 1e-12)
            assert r.support <= 2 ** r.n
            assert r.diam > 0

    def test_reference_is_reproducible(self):
        experiment = EmExperiment(SdeSpec.gbm())
        assert experiment.reference(3, 5000, 7) == experiment.reference(3, 5000, 7)

    def test_threads_keep_grid_order_and_values(self):
        spec = SdeSpec.gbm()
        serial = EmExperiment(spec, Settings(threads=1)).run([2, 4], [1, 3, 6], ref_samples=5000, seed=11)
        pooled = EmExperiment(spec, Settings(threads=3)).run([2, 4], [1, 3, 6], ref_samples=5000, seed=11)
        assert [(r.N, r.n) for r in pooled] == [(N, n) for N in (1, 3, 6) for n in (2, 4)]
        assert [r.w1 for r in pooled] == [r.w1 for r in serial]
        assert [r.support for r in pooled] == [r.support for r in serial]

    def test_figure(self):
        svg = em_error_figure(_synthetic_records())
        assert svg.lstrip().startswith("<svg")
        assert "n=4" in svg
        assert "N=900" in svg
        assert svg.count("<polyline") == 7

    @pytest.mark.slow
    def test_error_grows_with_steps(self):
        spec = SdeSpec.gbm()
        records = em_error_experiment(spec, n_values=[10], N_values=[1, 100, 200, 400, 800, 1500],
                                      ref_samples=10 ** 6, seed=0)
        trend = summarize_experiment(records).by_n[10]
        assert trend.increasing
        assert trend.r_squared >= 0.9

    @pytest.mark.slow
    def test_error_halves_per_level(self):
        spec = SdeSpec.gbm()
        records = em_error_experiment(spec, n_values=list(range(5, 12)), N_values=[500],
                                      ref_samples=10 ** 6, seed=0)
        trend = summarize_experiment(records).by_N[500]
        assert trend.slope == pytest.approx(-1.0, abs=0.3)
