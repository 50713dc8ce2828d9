from itertools import product

import numpy as np
import pytest
from scipy import stats

from dcg_evaluator.core.config import Settings
from dcg_evaluator.core.errors import AtomCapExceeded, SourceError
from dcg_evaluator.core.evaluator import GraphEvaluator, eval_cq, eval_exact_joint, eval_mc
from dcg_evaluator.core.graph import (
    CompGraph, NodeOp, build_bubble_sort_graph, build_chain_graph, build_sum_of_three_graph, random_dag,
)
from dcg_evaluator.core.graph.builders import random_discrete_measure
from dcg_evaluator.core.measures.measure import DiscreteMeasure, quantile_coupling_distance, wasserstein1
from dcg_evaluator.core.measures.quantize import compress
from dcg_evaluator.core.measures.sources import discrete, gaussian, point, uniform
from dcg_evaluator.core.utils.calculator import BoundCalculator
from conftest import uniform_grid


def _coin():
    return discrete(DiscreteMeasure([0.0, 1.0], [0.5, 0.5]))


def _pair_graph(op: NodeOp, left, right) -> CompGraph:
    g = CompGraph(terminal="v")
    g.add_source("a", left)
    g.add_source("b", right)
    g.add_op("v", op, ["a", "b"])
    return g


def _triangular_quantile(u: np.ndarray) -> np.ndarray:
    return np.where(u <= 0.5, np.sqrt(2 * u), 2 - np.sqrt(2 * (1 - u)))


def _w1_to_triangular(samples: np.ndarray) -> float:
    size = samples.size
    return quantile_coupling_distance(samples, _triangular_quantile((np.arange(size) + 0.5) / size))


class TestExact:
    def test_identity_on_point(self):
        g = build_chain_graph(point(3.0), [NodeOp.affine()])
        assert eval_exact_joint(g).measure == DiscreteMeasure.point_mass(3.0)

    def test_sum_of_coins(self):
        result = eval_exact_joint(_pair_graph(NodeOp.add(), _coin(), _coin())).measure
        assert result.atoms.tolist() == [0.0, 1.0, 2.0]
        assert result.weights.tolist() == [0.25, 0.5, 0.25]

    def test_same_source_twice_is_independent(self):
        g = build_sum_of_three_graph([_coin()] * 3)
        result = eval_exact_joint(g).measure
        assert result.weights == pytest.approx([1 / 8, 3 / 8, 3 / 8, 1 / 8])

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_bubble_sort_order_statistics(self, k):
        values = [1.0, 2.0, 3.0, 4.0]
        g = build_bubble_sort_graph([discrete(DiscreteMeasure.uniform_on(values))] * 3, k)
        result = eval_exact_joint(g).measure
        expected = DiscreteMeasure.uniform_on([sorted(t)[k - 1] for t in product(values, repeat=3)])
        assert result.atoms.tolist() == expected.atoms.tolist()
        assert result.weights == pytest.approx(expected.weights, abs=1e-15)

    def test_bubble_sort_two_sources(self):
        g = build_bubble_sort_graph([_coin(), _coin()], 1)
        assert len(g) == 3
        assert eval_exact_joint(g).measure == DiscreteMeasure([0.0, 1.0], [0.75, 0.25])

    def test_continuous_source_needs_level(self):
        g = build_chain_graph(gaussian(0.0, 1.0), [NodeOp.affine()])
        with pytest.raises(SourceError):
            eval_exact_joint(g)

    def test_quantized_sources(self):
        g = build_chain_graph(gaussian(0.0, 1.0), [NodeOp.affine(2.0)])
        result = eval_exact_joint(g, quantize_sources_at=1).measure
        c = 2 * np.sqrt(2 / np.pi)
        assert result.atoms == pytest.approx([-c, c])

    def test_atom_cap(self):
        source = discrete(uniform_grid(3))
        g = build_sum_of_three_graph([source] * 3)
        with pytest.raises(AtomCapExceeded):
            GraphEvaluator(Settings(atom_cap=100)).eval_exact_joint(g)

    def test_marginals(self):
        g = build_sum_of_three_graph([_coin()] * 3, fused=False)
        result = eval_exact_joint(g, marginals=["partial"])
        assert result.marginals["partial"].weights.tolist() == [0.25, 0.5, 0.25]


class TestCompressedQuantized:
    def test_chain(self, uniform8):
        g = build_chain_graph(discrete(uniform8), [NodeOp.affine(2.0)])
        assert eval_cq(g, 1).measure == DiscreteMeasure([5.0, 13.0], [0.5, 0.5])

    def test_sum_of_coins_is_compressed(self):
        result = eval_cq(_pair_graph(NodeOp.add(), _coin(), _coin()), 1)
        assert result.measure.atoms == pytest.approx([0.0, 4 / 3])
        assert result.measure.weights == pytest.approx([0.25, 0.75])
        assert result.node_stats["v"].compressed
        assert result.node_stats["v"].support_before == 3
        assert result.node_stats["v"].support_after == 2

    def test_single_op_equals_compressed_exact(self, rng):
        for _ in range(20):
            a = discrete(random_discrete_measure(rng, 16))
            b = discrete(random_discrete_measure(rng, 16))
            g = _pair_graph(NodeOp.maximum(), a, b)
            exact = eval_exact_joint(g, quantize_sources_at=3).measure
            expected = compress(exact, 3)
            result = eval_cq(g, 3).measure
            assert len(result) == len(expected)
            assert wasserstein1(result, expected) <= 1e-10

    def test_terminal_support_is_capped(self, rng):
        for _ in range(30):
            g = random_dag(rng, max_atoms=32)
            n = int(rng.integers(1, 6))
            assert len(eval_cq(g, n).measure) <= 2 ** n

    def test_matches_exact_without_compression(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            g = random_dag(rng, max_atoms=32)
            exact = eval_exact_joint(g).measure
            assert wasserstein1(exact, eval_cq(g, 20).measure) <= 1e-9

    def test_chain_keeps_every_atom(self, rng):
        mu = random_discrete_measure(rng, 64)
        ops = [NodeOp.affine(-1.0, 0.5), NodeOp.affine(2.0), NodeOp.affine(-0.5, 3.0)]
        g = build_chain_graph(discrete(mu), ops)
        result = eval_cq(g, 10)
        exact = eval_exact_joint(g).measure
        assert len(result.measure) == len(exact) == len(mu)
        assert wasserstein1(result.measure, exact) <= 1e-12
        assert all(s.support_before == len(mu) and not s.compressed for s in result.node_stats.values())
        assert np.all(np.diff(result.measure.atoms) > 0)

    def test_compression_only_at_cut_vertices(self):
        sources = [discrete(uniform_grid(3))] * 3
        result = eval_cq(build_sum_of_three_graph(sources, fused=False), 2)
        assert result.node_stats["partial"].compressed
        assert result.node_stats["sum"].compressed
        diamond = CompGraph(terminal="d")
        diamond.add_source("s", sources[0])
        diamond.add_op("a", NodeOp.affine(1.0), ["s"])
        diamond.add_op("b", NodeOp.affine(1.0, 0.5), ["a"])
        diamond.add_op("c", NodeOp.affine(-1.0), ["a"])
        diamond.add_op("d", NodeOp.add(), ["b", "c"])
        node_stats = eval_cq(diamond, 1).node_stats
        assert not node_stats["b"].compressed
        assert node_stats["d"].support_before == 1

    def test_atom_cap_names_node(self):
        source = discrete(uniform_grid(3))
        g = build_sum_of_three_graph([source] * 3)
        with pytest.raises(AtomCapExceeded) as info:
            GraphEvaluator(Settings(atom_cap=100)).eval_cq(g, 5)
        assert info.value.node == "sum"
        assert "--atom-cap" in str(info.value)

    def test_negative_level(self, uniform8):
        with pytest.raises(ValueError):
            eval_cq(build_chain_graph(discrete(uniform8), [NodeOp.affine()]), -1)

    def test_error_bound_dominates(self):
        rng = np.random.default_rng(29)
        calculator = BoundCalculator()
        for i in range(100):
            g = random_dag(rng, max_atoms=64)
            n = 1 + i % 5
            exact = eval_exact_joint(g).measure
            error = wasserstein1(exact, eval_cq(g, n).measure)
            assert error <= calculator.theorem1_bound(g, n).total + 1e-9

    def test_quantization_bound_dominates(self):
        rng = np.random.default_rng(31)
        calculator = BoundCalculator()
        for i in range(100):
            g = random_dag(rng, max_atoms=64)
            n = 1 + i % 5
            exact = eval_exact_joint(g).measure
            quantized = eval_exact_joint(g, quantize_sources_at=n).measure
            assert wasserstein1(exact, quantized) <= calculator.quantization_bound(g, n) + 1e-9

    def test_compression_bound_on_staged_graph(self):
        rng = np.random.default_rng(37)
        calculator = BoundCalculator()
        for _ in range(50):
            sources = [discrete(random_discrete_measure(rng, 64)) for _ in range(3)]
            g = build_sum_of_three_graph(sources, fused=False)
            n = int(rng.integers(1, 5))
            quantized = eval_exact_joint(g, quantize_sources_at=n).measure
            error = wasserstein1(quantized, eval_cq(g, n).measure)
            assert error <= calculator.compression_bound(g, n) + 1e-9

    def test_continuous_sources(self):
        g = _pair_graph(NodeOp.add(), gaussian(0.0, 1.0), gaussian(0.0, 1.0))
        result = eval_cq(g, 8).measure
        assert result.mean() == pytest.approx(0.0, abs=1e-10)
        reference = eval_exact_joint(g, quantize_sources_at=8).measure
        assert wasserstein1(result, reference) < 0.02


class TestMonteCarlo:
    def test_identity_on_point(self):
        g = build_chain_graph(point(3.0), [NodeOp.affine()])
        samples = eval_mc(g, 1000, seed=1).samples
        assert np.all(samples == 3.0)

    def test_same_seed_same_samples(self):
        g = random_dag(np.random.default_rng(41), max_atoms=8)
        first = eval_mc(g, 200_000, seed=5).samples
        assert np.array_equal(first, eval_mc(g, 200_000, seed=5).samples)
        assert not np.array_equal(first, eval_mc(g, 200_000, seed=6).samples)

    def test_thread_count_does_not_change_samples(self):
        g = _pair_graph(NodeOp.add(), uniform(0.0, 1.0), gaussian(0.0, 1.0))
        single = GraphEvaluator(Settings(threads=1)).eval_mc(g, 150_000, seed=9).samples
        parallel = GraphEvaluator(Settings(threads=3)).eval_mc(g, 150_000, seed=9).samples
        assert np.array_equal(single, parallel)

    def test_block_layout(self):
        g = build_chain_graph(uniform(0.0, 1.0), [NodeOp.affine()])
        evaluator = GraphEvaluator()
        small_blocks = evaluator.eval_mc(g, 1000, seed=3, block_size=100).samples
        assert small_blocks.size == 1000
        assert np.array_equal(small_blocks[:100], evaluator.eval_mc(g, 100, seed=3, block_size=100).samples)

    def test_sum_of_uniforms_is_triangular(self):
        g = _pair_graph(NodeOp.add(), uniform(0.0, 1.0), uniform(0.0, 1.0))
        samples = eval_mc(g, 10 ** 6, seed=0).samples
        assert _w1_to_triangular(samples) < 5e-3

    def test_bubble_sort_maximum(self):
        g = build_bubble_sort_graph([uniform(0.0, 1.0)] * 3, 3)
        samples = eval_mc(g, 200_000, seed=2).samples
        statistic = stats.kstest(samples, lambda t: np.clip(t, 0.0, 1.0) ** 3).statistic
        assert statistic < 0.01

    def test_terminal_measure_is_empirical(self):
        g = build_chain_graph(_coin(), [NodeOp.affine(2.0)])
        result = eval_mc(g, 10_000, seed=4)
        measure = result.terminal_measure()
        assert measure.atoms.tolist() == [0.0, 2.0]
        assert measure.weights.sum() == pytest.approx(1.0)

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            eval_mc(build_chain_graph(_coin(), [NodeOp.affine()]), 0, seed=0)

    @pytest.mark.slow
    def test_error_decays_at_root_n(self):
        g = _pair_graph(NodeOp.add(), uniform(0.0, 1.0), uniform(0.0, 1.0))
        sizes = [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]
        errors = [
            np.mean([_w1_to_triangular(eval_mc(g, size, seed=seed).samples) for seed in range(8)])
            for size in sizes
        ]
        slope = stats.linregress(np.log10(sizes), np.log10(errors)).slope
        assert -0.6 <= slope <= -0.4


def test_evaluate_dispatch(uniform8):
    g = build_chain_graph(discrete(uniform8), [NodeOp.affine()])
    evaluator = GraphEvaluator()
    assert evaluator.evaluate(g, "exact").measure == uniform8
    assert len(evaluator.evaluate(g, "cq", n=2).measure) == 4
    assert evaluator.evaluate(g, "mc", samples=10, seed=0).samples.size == 10
    with pytest.raises(ValueError):
        evaluator.evaluate(g, "cq")
    with pytest.raises(ValueError):
        evaluator.evaluate(g, "fast")
