"""
Швидкий набір перевірок інваріантів для команди selfcheck
"""

from itertools import product
from typing import Callable, List, Tuple
import logging
import math
import time

import numpy as np
from pydantic import BaseModel

from .config import Settings, DEFAULT_SETTINGS
from .errors import DcgError
from .evaluator import GraphEvaluator
from .graph.builders import build_bubble_sort_graph, random_dag, random_discrete_measure
from .graph.model import distortion_to_terminal, explicit_distortion_sum
from .measures.gaussian import gaussian_rate_table, omega_sequence, rate_ratios
from .measures.measure import DiscreteMeasure, wasserstein1
from .measures.quantize import MeanSplitQuantizer
from .measures.sources import discrete
from .sde.euler_maruyama import SdeSpec, em_mean_recursion, em_propagate
from .utils.calculator import BoundCalculator

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str
    wall_ms: float


class SelfCheck:
    """
    Зменшені версії властивостей, що перевіряються тестами

    Кожна перевірка повертає (пройдено, деталі); виняток означає провал.
    """

    def __init__(self, settings: Settings = DEFAULT_SETTINGS, seed: int = 20240101):
        self.settings = settings
        self.seed = seed
        self.quantizer = MeanSplitQuantizer(settings)
        self.evaluator = GraphEvaluator(settings)
        self.calculator = BoundCalculator(settings)

    def checks(self) -> List[Tuple[str, Callable[[], Tuple[bool, str]]]]:
        return [
            ("worst_case_identity", self.check_worst_case_identity),
            ("discrete_upper_bound", self.check_discrete_upper_bound),
            ("mean_preservation", self.check_mean_preservation),
            ("cell_coupling_equals_w1", self.check_cell_coupling),
            ("gaussian_rate", self.check_gaussian_rate),
            ("omega_asymptotics", self.check_omega),
            ("path_dp_equals_enumeration", self.check_path_dp),
            ("theorem1_domination", self.check_theorem1),
            ("quantization_domination", self.check_quantization_bound),
            ("bubble_sort_oracle", self.check_bubble_sort),
            ("mc_determinism", self.check_mc_determinism),
            ("em_mean_recursion", self.check_em_means),
        ]

    def run(self) -> List[CheckResult]:
        results = []
        for name, check in self.checks():
            started = time.perf_counter()
            try:
                passed, detail = check()
            except (DcgError, ValueError, ArithmeticError) as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            elapsed = 1000.0 * (time.perf_counter() - started)
            results.append(CheckResult(name=name, passed=passed, detail=detail, wall_ms=elapsed))
            logger.info("%s %s: %s", "✅" if passed else "❌", name, detail)
        return results

    def _rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def check_worst_case_identity(self):
        worst = 0.0
        for m in range(1, 8):
            mu = DiscreteMeasure.uniform_on(np.arange(1, 2 ** m + 1))
            for n in range(0, m + 2):
                expected = 2 ** (m - n) / 4 if n < m else 0.0
                worst = max(worst, abs(wasserstein1(mu, self.quantizer.quantize_discrete(mu, n)) - expected))
        return worst <= 1e-12, f"max |W1 - 2^(m-n)/4| = {worst:.3e}"

    def check_discrete_upper_bound(self):
        rng = self._rng(1)
        violations = 0
        for _ in range(200):
            mu = random_discrete_measure(rng, 256)
            for n in range(1, min(8, int(math.log2(len(mu)))) + 1):
                error = wasserstein1(mu, self.quantizer.quantize_discrete(mu, n))
                if error > mu.diameter() / 2 ** (n + 1) + 1e-12:
                    violations += 1
        return violations == 0, f"{violations} порушень diam/2^(n+1)"

    def check_mean_preservation(self):
        rng = self._rng(2)
        worst = 0.0
        for _ in range(200):
            mu = random_discrete_measure(rng, 128)
            n = int(rng.integers(0, 11))
            worst = max(worst, abs(self.quantizer.quantize_discrete(mu, n).mean() - mu.mean()),
                        abs(self.quantizer.compress(mu, n).mean() - mu.mean()))
        return worst <= 1e-10, f"max |Δmean| = {worst:.3e}"

    def check_cell_coupling(self):
        rng = self._rng(3)
        worst = 0.0
        for _ in range(100):
            mu = random_discrete_measure(rng, 64)
            n = int(rng.integers(0, 7))
            direct = wasserstein1(mu, self.quantizer.quantize_discrete(mu, n))
            worst = max(worst, abs(self.quantizer.cell_coupling_error(mu, n) - direct))
        return worst <= 1e-10, f"max розбіжність = {worst:.3e}"

    def check_gaussian_rate(self):
        ratios = [r for n, r in rate_ratios(gaussian_rate_table(11)) if 6 <= n <= 10]
        ok = all(1.8 <= r <= 2.2 for r in ratios)
        return ok, "відношення " + ", ".join(f"{r:.3f}" for r in ratios)

    def check_omega(self):
        omega = omega_sequence(5000)
        ratio = omega[5000] / math.sqrt(2 * 5000)
        return 0.98 <= ratio <= 1.02, f"ω_5000/√10000 = {ratio:.5f}"

    def check_path_dp(self):
        rng = self._rng(4)
        worst = 0.0
        for _ in range(30):
            g = random_dag(rng, max_atoms=4)
            dp = distortion_to_terminal(g)
            for s in g.sources():
                explicit = explicit_distortion_sum(g, s)
                worst = max(worst, abs(dp[s] - explicit) / max(1.0, explicit))
        return worst <= 1e-12, f"max відносна розбіжність = {worst:.3e}"

    def _random_pairs(self, salt: int, count: int):
        rng = self._rng(salt)
        for _ in range(count):
            yield random_dag(rng, max_atoms=16), int(rng.integers(1, 4))

    def check_theorem1(self):
        violations = 0
        for g, n in self._random_pairs(5, 30):
            exact = self.evaluator.eval_exact_joint(g).measure
            cq = self.evaluator.eval_cq(g, n).measure
            if wasserstein1(exact, cq) > self.calculator.theorem1_bound(g, n).total + 1e-9:
                violations += 1
        return violations == 0, f"{violations} порушень з 30 графів"

    def check_quantization_bound(self):
        violations = 0
        for g, n in self._random_pairs(6, 30):
            exact = self.evaluator.eval_exact_joint(g).measure
            quantized = self.evaluator.eval_exact_joint(g, quantize_sources_at=n).measure
            if wasserstein1(exact, quantized) > self.calculator.quantization_bound(g, n) + 1e-9:
                violations += 1
        return violations == 0, f"{violations} порушень з 30 графів"

    def check_bubble_sort(self):
        values = [1.0, 2.0, 3.0, 4.0]
        source = discrete(DiscreteMeasure.uniform_on(values))
        mismatches = 0
        for k in (1, 2, 3):
            g = build_bubble_sort_graph([source] * 3, k)
            result = self.evaluator.eval_exact_joint(g).measure
            brute = [sorted(t)[k - 1] for t in product(values, repeat=3)]
            expected = DiscreteMeasure.uniform_on(brute)
            if not (np.array_equal(result.atoms, expected.atoms)
                    and np.allclose(result.weights, expected.weights, rtol=0, atol=1e-15)):
                mismatches += 1
        return mismatches == 0, f"{mismatches} розбіжностей з перебором 4³"

    def check_mc_determinism(self):
        g = random_dag(self._rng(7), max_atoms=8)
        first = self.evaluator.eval_mc(g, 5000, seed=11).samples
        second = self.evaluator.eval_mc(g, 5000, seed=11).samples
        return bool(np.array_equal(first, second)), "однаковий seed → однакові вибірки"

    def check_em_means(self):
        spec = SdeSpec.gbm(N=8)
        measures = em_propagate(spec, 6, self.settings)
        expected = em_mean_recursion(spec)
        worst = max(abs(m.mean() - e) for m, e in zip(measures, expected))
        return worst <= 1e-8, f"max |E[Y_k] - y0(1+μΔt)^k| = {worst:.3e}"


def run_selfcheck(settings: Settings = DEFAULT_SETTINGS) -> List[CheckResult]:
    return SelfCheck(settings).run()
