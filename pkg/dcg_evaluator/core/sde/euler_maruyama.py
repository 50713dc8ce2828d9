"""
Схема Ейлера-Маруями як обчислювальний граф та експеримент з похибкою W_1

Y_{k+1} = Y_k + a(t_k, Y_k)Δt + b(t_k, Y_k)√Δt·ξ_k, ξ_k ~ N(0,1) незалежні.
"""

from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import logging
import math
import time

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel
from scipy import stats
from tqdm import tqdm

from ..config import Settings, DEFAULT_SETTINGS
from ..evaluator import GraphEvaluator
from ..graph.model import CompGraph, NodeOp
from ..measures.measure import DiscreteMeasure, wasserstein1
from ..measures.sources import gaussian, point

logger = logging.getLogger(__name__)

DEFAULT_N_VALUES = tuple(range(4, 13))
DEFAULT_STEP_VALUES = (1,) + tuple(range(100, 1501, 100))


@dataclass(frozen=True)
class LinearCoefficient:
    """(t, y) ↦ c·y"""

    c: float

    def __call__(self, t: float, y):
        return self.c * y


@dataclass(frozen=True)
class ConstantCoefficient:
    """(t, y) ↦ c"""

    c: float

    def __call__(self, t: float, y):
        return self.c


@dataclass(frozen=True)
class SdeSpec:
    """
    Скалярне СДР dY = a(t, Y)dt + b(t, Y)dW на [0, T] з N кроками

    Для вбудованого геометричного броунівського руху a = μ·y, b = σ·y.
    """

    drift: Callable
    diffusion: Callable
    y0: float
    T: float
    N: int
    name: str = "custom"

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"Горизонт T має бути > 0, отримано {self.T}")
        if self.N < 1:
            raise ValueError(f"Кількість кроків N має бути ≥ 1, отримано {self.N}")
        if not math.isfinite(self.y0):
            raise ValueError("Y_0 має бути скінченним")

    @property
    def dt(self) -> float:
        return self.T / self.N

    def time(self, k: int) -> float:
        return k * self.dt

    def with_steps(self, N: int) -> "SdeSpec":
        return replace(self, N=N)

    @classmethod
    def gbm(cls, mu: float = 0.05, sigma: float = 0.4, y0: float = 100.0,
            T: float = 1.0, N: int = 1) -> "SdeSpec":
        if sigma <= 0:
            raise ValueError(f"GBM потребує σ > 0, отримано {sigma}")
        return cls(LinearCoefficient(mu), LinearCoefficient(sigma), float(y0), float(T), int(N),
                   name=f"gbm(mu={mu:g}, sigma={sigma:g})")

    @classmethod
    def constant(cls, a: float, b: float, y0: float = 0.0, T: float = 1.0, N: int = 1) -> "SdeSpec":
        """dY = a dt + b dW"""
        return cls(ConstantCoefficient(a), ConstantCoefficient(b), float(y0), float(T), int(N),
                   name=f"constant(a={a:g}, b={b:g})")


def state_id(k: int) -> str:
    return "y0" if k == 0 else f"y_{k}"


def build_em_graph(spec: SdeSpec, fused: bool = True) -> CompGraph:
    """
    Граф схеми Ейлера-Маруями з терміналом Y_N

    fused=True: ланцюг вузлів em_step з входами [Y_k, ξ_k].
    fused=False: на кожному кроці f_{k,1}(y) = y + a(t_k, y)Δt,
    f_{k,2}(ξ, y) = √Δt·b(t_k, y)·ξ та f_{k,3} = add, тобто 2 шляхи на крок.
    """
    g = CompGraph(terminal=state_id(spec.N))
    g.add_source("y0", point(spec.y0))
    noise = gaussian(0.0, 1.0)
    dt, sqrt_dt = spec.dt, math.sqrt(spec.dt)

    for k in range(spec.N):
        t = spec.time(k)
        previous, xi = state_id(k), f"xi_{k}"
        g.add_source(xi, noise)
        if fused:
            g.add_op(state_id(k + 1), NodeOp.em_step(spec.drift, spec.diffusion, t, dt), [previous, xi])
            continue
        drift_step = NodeOp.custom(_DriftStep(spec.drift, t, dt), arity=1, name=f"f_{k},1")
        noise_step = NodeOp.custom(_NoiseStep(spec.diffusion, t, sqrt_dt), arity=2, name=f"f_{k},2")
        g.add_op(f"drift_{k}", drift_step, [previous])
        g.add_op(f"noise_{k}", noise_step, [xi, previous])
        g.add_op(state_id(k + 1), NodeOp.add(), [f"drift_{k}", f"noise_{k}"])
    return g


@dataclass(frozen=True)
class _DriftStep:
    drift: Callable
    t: float
    dt: float

    def __call__(self, y):
        return y + self.drift(self.t, y) * self.dt


@dataclass(frozen=True)
class _NoiseStep:
    diffusion: Callable
    t: float
    sqrt_dt: float

    def __call__(self, xi, y):
        return self.sqrt_dt * self.diffusion(self.t, y) * xi


def em_propagate(spec: SdeSpec, n: int, settings: Settings = DEFAULT_SETTINGS) -> List[DiscreteMeasure]:
    """
    μ_k^(n),c для k = 1..N

    Шум квантизується один раз; кожен крок - добуток (стан × шум),
    злиття збігів і стиснення до ≤ 2ⁿ атомів.
    """
    if n < 1:
        raise ValueError(f"em_propagate потребує n ≥ 1, отримано {n}")
    graph = build_em_graph(spec)
    states = [state_id(k) for k in range(1, spec.N + 1)]
    result = GraphEvaluator(settings).eval_cq(graph, n, marginals=states)
    return [result.marginals[s] for s in states]


def em_mean_recursion(spec: SdeSpec) -> List[float]:
    """E[Y_k], k = 1..N, для лінійного дрейфу a = μ·y: E[Y_k] = y0·(1 + μΔt)^k"""
    if not isinstance(spec.drift, LinearCoefficient):
        raise ValueError("Замкнена рекурсія середнього відома лише для лінійного дрейфу")
    growth = 1.0 + spec.drift.c * spec.dt
    return [spec.y0 * growth ** k for k in range(1, spec.N + 1)]


def em_theorem2_bound(spec: SdeSpec, n: int, k: int, c: float, c_prime: float) -> float:
    """c·exp(c′·k·√(nΔt))/2ⁿ"""
    if n < 0 or k < 0:
        raise ValueError(f"Потрібно n ≥ 0 та k ≥ 0, отримано n={n}, k={k}")
    if c <= 0 or c_prime < 0:
        raise ValueError(f"Потрібно c > 0 та c′ ≥ 0, отримано c={c}, c′={c_prime}")
    return c * math.exp(c_prime * k * math.sqrt(n * spec.dt)) / 2 ** n


class ExperimentRecord(BaseModel):
    """Один рядок дослідження похибки: параметри, виміряна W_1, оцінка, розмір носія, час"""

    N: int
    n: int
    seed: int
    w1: float
    bound_fit: float = math.nan
    diam: float
    support: int
    runtime_ms: float


def fit_theorem2_constants(records: Sequence[ExperimentRecord], T: float) -> Optional[Tuple[float, float]]:
    """
    (c, c′), за яких c·exp(c′·N·√(nT/N))/2ⁿ домінує всі виміряні точки

    Найменші квадрати для log W_1 + n·log 2 = log c + c′·√(nNT),
    потім зсув вільного члена на найбільший залишок.
    """
    points = [(math.sqrt(r.n * r.N * T), math.log(r.w1) + r.n * math.log(2.0)) for r in records if r.w1 > 0]
    if not points:
        return None
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    if np.ptp(x) > 0 and x.size >= 2:
        fit = stats.linregress(x, y)
        slope, intercept = max(float(fit.slope), 0.0), float(fit.intercept)
    else:
        slope, intercept = 0.0, float(y.mean())
    intercept += float(np.max(y - (intercept + slope * x)))
    return math.exp(intercept), slope


class TrendFit(BaseModel):
    slope: float
    intercept: float
    r_squared: float
    increasing: bool
    points: int


class ExperimentSummary(BaseModel):
    """by_n: log W_1 проти √N при фіксованому n; by_N: log₂ W_1 проти n при фіксованому N"""

    by_n: Dict[int, TrendFit]
    by_N: Dict[int, TrendFit]


def _trend(x: Sequence[float], y: Sequence[float]) -> Optional[TrendFit]:
    if len(x) < 2 or np.ptp(x) == 0:
        return None
    fit = stats.linregress(x, y)
    return TrendFit(slope=float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2),
                    increasing=bool(np.all(np.diff(y) > 0)), points=len(x))


def summarize_experiment(records: Sequence[ExperimentRecord]) -> ExperimentSummary:
    positive = [r for r in records if r.w1 > 0]
    by_n, by_N = {}, {}
    for n in sorted({r.n for r in positive}):
        rows = sorted((r for r in positive if r.n == n), key=lambda r: r.N)
        trend = _trend([math.sqrt(r.N) for r in rows], [math.log(r.w1) for r in rows])
        if trend is not None:
            by_n[n] = trend
    for N in sorted({r.N for r in positive}):
        rows = sorted((r for r in positive if r.N == N), key=lambda r: r.n)
        trend = _trend([r.n for r in rows], [math.log2(r.w1) for r in rows])
        if trend is not None:
            by_N[N] = trend
    return ExperimentSummary(by_n=by_n, by_N=by_N)


class EmExperiment:
    """
    Порівняння μ_N^(n),c з еталонним законом Y_N, отриманим Монте-Карло

    Еталон для кожного N обчислюється один раз і спільний для всіх n.
    """

    def __init__(self, spec: SdeSpec, settings: Settings = DEFAULT_SETTINGS, progress: bool = False):
        self.spec = spec
        self.settings = settings
        self.evaluator = GraphEvaluator(settings)
        self.progress = progress

    def reference(self, N: int, ref_samples: int, seed: int) -> DiscreteMeasure:
        graph = build_em_graph(self.spec.with_steps(N))
        return self.evaluator.eval_mc(graph, ref_samples, seed).terminal_measure()

    def _cell(self, N: int, n: int, reference: DiscreteMeasure, seed: int) -> ExperimentRecord:
        started = time.perf_counter()
        result = self.evaluator.eval_cq(build_em_graph(self.spec.with_steps(N)), n)
        runtime_ms = 1000.0 * (time.perf_counter() - started)
        measure = result.measure
        return ExperimentRecord(N=N, n=n, seed=seed, w1=wasserstein1(reference, measure),
                                diam=measure.diameter(), support=len(measure), runtime_ms=runtime_ms)

    def run(self, n_values: Sequence[int], N_values: Sequence[int], ref_samples: int,
            seed: int) -> List[ExperimentRecord]:
        if ref_samples < 1:
            raise ValueError(f"ref_samples має бути ≥ 1, отримано {ref_samples}")
        if ref_samples < 10 ** 5:
            logger.warning("⚠️ ref_samples=%d: похибка еталону ~%.1e може перекрити похибку квантизації",
                           ref_samples, ref_samples ** -0.5)

        references = {
            N: self.reference(N, ref_samples, seed)
            for N in tqdm(list(dict.fromkeys(N_values)), desc="еталон", disable=not self.progress)
        }
        grid = list(product(N_values, n_values))
        # Усі комірки (N, n) в одному пулі; результати повертаються в порядку сітки
        cells = Parallel(n_jobs=self.settings.threads, prefer="threads", return_as="generator")(
            delayed(self._cell)(N, n, references[N], seed) for N, n in grid
        )
        records: List[ExperimentRecord] = []
        for record in tqdm(cells, total=len(grid), desc="N×n", disable=not self.progress):
            records.append(record)
            logger.info("📊 N=%d, n=%d: W1 = %.3e", record.N, record.n, record.w1)

        constants = fit_theorem2_constants(records, self.spec.T)
        if constants is not None:
            c, c_prime = constants
            logger.info("📊 Підібрані константи: c=%.4g, c′=%.4g", c, c_prime)
            records = [
                r.model_copy(update={"bound_fit": em_theorem2_bound(self.spec.with_steps(r.N), r.n, r.N, c, c_prime)})
                for r in records
            ]
        return records


def em_error_experiment(spec: SdeSpec, n_values: Sequence[int] = DEFAULT_N_VALUES,
                        N_values: Sequence[int] = DEFAULT_STEP_VALUES, ref_samples: int = 10 ** 6,
                        seed: int = 0, settings: Settings = DEFAULT_SETTINGS,
                        progress: bool = False) -> List[ExperimentRecord]:
    return EmExperiment(spec, settings, progress).run(n_values, N_values, ref_samples, seed)
