"""
Квантизація поділом за середнім T(μ, n)

Рекурсія ділить ℝ у точці умовного середнього клітинки:
Ω_- = {x < f(μ_α)}, Ω_+ = {x ≥ f(μ_α)}; кожен лист дерева клітинок
стає атомом у своєму умовному середньому з масою клітинки.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple
import json
import logging
import math

import numpy as np

from .measure import DiscreteMeasure
from .sources import (
    SourceSpec, GaussianSource, UniformSource, QuantileSource,
    DiscreteSource, PointSource, ParetoSource,
)
from .gaussian import (
    conditional_mean_tail_array, interval_probability, normal_pdf, partial_absolute_deviation,
)
from ..config import Settings, DEFAULT_SETTINGS
from ..errors import SourceError

logger = logging.getLogger(__name__)

_BISECTION_STEPS = 200


@dataclass
class CellNode:
    """Клітинка Ω_α: напіввідкритий інтервал [left, right), маса та умовне середнє"""

    interval: Tuple[float, float]
    mass: float
    mean: float
    children: List["CellNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> Dict[str, Any]:
        left, right = self.interval
        data: Dict[str, Any] = {
            "interval": [left if math.isfinite(left) else None,
                         right if math.isfinite(right) else None],
            "mass": self.mass,
            "mean": self.mean,
        }
        if self.children:
            data["children"] = [child.to_dict() for child in self.children]
        return data


@dataclass
class CellTree:
    """Бінарне дерево клітинок рекурсії поділу за середнім"""

    root: CellNode

    def leaves(self) -> List[CellNode]:
        """Листи зліва направо"""
        result = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                result.append(node)
            else:
                stack.extend(reversed(node.children))
        return result

    def nodes(self) -> Iterator[CellNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    @property
    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            stack.extend((child, d + 1) for child in node.children)
        return best

    def leaf_measure(self) -> DiscreteMeasure:
        leaves = self.leaves()
        return DiscreteMeasure([leaf.mean for leaf in leaves], [leaf.mass for leaf in leaves])

    def to_dict(self) -> Dict[str, Any]:
        return self.root.to_dict()

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# Інтегратори клітинок для неперервних джерел


class _CellIntegrator:
    """
    Замкнені або чисельні інтеграли по клітинках у власних координатах джерела

    moments(lo, hi) -> (маса, середнє), split -> координата поділу,
    value(mean) -> атом на ℝ, absolute_deviation -> ∫_клітинка |x - c| dμ.
    """

    def root(self) -> Tuple[float, float]:
        return -math.inf, math.inf

    def moments(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def split(self, lo: np.ndarray, hi: np.ndarray, mean: np.ndarray) -> np.ndarray:
        return mean

    def value(self, mean: np.ndarray) -> np.ndarray:
        return mean

    def absolute_deviation(self, lo: np.ndarray, hi: np.ndarray, mean: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _GaussianIntegrator(_CellIntegrator):
    """N(μ, σ²) у стандартизованих координатах z = (x - μ)/σ"""

    def __init__(self, source: GaussianSource):
        self.mu = source.mu
        self.sigma = source.sigma

    def moments(self, lo, hi):
        mass = interval_probability(lo, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = (normal_pdf(lo) - normal_pdf(hi)) / mass
        right_tail = np.isinf(hi) & np.isfinite(lo)
        left_tail = np.isinf(lo) & np.isfinite(hi)
        if right_tail.any():
            mean[right_tail] = conditional_mean_tail_array(lo[right_tail])
        if left_tail.any():
            mean[left_tail] = -conditional_mean_tail_array(-hi[left_tail])
        return mass, mean

    def value(self, mean):
        return self.mu + self.sigma * mean

    def absolute_deviation(self, lo, hi, mean):
        return self.sigma * partial_absolute_deviation(lo, hi, mean)


class _UniformIntegrator(_CellIntegrator):
    def __init__(self, source: UniformSource):
        self.lo = source.lo
        self.hi = source.hi
        self.width = source.hi - source.lo

    def _clip(self, lo, hi):
        left = np.maximum(lo, self.lo)
        right = np.minimum(hi, self.hi)
        return left, np.maximum(right, left)

    def moments(self, lo, hi):
        left, right = self._clip(lo, hi)
        return (right - left) / self.width, 0.5 * (left + right)

    def absolute_deviation(self, lo, hi, mean):
        left, right = self._clip(lo, hi)
        return (np.square(mean - left) + np.square(right - mean)) / (2.0 * self.width)


class _QuantileIntegrator(_CellIntegrator):
    """X = Q(U): клітинки в координатах u ∈ (0,1), інтеграли через scipy.integrate.quad"""

    def __init__(self, source: QuantileSource):
        self.source = source

    def root(self):
        return 0.0, 1.0

    def moments(self, lo, hi):
        mass = hi - lo
        mean = np.array([
            self.source.integral(a, b) / (b - a) if b > a else math.nan
            for a, b in zip(lo, hi)
        ])
        return mass, mean

    def _split_one(self, a: float, b: float, m: float) -> float:
        # u* = inf{u ∈ [a, b] : Q(u) ≥ m}, бісекція по монотонній Q
        left, right = a, b
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (left + right)
            if mid <= left or mid >= right:
                break
            if float(self.source.quantile(mid)) >= m:
                right = mid
            else:
                left = mid
        return right

    def split(self, lo, hi, mean):
        return np.array([self._split_one(a, b, m) for a, b, m in zip(lo, hi, mean)])

    def absolute_deviation(self, lo, hi, mean):
        result = np.empty(len(lo))
        for i, (a, b, m) in enumerate(zip(lo, hi, mean)):
            u = self._split_one(a, b, m)
            result[i] = (m * (u - a) - self.source.integral(a, u)
                         + self.source.integral(u, b) - m * (b - u))
        return result


def _integrator_for(source: SourceSpec) -> _CellIntegrator:
    if isinstance(source, GaussianSource):
        return _GaussianIntegrator(source)
    if isinstance(source, UniformSource):
        return _UniformIntegrator(source)
    if isinstance(source, QuantileSource):
        return _QuantileIntegrator(source)
    raise SourceError(f"Невідомий неперервний розподіл: {type(source).__name__}")


@dataclass
class _Frontier:
    """Поточний рівень клітинок у порядку зліва направо"""

    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    mass: np.ndarray
    mean: np.ndarray
    active: np.ndarray
    nodes: Optional[List[CellNode]] = None
    root: Optional[CellNode] = None


class MeanSplitQuantizer:
    """Оператор квантизації T(μ, n) з поділом у середньому"""

    def __init__(self, settings: Settings = DEFAULT_SETTINGS):
        self.settings = settings

    # Дискретні міри

    def _discrete_tree(self, m: DiscreteMeasure, n: int, build_tree: bool):
        """
        Рекурсія по відсортованих атомах

        Returns:
            (список листів (lo, hi, маса, середнє) як діапазони індексів, корінь дерева)
        """
        x, w = m.atoms, m.weights
        leaves: List[Tuple[int, int, float, float]] = []

        def visit(lo: int, hi: int, depth: int, interval: Tuple[float, float]) -> Optional[CellNode]:
            cell_w = w[lo:hi]
            mass = float(cell_w.sum())
            mean = float(np.dot(cell_w, x[lo:hi]) / mass)
            mean = min(max(mean, float(x[lo])), float(x[hi - 1]))
            node = CellNode(interval, mass, mean) if build_tree else None

            if depth == n or hi - lo == 1:
                leaves.append((lo, hi, mass, mean))
                return node

            k = lo + int(np.searchsorted(x[lo:hi], mean, side="left"))
            if k == lo or k == hi:
                # Порожня сторона: клітинка стає листом у середньому непорожньої сторони
                leaves.append((lo, hi, mass, mean))
                return node

            left_child = visit(lo, k, depth + 1, (interval[0], mean))
            right_child = visit(k, hi, depth + 1, (mean, interval[1]))
            if build_tree:
                node.children = [left_child, right_child]
            return node

        root = visit(0, len(m), 0, (-math.inf, math.inf))
        return leaves, root

    def _leaves_to_measure(self, leaves) -> DiscreteMeasure:
        return DiscreteMeasure(
            [leaf[3] for leaf in leaves], [leaf[2] for leaf in leaves],
            merge_tolerance=self.settings.merge_tolerance,
            renormalization_tolerance=self.settings.renormalization_tolerance,
        )

    def quantize_discrete(self, m: DiscreteMeasure, n: int) -> DiscreteMeasure:
        """
        T(μ, n) для дискретної міри

        Результат має не більше 2^n атомів, зберігає середнє
        та лежить у [min supp μ, max supp μ].
        """
        _check_level(n)
        leaves, _ = self._discrete_tree(m, n, build_tree=False)
        return self._leaves_to_measure(leaves)

    def compress(self, m: DiscreteMeasure, n: int) -> DiscreteMeasure:
        """Стиснення: тотожність при #supp ≤ 2^n, інакше T(μ, n)"""
        _check_level(n)
        if len(m) <= 2 ** n:
            return m
        logger.debug("🗜️ Стиснення %d атомів до ≤ %d", len(m), 2 ** n)
        return self.quantize_discrete(m, n)

    def cell_coupling_error(self, m: DiscreteMeasure, n: int) -> float:
        """
        E|X - X^(n)| при зчепленні X ↦ умовне середнє своєї клітинки

        Клітинка атома шукається за межами листів дерева, а не за рекурсією.
        """
        _check_level(n)
        _, root = self._discrete_tree(m, n, build_tree=True)
        leaves = CellTree(root).leaves()
        boundaries = np.array([leaf.interval[0] for leaf in leaves[1:]])
        means = np.array([leaf.mean for leaf in leaves])
        cell = np.searchsorted(boundaries, m.atoms, side="right")
        return float(np.dot(m.weights, np.abs(m.atoms - means[cell])))

    # Довільні джерела

    def quantize_source(self, source: SourceSpec, n: int,
                        with_tree: bool = True) -> Tuple[DiscreteMeasure, Optional[CellTree]]:
        """
        T(μ_s, n) для джерела з деревом клітинок

        Для gaussian/uniform маси та умовні середні в замкненій формі,
        для quantile - адаптивне чисельне інтегрування.
        """
        _check_level(n)
        if isinstance(source, (DiscreteSource, PointSource)):
            leaves, root = self._discrete_tree(source.measure, n, build_tree=with_tree)
            return self._leaves_to_measure(leaves), (CellTree(root) if with_tree else None)

        source.mean()
        integrator = _integrator_for(source)
        frontier = self._root_frontier(integrator, with_tree)
        for _ in range(n):
            frontier = self._refine(integrator, frontier)

        measure = DiscreteMeasure(
            integrator.value(frontier.mean), frontier.mass,
            merge_tolerance=self.settings.merge_tolerance,
            renormalization_tolerance=self.settings.renormalization_tolerance,
        )
        tree = CellTree(frontier.root) if with_tree else None
        logger.debug("✅ %s квантизовано: n=%d, %d атомів", source.kind, n, len(measure))
        return measure, tree

    def quantization_error(self, source: SourceSpec, n: int) -> float:
        """
        W_1(μ, μ^(n)) = Σ_листи μ(Ω_α)·E[|X - f(μ_α)| | X ∈ Ω_α]
        """
        _check_level(n)
        if isinstance(source, (DiscreteSource, PointSource)):
            m = source.measure
            leaves, _ = self._discrete_tree(m, n, build_tree=False)
            return float(sum(
                np.dot(m.weights[lo:hi], np.abs(m.atoms[lo:hi] - mean))
                for lo, hi, _, mean in leaves
            ))
        return self.level_errors(source, n)[-1]

    def level_errors(self, source: SourceSpec, n_max: int) -> List[float]:
        """Похибки W_1(μ, μ^(n)) для всіх n = 0..n_max за один прохід по рівнях"""
        _check_level(n_max)
        if isinstance(source, (DiscreteSource, PointSource)):
            return [self.quantization_error(source, n) for n in range(n_max + 1)]

        source.mean()
        integrator = _integrator_for(source)
        frontier = self._root_frontier(integrator, build_tree=False)
        errors = [float(integrator.absolute_deviation(frontier.lo, frontier.hi, frontier.mean).sum())]
        for _ in range(n_max):
            frontier = self._refine(integrator, frontier)
            errors.append(float(integrator.absolute_deviation(frontier.lo, frontier.hi, frontier.mean).sum()))
        return errors

    # Рівнева рекурсія для неперервних джерел

    def _root_frontier(self, integrator: _CellIntegrator, build_tree: bool) -> _Frontier:
        lo, hi = integrator.root()
        lo_arr, hi_arr = np.array([lo]), np.array([hi])
        mass, mean = integrator.moments(lo_arr, hi_arr)
        root = None
        if build_tree:
            root = CellNode((-math.inf, math.inf), float(mass[0]), float(integrator.value(mean)[0]))
        return _Frontier(lo_arr, hi_arr, np.array([-math.inf]), np.array([math.inf]),
                         mass, mean, np.array([True]), [root] if root else None, root)

    def _refine(self, integrator: _CellIntegrator, f: _Frontier) -> _Frontier:
        idx = np.flatnonzero(f.active)
        split = integrator.split(f.lo[idx], f.hi[idx], f.mean[idx])
        left_mass, left_mean = integrator.moments(f.lo[idx], split)
        right_mass, right_mean = integrator.moments(split, f.hi[idx])

        # Клітинка з порожньою стороною більше не ділиться
        ok = (left_mass > 0) & (right_mass > 0)
        active = f.active.copy()
        active[idx[~ok]] = False
        idx, split = idx[ok], split[ok]
        left_mass, left_mean = left_mass[ok], left_mean[ok]
        right_mass, right_mean = right_mass[ok], right_mean[ok]
        cut = integrator.value(f.mean[idx])

        counts = np.ones(f.lo.size, dtype=np.int64)
        counts[idx] = 2
        starts = np.cumsum(counts) - counts
        li, ri = starts[idx], starts[idx] + 1

        lo, hi = np.repeat(f.lo, counts), np.repeat(f.hi, counts)
        left, right = np.repeat(f.left, counts), np.repeat(f.right, counts)
        mass, mean = np.repeat(f.mass, counts), np.repeat(f.mean, counts)
        new_active = np.repeat(active, counts)

        hi[li], lo[ri] = split, split
        right[li], left[ri] = cut, cut
        mass[li], mass[ri] = left_mass, right_mass
        mean[li], mean[ri] = left_mean, right_mean

        nodes = None
        if f.nodes is not None:
            nodes = []
            split_at = dict(zip(idx.tolist(), range(idx.size)))
            values_left = integrator.value(left_mean)
            values_right = integrator.value(right_mean)
            for i, node in enumerate(f.nodes):
                j = split_at.get(i)
                if j is None:
                    nodes.append(node)
                    continue
                c = float(cut[j])
                node.children = [
                    CellNode((node.interval[0], c), float(left_mass[j]), float(values_left[j])),
                    CellNode((c, node.interval[1]), float(right_mass[j]), float(values_right[j])),
                ]
                nodes.extend(node.children)

        return _Frontier(lo, hi, left, right, mass, mean, new_active, nodes, f.root)


def _check_level(n: int) -> None:
    if n < 0:
        raise ValueError(f"Рівень квантизації має бути n ≥ 0, отримано {n}")


_default = MeanSplitQuantizer()


def quantize_discrete(m: DiscreteMeasure, n: int) -> DiscreteMeasure:
    return _default.quantize_discrete(m, n)


def quantize_source(source: SourceSpec, n: int,
                    with_tree: bool = True) -> Tuple[DiscreteMeasure, Optional[CellTree]]:
    return _default.quantize_source(source, n, with_tree=with_tree)


def quantization_error(source: SourceSpec, n: int) -> float:
    return _default.quantization_error(source, n)


def compress(m: DiscreteMeasure, n: int) -> DiscreteMeasure:
    return _default.compress(m, n)


def cell_coupling_error(m: DiscreteMeasure, n: int) -> float:
    return _default.cell_coupling_error(m, n)


def pareto_bound_growth(alpha: float, n_max: int, scale: float = 1.0) -> List[Tuple[int, float]]:
    """
    (n, diam(supp μ^(n))/2^(n+1)) для квантизованого розподілу Парето

    При важкому хвості (α < 2) правий атом росте швидше за 2ⁿ,
    тому дискретна оцінка похибки стиснення зростає з n.
    """
    _check_level(n_max)
    source = ParetoSource(alpha=alpha, scale=scale)
    rows = []
    for n in range(n_max + 1):
        measure, _ = _default.quantize_source(source, n, with_tree=False)
        rows.append((n, measure.diameter() / 2 ** (n + 1)))
    logger.debug("📊 Парето α=%g: %s", alpha, rows)
    return rows
