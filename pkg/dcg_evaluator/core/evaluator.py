"""
Головний клас для обчислення законів розподілу на обчислювальних графах

Три режими: точний спільний перебір атомів джерел (оракул),
квантизоване та стиснене поширення по фронту (cq) і Монте-Карло.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging
import time

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel

from .config import Settings, DEFAULT_SETTINGS
from .errors import AtomCapExceeded, SourceError
from .graph.model import CompGraph, validate
from .measures.measure import DiscreteMeasure, empirical_from_samples, merge_sorted_atoms
from .measures.quantize import MeanSplitQuantizer
from .measures.sources import SourceSpec
from .utils.rng import block_sizes, stream

logger = logging.getLogger(__name__)

MC_BLOCK_SIZE = 2 ** 16


class NodeStats(BaseModel):
    """Розмір носія закону вузла до та після стиснення і час обчислення"""

    node: str
    support_before: int
    support_after: int
    compressed: bool = False
    wall_ms: float


@dataclass
class EvalResult:
    mode: str
    terminal: str
    measure: Optional[DiscreteMeasure] = None
    samples: Optional[np.ndarray] = None
    node_stats: Dict[str, NodeStats] = field(default_factory=dict)
    marginals: Dict[str, DiscreteMeasure] = field(default_factory=dict)

    def terminal_measure(self) -> DiscreteMeasure:
        if self.measure is None:
            self.measure = empirical_from_samples(self.samples)
        return self.measure


def _merge_rows(table: np.ndarray, weights: np.ndarray, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """Зливає рядки спільного закону, що збігаються з точністю tolerance у кожному стовпці"""
    if table.shape[0] <= 1:
        return table, weights
    order = np.lexsort(table.T[::-1])
    table, weights = table[order], weights[order]
    starts = np.empty(table.shape[0], dtype=bool)
    starts[0] = True
    np.any(np.abs(np.diff(table, axis=0)) > tolerance, axis=1, out=starts[1:])
    idx = np.flatnonzero(starts)
    return table[idx], np.add.reduceat(weights, idx)


def _distinct(values: np.ndarray, tolerance: float) -> int:
    ordered = np.sort(values)
    return int(1 + np.count_nonzero(np.diff(ordered) > tolerance)) if ordered.size else 0


class GraphEvaluator:
    """
    Клас для поширення розподілів джерел через граф

    Стиснення T(·, n) застосовується лише у вершинах розрізу, де фронт
    складається з одного вузла і T діє на справжній маргінальний закон.
    """

    def __init__(self, settings: Settings = DEFAULT_SETTINGS):
        self.settings = settings
        self.quantizer = MeanSplitQuantizer(settings)

    def _measure(self, atoms, weights) -> DiscreteMeasure:
        return DiscreteMeasure(atoms, weights,
                               merge_tolerance=self.settings.merge_tolerance,
                               renormalization_tolerance=self.settings.renormalization_tolerance)

    def _source_measure(self, node_id: str, spec: SourceSpec, n: Optional[int],
                        cache: Dict[SourceSpec, DiscreteMeasure]) -> DiscreteMeasure:
        if n is None:
            if not spec.is_discrete:
                raise SourceError(f"Джерело '{node_id}' ({spec.kind}) неперервне: потрібен рівень квантизації n")
            return spec.measure
        if spec not in cache:
            cache[spec], _ = self.quantizer.quantize_source(spec, n, with_tree=False)
        return cache[spec]

    # Точний спільний закон

    def eval_exact_joint(self, g: CompGraph, quantize_sources_at: Optional[int] = None,
                         marginals: Iterable[str] = ()) -> EvalResult:
        """
        Точний закон X_Δ перебором усіх наборів атомів джерел

        Джерела незалежні, тому спільна міра - добуток; кожен вузол
        обчислюється детерміновано на кожному наборі.

        Raises:
            AtomCapExceeded якщо добуток розмірів носіїв перевищує atom_cap
            SourceError для неперервного джерела без quantize_sources_at
        """
        order = validate(g)
        wanted = set(marginals)
        cache: Dict[SourceSpec, DiscreteMeasure] = {}
        sources = [nid for nid in order if g.nodes[nid].is_source]
        measures = [self._source_measure(s, g.nodes[s].source, quantize_sources_at, cache) for s in sources]

        total = 1
        for source_id, measure in zip(sources, measures):
            total *= len(measure)
            if total > self.settings.atom_cap:
                raise AtomCapExceeded(source_id, total, self.settings.atom_cap)
        logger.debug("🔍 Точний перебір: %d джерел, %d наборів атомів", len(sources), total)

        columns: Dict[str, np.ndarray] = {}
        weights = np.ones(total)
        repeat = total
        for source_id, measure in zip(sources, measures):
            repeat //= len(measure)
            tile = total // (len(measure) * repeat)
            columns[source_id] = np.tile(np.repeat(measure.atoms, repeat), tile)
            weights *= np.tile(np.repeat(measure.weights, repeat), tile)

        remaining = {nid: len(consumers) for nid, consumers in g.consumers().items()}
        stats: Dict[str, NodeStats] = {}
        result_marginals: Dict[str, DiscreteMeasure] = {}
        for node_id in order:
            node = g.nodes[node_id]
            if node.is_source:
                continue
            started = time.perf_counter()
            columns[node_id] = node.op.apply(*(columns[i] for i in node.inputs))
            support = _distinct(columns[node_id], self.settings.merge_tolerance)
            stats[node_id] = NodeStats(node=node_id, support_before=support, support_after=support,
                                       wall_ms=1000.0 * (time.perf_counter() - started))
            for inp in node.inputs:
                remaining[inp] -= 1
                if remaining[inp] == 0 and inp not in wanted:
                    del columns[inp]

        for node_id in wanted:
            result_marginals[node_id] = self._measure(columns[node_id], weights)

        measure = self._measure(columns[g.terminal], weights)
        logger.debug("✅ Точний закон терміналу: %d атомів", len(measure))
        return EvalResult(mode="exact", terminal=g.terminal, measure=measure,
                          node_stats=stats, marginals=result_marginals)

    # Квантизоване та стиснене поширення

    def eval_cq(self, g: CompGraph, n: int, marginals: Iterable[str] = (),
                compress: bool = True) -> EvalResult:
        """
        cqDCG: джерела квантизуються на рівні n, закони вузлів стискаються до ≤ 2ⁿ атомів

        Підтримується спільний закон фронту (обчислених, але ще не спожитих вузлів)
        як таблиця атомів-кортежів. Джерела додаються до фронту при першому використанні.

        Raises:
            AtomCapExceeded з назвою вузла, на якому фронт перевищив atom_cap
        """
        if n < 0:
            raise ValueError(f"Рівень квантизації має бути n ≥ 0, отримано {n}")
        order = validate(g)
        wanted = set(marginals)
        tolerance = self.settings.merge_tolerance
        cache: Dict[SourceSpec, DiscreteMeasure] = {}
        remaining = {nid: len(consumers) for nid, consumers in g.consumers().items()}

        columns: List[str] = []
        table = np.empty((1, 0))
        weights = np.ones(1)
        stats: Dict[str, NodeStats] = {}
        result_marginals: Dict[str, DiscreteMeasure] = {}

        for node_id in order:
            node = g.nodes[node_id]
            if node.is_source:
                if node_id in wanted:
                    result_marginals[node_id] = self._source_measure(node_id, node.source, n, cache)
                continue
            started = time.perf_counter()

            for inp in node.inputs:
                if inp in columns:
                    continue
                measure = self._source_measure(inp, g.nodes[inp].source, n, cache)
                size = table.shape[0] * len(measure)
                if size > self.settings.atom_cap:
                    raise AtomCapExceeded(node_id, size, self.settings.atom_cap)
                rows = table.shape[0]
                table = np.column_stack((np.repeat(table, len(measure), axis=0), np.tile(measure.atoms, rows)))
                weights = np.repeat(weights, len(measure)) * np.tile(measure.weights, rows)
                columns.append(inp)

            values = node.op.apply(*(table[:, columns.index(i)] for i in node.inputs))
            for inp in node.inputs:
                remaining[inp] -= 1
            keep = [j for j, c in enumerate(columns) if remaining[c] > 0]

            if keep:
                columns = [columns[j] for j in keep] + [node_id]
                table, weights = _merge_rows(np.column_stack((table[:, keep], values)), weights, tolerance)
                support = _distinct(table[:, -1], tolerance)
            else:
                # Фронт зводиться до одного вузла
                ranks = np.argsort(values, kind="stable")
                atoms, weights = merge_sorted_atoms(values[ranks], weights[ranks], tolerance)
                columns, table = [node_id], atoms[:, None]
                support = atoms.size
            j = len(columns) - 1
            after, compressed = support, False
            if columns == [node_id]:
                marginal = self._measure(table[:, 0], weights)
                if compress and len(marginal) > 2 ** n:
                    marginal = self.quantizer.compress(marginal, n)
                    compressed = True
                table, weights = marginal.atoms[:, None].copy(), marginal.weights.copy()
                after = len(marginal)
                if node_id in wanted:
                    result_marginals[node_id] = marginal
            elif node_id in wanted:
                result_marginals[node_id] = self._measure(table[:, j], weights)

            stats[node_id] = NodeStats(node=node_id, support_before=support, support_after=after,
                                       compressed=compressed,
                                       wall_ms=1000.0 * (time.perf_counter() - started))
            logger.debug("📊 %s: носій %d → %d, фронт %d×%d", node_id, support, after, *table.shape)

        measure = self._measure(table[:, 0], weights)
        return EvalResult(mode="cq", terminal=g.terminal, measure=measure,
                          node_stats=stats, marginals=result_marginals)

    # Монте-Карло

    def _mc_block(self, g: CompGraph, order: Sequence[str], source_index: Dict[str, int],
                  seed: int, block: int, size: int) -> np.ndarray:
        remaining = {nid: len(consumers) for nid, consumers in g.consumers().items()}
        values: Dict[str, np.ndarray] = {}
        for node_id in order:
            node = g.nodes[node_id]
            if node.is_source:
                continue
            # Джерела генеруються при першому використанні, а не всі одразу
            for inp in node.inputs:
                if inp not in values:
                    values[inp] = g.nodes[inp].source.sample(stream(seed, source_index[inp], block), size)
            values[node_id] = node.op.apply(*(values[i] for i in node.inputs))
            for inp in node.inputs:
                remaining[inp] -= 1
                if remaining[inp] == 0:
                    del values[inp]
        return values[g.terminal]

    def eval_mc(self, g: CompGraph, samples: int, seed: int,
                block_size: int = MC_BLOCK_SIZE) -> EvalResult:
        """
        N незалежних вибірок вектора джерел, протягнутих через граф

        Потік для джерела s у блоці b - Philox(SeedSequence([seed, s, b])),
        тому результат не залежить від кількості потоків.
        """
        if samples < 1:
            raise ValueError(f"Кількість вибірок має бути ≥ 1, отримано {samples}")
        order = validate(g)
        source_index = {nid: i for i, nid in enumerate(nid for nid in order if g.nodes[nid].is_source)}
        blocks = block_sizes(samples, block_size)
        logger.debug("🔍 Монте-Карло: %d вибірок у %d блоках, seed=%d", samples, len(blocks), seed)

        parts = Parallel(n_jobs=self.settings.threads, prefer="threads")(
            delayed(self._mc_block)(g, order, source_index, seed, b, size)
            for b, size in enumerate(blocks)
        )
        values = np.concatenate(parts)
        return EvalResult(mode="mc", terminal=g.terminal, samples=values)

    def evaluate(self, g: CompGraph, mode: str, n: Optional[int] = None, samples: int = 10 ** 5,
                 seed: int = 0, marginals: Iterable[str] = ()) -> EvalResult:
        if mode == "exact":
            return self.eval_exact_joint(g, n, marginals)
        if mode == "cq":
            if n is None:
                raise ValueError("Режим cq потребує рівня n")
            return self.eval_cq(g, n, marginals)
        if mode == "mc":
            return self.eval_mc(g, samples, seed)
        raise ValueError(f"Невідомий режим '{mode}', очікується exact, cq або mc")


_default = GraphEvaluator()


def eval_exact_joint(g: CompGraph, quantize_sources_at: Optional[int] = None,
                     marginals: Iterable[str] = ()) -> EvalResult:
    return _default.eval_exact_joint(g, quantize_sources_at, marginals)


def eval_cq(g: CompGraph, n: int, marginals: Iterable[str] = ()) -> EvalResult:
    return _default.eval_cq(g, n, marginals)


def eval_mc(g: CompGraph, samples: int, seed: int) -> EvalResult:
    return _default.eval_mc(g, samples, seed)
