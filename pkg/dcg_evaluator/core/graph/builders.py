"""
Готові обчислювальні графи: ланцюг, ромб, сума трьох, сортування бульбашкою, випадкові DAG
"""

from typing import List, Optional, Sequence
import logging

import networkx as nx
import numpy as np

from .model import CompGraph, NodeOp
from ..measures.measure import DiscreteMeasure
from ..measures.sources import SourceSpec, discrete

logger = logging.getLogger(__name__)


def build_chain_graph(source: SourceSpec, ops: Sequence[NodeOp]) -> CompGraph:
    """s → v1 → ... → vk, термінал vk"""
    if not ops:
        raise ValueError("Ланцюг потребує хоча б однієї операції")
    g = CompGraph(terminal=f"v{len(ops)}")
    g.add_source("s", source)
    previous = "s"
    for i, op in enumerate(ops, start=1):
        g.add_op(f"v{i}", op, [previous])
        previous = f"v{i}"
    return g


def build_diamond_graph(source: SourceSpec, left: Optional[NodeOp] = None,
                        right: Optional[NodeOp] = None, join: Optional[NodeOp] = None) -> CompGraph:
    """s → a, s → b, (a, b) → Δ"""
    g = CompGraph(terminal="delta")
    g.add_source("s", source)
    g.add_op("a", left or NodeOp.affine(1.0, 0.0), ["s"])
    g.add_op("b", right or NodeOp.affine(-1.0, 0.0), ["s"])
    g.add_op("delta", join or NodeOp.add(), ["a", "b"])
    return g


def build_sum_of_three_graph(sources: Sequence[SourceSpec], fused: bool = True) -> CompGraph:
    """
    X1 + X2 + X3 одним тернарним вузлом add або двома бінарними

    Обидва представлення мають однаковий точний закон виходу,
    але різні шляхи та оцінки похибки.
    """
    if len(sources) != 3:
        raise ValueError(f"Потрібно рівно три джерела, отримано {len(sources)}")
    g = CompGraph(terminal="sum")
    for i, source in enumerate(sources, start=1):
        g.add_source(f"x{i}", source)
    if fused:
        g.add_op("sum", NodeOp.add(), ["x1", "x2", "x3"])
    else:
        g.add_op("partial", NodeOp.add(), ["x1", "x2"])
        g.add_op("sum", NodeOp.add(), ["partial", "x3"])
    return g


def build_bubble_sort_graph(sources: Sequence[SourceSpec], k: int) -> CompGraph:
    """
    DAG модифікованого сортування бульбашкою з терміналом k-ї порядкової статистики

    Кожне порівняння сусідніх елементів стає парою вузлів min/max;
    вузли, що не впливають на термінал, відкидаються.
    """
    count = len(sources)
    if count < 2:
        raise ValueError(f"Сортування потребує щонайменше двох джерел, отримано {count}")
    if not 1 <= k <= count:
        raise ValueError(f"k має бути в [1, {count}], отримано {k}")

    full = CompGraph()
    current = []
    for j, source in enumerate(sources):
        full.add_source(f"x{j}", source)
        current.append(f"x{j}")

    for i in range(count):
        for j in range(count - i - 1):
            low, high = f"min_{i}_{j}", f"max_{i}_{j}"
            pair = [current[j], current[j + 1]]
            full.add_op(low, NodeOp.minimum(), pair)
            full.add_op(high, NodeOp.maximum(), pair)
            current[j], current[j + 1] = low, high

    terminal = current[k - 1]
    keep = nx.ancestors(full.to_networkx(), terminal) | {terminal}

    g = CompGraph(terminal=terminal)
    for node_id, node in full.nodes.items():
        if node_id not in keep:
            continue
        if node.is_source:
            g.add_source(node_id, node.source)
        else:
            g.add_op(node_id, node.op, node.inputs)
    logger.debug("🔍 Сортування бульбашкою: %d джерел, k=%d, %d вузлів", count, k, len(g))
    return g


_BINARY_KINDS = ("add", "sub", "min", "max")
_ALL_KINDS = ("affine",) + _BINARY_KINDS


def _random_op(rng: np.random.Generator, kind: str) -> NodeOp:
    if kind == "affine":
        return NodeOp.affine(float(rng.uniform(-2.0, 2.0)), float(rng.uniform(-1.0, 1.0)))
    if kind == "sub":
        return NodeOp.sub()
    return {"add": NodeOp.add, "min": NodeOp.minimum, "max": NodeOp.maximum}[kind]()


def random_discrete_measure(rng: np.random.Generator, max_atoms: int = 64) -> DiscreteMeasure:
    size = int(rng.integers(1, max_atoms + 1))
    atoms = np.round(rng.uniform(-5.0, 5.0, size), 6)
    weights = rng.dirichlet(np.ones(size))
    return DiscreteMeasure(atoms, weights)


def random_dag(rng: np.random.Generator, max_nodes: int = 8, max_sources: int = 3,
               max_atoms: int = 64) -> CompGraph:
    """
    Випадковий DAG з дискретними джерелами та операціями {affine, add, sub, min, max}

    Кожен вузол має шлях до терміналу: нова операція завжди споживає
    хоча б один вузол без споживачів, а коли таких забагато - два одразу.
    """
    if max_nodes < 2 or max_sources < 1:
        raise ValueError("Потрібно max_nodes ≥ 2 та max_sources ≥ 1")
    n_sources = int(rng.integers(1, min(max_sources, max_nodes - 1) + 1))
    n_ops = int(rng.integers(1, max_nodes - n_sources + 1))
    n_ops = max(n_ops, n_sources - 1)

    g = CompGraph()
    dangling: List[str] = []
    for i in range(n_sources):
        g.add_source(f"s{i}", discrete(random_discrete_measure(rng, max_atoms)))
        dangling.append(f"s{i}")

    for t in range(n_ops):
        remaining = n_ops - t
        node_id = f"v{t}"
        if len(dangling) - 1 >= remaining and len(dangling) >= 2:
            kind = _BINARY_KINDS[int(rng.integers(len(_BINARY_KINDS)))]
            picks = rng.choice(len(dangling), size=2, replace=False)
            inputs = [dangling[int(p)] for p in picks]
        else:
            kind = _ALL_KINDS[int(rng.integers(len(_ALL_KINDS)))]
            first = dangling[int(rng.integers(len(dangling)))]
            inputs = [first]
            if kind != "affine":
                others = [nid for nid in g.nodes if nid != first]
                if not others:
                    kind = "affine"
                else:
                    inputs.append(others[int(rng.integers(len(others)))])
        g.add_op(node_id, _random_op(rng, kind), inputs)
        dangling = [nid for nid in dangling if nid not in inputs] + [node_id]

    g.terminal = f"v{n_ops - 1}"
    return g
