"""
Модель обчислювального графа: вузли-джерела, вузли-операції, термінал Δ

Ребра задаються впорядкованими списками входів кожного вузла.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union
import logging
import math

import networkx as nx
import numpy as np

from ..measures.sources import SourceSpec
from ..errors import GraphValidationError, NonLipschitzError, PathOverflowError
from ..config import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)


class OpKind(str, Enum):
    AFFINE = "affine"
    ADD = "add"
    SUB = "sub"
    MIN = "min"
    MAX = "max"
    SCALE_ADD = "scale_add"
    EM_STEP = "em_step"
    CUSTOM = "custom"


# Допустима кількість входів: (мінімум, максимум або None)
_ARITY = {
    OpKind.AFFINE: (1, 1),
    OpKind.ADD: (2, None),
    OpKind.SUB: (2, 2),
    OpKind.MIN: (2, None),
    OpKind.MAX: (2, None),
    OpKind.SCALE_ADD: (2, 2),
    OpKind.EM_STEP: (2, 2),
}


@dataclass(frozen=True, eq=False)
class NodeOp:
    """
    Скалярна функція вузла f_v з константою Ліпшиця в ℓ¹-нормі входів

    Для вбудованих видів константа виводиться автоматично,
    для custom - оголошується користувачем (за кожним входом окремо або одним числом).
    """

    kind: OpKind
    params: Dict[str, float] = field(default_factory=dict)
    function: Optional[Callable[..., np.ndarray]] = None
    declared_lipschitz: Optional[float] = None
    arity: Optional[int] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.declared_lipschitz is not None and (self.declared_lipschitz < 0 or math.isnan(self.declared_lipschitz)):
            raise ValueError(f"Константа Ліпшиця має бути ≥ 0, отримано {self.declared_lipschitz}")

    # Конструктори

    @classmethod
    def affine(cls, a: float = 1.0, b: float = 0.0, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.AFFINE, {"a": float(a), "b": float(b)}, declared_lipschitz=lip)

    @classmethod
    def add(cls, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.ADD, declared_lipschitz=lip)

    @classmethod
    def sub(cls, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.SUB, declared_lipschitz=lip)

    @classmethod
    def minimum(cls, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.MIN, declared_lipschitz=lip)

    @classmethod
    def maximum(cls, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.MAX, declared_lipschitz=lip)

    @classmethod
    def scale_add(cls, c: float, lip: Optional[float] = None) -> "NodeOp":
        return cls(OpKind.SCALE_ADD, {"c": float(c)}, declared_lipschitz=lip)

    @classmethod
    def em_step(cls, drift: Callable, diffusion: Callable, t: float, dt: float) -> "NodeOp":
        """y' = y + a(t, y)Δt + b(t, y)√Δt·ξ, входи [y, ξ]"""
        step = _EulerMaruyamaStep(drift, diffusion, float(t), float(dt))
        return cls(OpKind.EM_STEP, {"t": float(t), "dt": float(dt)}, function=step)

    @classmethod
    def custom(cls, function: Callable[..., np.ndarray], arity: int = 1,
               lipschitz: Union[None, float, Sequence[float]] = None, name: Optional[str] = None) -> "NodeOp":
        if lipschitz is not None and not isinstance(lipschitz, (int, float)):
            lipschitz = max(float(v) for v in lipschitz)
        return cls(OpKind.CUSTOM, function=function, declared_lipschitz=lipschitz, arity=arity, name=name)

    # Властивості

    def arity_range(self) -> Tuple[int, Optional[int]]:
        if self.kind == OpKind.CUSTOM:
            return self.arity, self.arity
        return _ARITY[self.kind]

    def accepts(self, n_inputs: int) -> bool:
        low, high = self.arity_range()
        return n_inputs >= low and (high is None or n_inputs <= high)

    @property
    def lipschitz(self) -> Optional[float]:
        """‖f_v‖_Lip; None для функцій без глобальної константи"""
        if self.declared_lipschitz is not None:
            return self.declared_lipschitz
        if self.kind == OpKind.AFFINE:
            return abs(self.params["a"])
        if self.kind in (OpKind.ADD, OpKind.SUB, OpKind.MIN, OpKind.MAX):
            return 1.0
        if self.kind == OpKind.SCALE_ADD:
            return max(1.0, abs(self.params["c"]))
        return None

    def label(self) -> str:
        if self.name:
            return self.name
        if self.params:
            args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
            return f"{self.kind.value}({args})"
        return self.kind.value

    def apply(self, *inputs: np.ndarray) -> np.ndarray:
        """Векторизоване застосування до масивів значень входів"""
        if self.kind == OpKind.AFFINE:
            return self.params["a"] * inputs[0] + self.params["b"]
        if self.kind == OpKind.ADD:
            total = inputs[0] + inputs[1]
            for extra in inputs[2:]:
                total = total + extra
            return total
        if self.kind == OpKind.SUB:
            return inputs[0] - inputs[1]
        if self.kind == OpKind.MIN:
            return np.minimum.reduce(inputs) if len(inputs) > 2 else np.minimum(inputs[0], inputs[1])
        if self.kind == OpKind.MAX:
            return np.maximum.reduce(inputs) if len(inputs) > 2 else np.maximum(inputs[0], inputs[1])
        if self.kind == OpKind.SCALE_ADD:
            return inputs[0] + self.params["c"] * inputs[1]
        return np.asarray(self.function(*inputs), dtype=np.float64)


@dataclass(frozen=True)
class _EulerMaruyamaStep:
    drift: Callable
    diffusion: Callable
    t: float
    dt: float

    def __call__(self, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return y + self.drift(self.t, y) * self.dt + self.diffusion(self.t, y) * math.sqrt(self.dt) * xi


@dataclass
class NodeDef:
    id: str
    source: Optional[SourceSpec] = None
    op: Optional[NodeOp] = None
    inputs: Tuple[str, ...] = ()

    @property
    def is_source(self) -> bool:
        return not self.inputs


class CompGraph:
    """
    Обчислювальний граф (G, 𝓕) з єдиним терміналом Δ

    Вузли додаються у порядку побудови; цей порядок визначає
    детермінований топологічний порядок обходу.
    """

    def __init__(self, terminal: Optional[str] = None):
        self.nodes: Dict[str, NodeDef] = {}
        self.terminal = terminal

    def add_source(self, node_id: str, source: SourceSpec) -> "CompGraph":
        self._add(NodeDef(node_id, source=source))
        return self

    def add_op(self, node_id: str, op: NodeOp, inputs: Sequence[str]) -> "CompGraph":
        self._add(NodeDef(node_id, op=op, inputs=tuple(inputs)))
        return self

    def _add(self, node: NodeDef) -> None:
        if node.id in self.nodes:
            raise GraphValidationError([f"Вузол '{node.id}' вже існує"])
        self.nodes[node.id] = node

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def sources(self) -> List[str]:
        return [nid for nid, node in self.nodes.items() if node.is_source]

    def op_nodes(self) -> List[str]:
        return [nid for nid, node in self.nodes.items() if not node.is_source]

    def to_networkx(self) -> nx.DiGraph:
        """Орієнтований граф u → v для кожного входу u вузла v"""
        graph = nx.DiGraph()
        for position, node_id in enumerate(self.nodes):
            graph.add_node(node_id, position=position)
        for node in self.nodes.values():
            for inp in node.inputs:
                if inp in self.nodes:
                    graph.add_edge(inp, node.id)
        return graph

    def consumers(self) -> Dict[str, List[str]]:
        result: Dict[str, List[str]] = {nid: [] for nid in self.nodes}
        for node in self.nodes.values():
            for inp in node.inputs:
                if inp in result:
                    result[inp].append(node.id)
        return result


def validate(g: CompGraph) -> List[str]:
    """
    Перевірка інваріантів графа

    Returns:
        Топологічний порядок вузлів

    Raises:
        GraphValidationError з переліком усіх порушень
    """
    problems: List[str] = []

    for node in g.nodes.values():
        seen = set()
        for inp in node.inputs:
            if inp not in g.nodes:
                problems.append(f"Вузол '{node.id}': вхід '{inp}' не існує")
            if inp in seen:
                problems.append(f"Вузол '{node.id}': вхід '{inp}' повторюється")
            seen.add(inp)
        if node.is_source:
            if node.source is None:
                problems.append(f"Джерело '{node.id}' не має розподілу")
            if node.op is not None:
                problems.append(f"Вузол '{node.id}': операція без входів")
        else:
            if node.source is not None:
                problems.append(f"Вузол '{node.id}': розподіл заданий для вузла з входами")
            if node.op is None:
                problems.append(f"Вузол '{node.id}' не має операції")
            elif not node.op.accepts(len(node.inputs)):
                low, high = node.op.arity_range()
                expected = f"{low}" if low == high else f"≥ {low}" if high is None else f"{low}..{high}"
                problems.append(
                    f"Вузол '{node.id}': {node.op.kind.value} очікує {expected} входів, отримано {len(node.inputs)}"
                )

    graph = g.to_networkx()
    acyclic = nx.is_directed_acyclic_graph(graph)
    if not acyclic:
        cycle = nx.find_cycle(graph)
        path = " → ".join([edge[0] for edge in cycle] + [cycle[-1][1]])
        problems.append(f"Граф містить цикл: {path}")

    terminal = g.terminal
    if terminal is None or terminal not in g.nodes:
        problems.append(f"Термінал '{terminal}' не існує")
    else:
        if graph.out_degree(terminal) > 0:
            problems.append(f"Термінал '{terminal}' має вихідні ребра")
        if graph.in_degree(terminal) == 0:
            problems.append(f"Термінал '{terminal}' не має входів")
        others = [nid for nid in g.nodes if nid != terminal and graph.out_degree(nid) == 0]
        if others:
            problems.append(f"Кілька терміналів: крім '{terminal}' ще {others}")
        if acyclic:
            reaching = nx.ancestors(graph, terminal) | {terminal}
            orphans = [nid for nid in g.nodes if nid not in reaching]
            if orphans:
                problems.append(f"Вузли без шляху до терміналу: {orphans}")

    if problems:
        raise GraphValidationError(problems)

    return list(nx.lexicographical_topological_sort(graph, key=lambda nid: graph.nodes[nid]["position"]))


def path_counts(g: CompGraph, order: Optional[List[str]] = None) -> Dict[str, int]:
    """#𝖯(v, Δ) для кожного вузла: динамічне програмування у зворотному топологічному порядку"""
    order = order or validate(g)
    consumers = g.consumers()
    counts: Dict[str, int] = {}
    for node_id in reversed(order):
        counts[node_id] = 1 if node_id == g.terminal else sum(counts[v] for v in consumers[node_id])
    return counts


def _require_lipschitz(g: CompGraph) -> Dict[str, float]:
    constants = {}
    for node_id in g.op_nodes():
        lip = g.nodes[node_id].op.lipschitz
        if lip is None:
            kind = g.nodes[node_id].op.kind.value
            raise NonLipschitzError(f"Вузол '{node_id}' ({kind}) не має глобальної константи Ліпшиця")
        constants[node_id] = lip
    return constants


def distortion_to_terminal(g: CompGraph, order: Optional[List[str]] = None) -> Dict[str, float]:
    """
    Σ_{γ ∈ 𝖯(v, Δ)} Π_{(u,w) ∈ γ} ‖f_w‖_Lip для кожного вузла v

    Лінійне за кількістю ребер накопичення замість перебору шляхів.
    """
    order = order or validate(g)
    lip = _require_lipschitz(g)
    consumers = g.consumers()
    weight: Dict[str, float] = {}
    for node_id in reversed(order):
        if node_id == g.terminal:
            weight[node_id] = 1.0
        else:
            weight[node_id] = math.fsum(lip[v] * weight[v] for v in consumers[node_id])
    return weight


def max_distortion_to_terminal(g: CompGraph, order: Optional[List[str]] = None) -> Dict[str, float]:
    """max_{γ ∈ 𝖯(v, Δ)} Π ‖f_w‖_Lip для кожного вузла v"""
    order = order or validate(g)
    lip = _require_lipschitz(g)
    consumers = g.consumers()
    best: Dict[str, float] = {}
    for node_id in reversed(order):
        if node_id == g.terminal:
            best[node_id] = 1.0
        else:
            best[node_id] = max(lip[v] * best[v] for v in consumers[node_id])
    return best


@dataclass
class PathEnumeration:
    """Ітератор шляхів s → Δ разом з їх кількістю, порахованою незалежно"""

    count: int
    paths: Iterator[List[str]]


def enumerate_paths(g: CompGraph, source: str, cap: int = DEFAULT_SETTINGS.path_cap) -> PathEnumeration:
    """
    Усі орієнтовані шляхи від джерела s до терміналу

    Raises:
        PathOverflowError якщо кількість шляхів перевищує cap
    """
    order = validate(g)
    if source not in g.nodes or not g.nodes[source].is_source:
        raise GraphValidationError([f"'{source}' не є джерелом графа"])
    count = path_counts(g, order)[source]
    if count > cap:
        raise PathOverflowError(count, cap)
    paths = nx.all_simple_paths(g.to_networkx(), source, g.terminal)
    return PathEnumeration(count=count, paths=paths)


def explicit_distortion_sum(g: CompGraph, source: str, cap: int = DEFAULT_SETTINGS.path_cap) -> float:
    """Σ_γ Π ‖f_v‖_Lip прямим перебором шляхів (для перевірки DP)"""
    lip = _require_lipschitz(g)
    enumeration = enumerate_paths(g, source, cap)
    return math.fsum(math.prod(lip[v] for v in path[1:]) for path in enumeration.paths)


def depth(g: CompGraph) -> int:
    """depth(G) = max_s d(s, Δ), де d - довжина найкоротшого шляху"""
    validate(g)
    graph = g.to_networkx()
    return max(nx.shortest_path_length(graph, s, g.terminal) for s in g.sources())
