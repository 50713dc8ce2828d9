"""
JSON-документ графа <-> CompGraph

Формат:
{"nodes": [{"id": "s1", "kind": "source", "dist": {"type": "gaussian", "mean": 0.0, "std": 1.0}},
           {"id": "v1", "kind": "op", "op": "add", "inputs": ["s1", "s2"], "lip": 1.0}],
 "terminal": "v1"}
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union
import json
import logging

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from typing_extensions import Annotated

from .model import CompGraph, NodeOp, OpKind
from ..measures.measure import DiscreteMeasure
from ..measures.sources import (
    SourceSpec, QuantileSource, ParetoSource, discrete, gaussian, point, uniform,
)
from ..errors import DcgError, GraphValidationError

logger = logging.getLogger(__name__)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GaussianDist(_Strict):
    type: Literal["gaussian"]
    mean: float = 0.0
    std: float = Field(default=1.0, gt=0.0)


class UniformDist(_Strict):
    type: Literal["uniform"]
    lo: float
    hi: float


class PointDist(_Strict):
    type: Literal["point"]
    value: float


class DiscreteDist(_Strict):
    type: Literal["discrete"]
    atoms: List[float] = Field(min_length=1)
    weights: List[float] = Field(min_length=1)


class QuantileDist(_Strict):
    type: Literal["quantile"]
    probabilities: List[float] = Field(min_length=2)
    values: List[float] = Field(min_length=2)


class ParetoDist(_Strict):
    type: Literal["pareto"]
    alpha: float = Field(gt=0.0)
    scale: float = Field(default=1.0, gt=0.0)


Distribution = Annotated[
    Union[GaussianDist, UniformDist, PointDist, DiscreteDist, QuantileDist, ParetoDist],
    Field(discriminator="type"),
]

SerializableOp = Literal["affine", "add", "sub", "min", "max", "scale_add"]


class NodeDocument(_Strict):
    id: str = Field(min_length=1)
    kind: Literal["source", "op"]
    dist: Optional[Distribution] = None
    op: Optional[SerializableOp] = None
    inputs: List[str] = Field(default_factory=list)
    lip: Optional[float] = Field(default=None, ge=0.0)
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None


class GraphDocument(_Strict):
    nodes: List[NodeDocument] = Field(min_length=1)
    terminal: str


def _build_source(dist: BaseModel) -> SourceSpec:
    if isinstance(dist, GaussianDist):
        return gaussian(dist.mean, dist.std)
    if isinstance(dist, UniformDist):
        return uniform(dist.lo, dist.hi)
    if isinstance(dist, PointDist):
        return point(dist.value)
    if isinstance(dist, DiscreteDist):
        return discrete(DiscreteMeasure(dist.atoms, dist.weights))
    if isinstance(dist, QuantileDist):
        return QuantileSource(probabilities=tuple(dist.probabilities), values=tuple(dist.values))
    return ParetoSource(alpha=dist.alpha, scale=dist.scale)


def _build_op(node: NodeDocument) -> NodeOp:
    if node.op == "affine":
        return NodeOp.affine(1.0 if node.a is None else node.a, node.b or 0.0, lip=node.lip)
    if node.op == "scale_add":
        if node.c is None:
            raise GraphValidationError([f"Вузол '{node.id}': поле 'c' обов'язкове для scale_add"])
        return NodeOp.scale_add(node.c, lip=node.lip)
    return {
        "add": NodeOp.add, "sub": NodeOp.sub, "min": NodeOp.minimum, "max": NodeOp.maximum,
    }[node.op](lip=node.lip)


def _located_problems(exc: ValidationError, raw: Any) -> List[str]:
    """Повідомлення pydantic з id вузла замість індексу в масиві"""
    problems = []
    raw_nodes = raw.get("nodes") if isinstance(raw, dict) else None
    for error in exc.errors():
        loc = list(error["loc"])
        where = ".".join(str(part) for part in loc)
        if len(loc) >= 2 and loc[0] == "nodes" and isinstance(loc[1], int):
            node_id = None
            if isinstance(raw_nodes, list) and loc[1] < len(raw_nodes) and isinstance(raw_nodes[loc[1]], dict):
                node_id = raw_nodes[loc[1]].get("id")
            field_path = ".".join(str(part) for part in loc[2:]) or "<вузол>"
            where = f"вузол '{node_id if node_id is not None else loc[1]}', поле '{field_path}'"
        problems.append(f"{where}: {error['msg']}")
    return problems


def graph_from_dict(raw: Dict[str, Any]) -> CompGraph:
    """
    Будує CompGraph з розібраного JSON

    Raises:
        GraphValidationError з назвою вузла та поля для кожної помилки
    """
    try:
        document = GraphDocument.model_validate(raw)
    except ValidationError as exc:
        raise GraphValidationError(_located_problems(exc, raw)) from exc

    problems: List[str] = []
    graph = CompGraph(terminal=document.terminal)
    for node in document.nodes:
        try:
            if node.kind == "source":
                if node.dist is None:
                    problems.append(f"вузол '{node.id}', поле 'dist': джерело без розподілу")
                    continue
                if node.inputs:
                    problems.append(f"вузол '{node.id}', поле 'inputs': джерело не має входів")
                graph.add_source(node.id, _build_source(node.dist))
            else:
                if node.op is None:
                    problems.append(f"вузол '{node.id}', поле 'op': операцію не задано")
                    continue
                graph.add_op(node.id, _build_op(node), node.inputs)
        except GraphValidationError as exc:
            problems.extend(exc.problems)
        except DcgError as exc:
            problems.append(f"вузол '{node.id}', поле 'dist': {exc}")

    if problems:
        raise GraphValidationError(problems)
    return graph


def load_graph(path: Union[str, Path]) -> CompGraph:
    """Читає граф з JSON-файлу"""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphValidationError([f"{path}: некоректний JSON (рядок {exc.lineno}, стовпець {exc.colno})"]) from exc
    graph = graph_from_dict(raw)
    logger.debug("📥 Граф %s: %d вузлів, термінал '%s'", path, len(graph), graph.terminal)
    return graph


def graph_to_dict(g: CompGraph) -> Dict[str, Any]:
    """Серіалізує граф; em_step та custom вузли не мають JSON-представлення"""
    nodes = []
    for node in g.nodes.values():
        if node.is_source:
            nodes.append({"id": node.id, "kind": "source", "dist": node.source.to_dict()})
            continue
        op = node.op
        if op.kind in (OpKind.EM_STEP, OpKind.CUSTOM):
            raise GraphValidationError([f"Вузол '{node.id}': операцію {op.kind.value} неможливо серіалізувати"])
        entry: Dict[str, Any] = {"id": node.id, "kind": "op", "op": op.kind.value, "inputs": list(node.inputs)}
        entry.update(op.params)
        if op.declared_lipschitz is not None:
            entry["lip"] = op.declared_lipschitz
        nodes.append(entry)
    return {"nodes": nodes, "terminal": g.terminal}


def save_graph(g: CompGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(graph_to_dict(g), indent=2, ensure_ascii=False), encoding="utf-8")
    return path
