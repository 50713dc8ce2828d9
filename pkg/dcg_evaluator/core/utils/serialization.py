"""
CSV та JSON виводу з коментарями-заголовками конфігурації запуску
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union
import csv
import io
import json
import logging

import numpy as np
from pydantic import BaseModel

from ..errors import MeasureError
from ..measures.measure import DiscreteMeasure

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    """17 значущих цифр для дійсних чисел, щоб читання відтворювало їх точно"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def config_lines(config: Union[BaseModel, Mapping[str, Any], None]) -> List[str]:
    """Рядки '# key: value' для заголовка файлу"""
    if config is None:
        return []
    data = config.model_dump(mode="json") if isinstance(config, BaseModel) else dict(config)
    lines = []
    for key, value in data.items():
        if value is None:
            continue
        rendered = json.dumps(value, ensure_ascii=False) if isinstance(value, (list, dict)) else format_value(value)
        lines.append(f"# {key}: {rendered}")
    return lines


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]],
              config: Union[BaseModel, Mapping[str, Any], None] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    for line in config_lines(config):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    count = 0
    for row in rows:
        writer.writerow([format_value(v) for v in row])
        count += 1
    path.write_text(buffer.getvalue(), encoding="utf-8")
    logger.debug("💾 %s: %d рядків", path, count)
    return path


def read_csv(path: PathLike) -> Tuple[List[str], List[List[str]]]:
    """(заголовок, рядки) без коментарів '#'"""
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not lines:
        raise MeasureError(f"{path}: файл не містить заголовка")
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def read_config_echo(path: PathLike) -> Dict[str, str]:
    """Пари key: value з коментарів-заголовків"""
    result = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.startswith("# "):
            continue
        key, _, value = line[2:].partition(": ")
        result[key] = value
    return result


def write_measure_csv(path: PathLike, measure: DiscreteMeasure,
                      config: Union[BaseModel, Mapping[str, Any], None] = None) -> Path:
    """Два стовпці atom,weight з атомами за зростанням"""
    return write_csv(path, ["atom", "weight"], zip(measure.atoms.tolist(), measure.weights.tolist()), config)


def read_measure_csv(path: PathLike) -> DiscreteMeasure:
    header, rows = read_csv(path)
    if [h.strip() for h in header] != ["atom", "weight"]:
        raise MeasureError(f"{path}: очікується заголовок 'atom,weight', отримано {header}")
    try:
        atoms = [float(row[0]) for row in rows]
        weights = [float(row[1]) for row in rows]
    except (ValueError, IndexError) as exc:
        raise MeasureError(f"{path}: некоректний рядок ({exc})") from exc
    return DiscreteMeasure(atoms, weights)


def write_json(path: PathLike, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False, allow_nan=True), encoding="utf-8")
    return path
