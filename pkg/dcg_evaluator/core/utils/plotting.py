"""
Статичні SVG-графіки похибки через шаблони Jinja2
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union
import math

from jinja2 import Environment, PackageLoader

from .serialization import format_value

PANEL_WIDTH = 440
PANEL_HEIGHT = 320
MARGIN = 56
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_environment = Environment(loader=PackageLoader("dcg_evaluator", "templates"), autoescape=True,
                           trim_blocks=True, lstrip_blocks=True)


@dataclass
class Series:
    label: str
    x: List[float]
    y: List[float]


@dataclass
class Panel:
    title: str
    x_label: str
    y_label: str
    series: List[Series] = field(default_factory=list)
    log_y: bool = True


def _ticks(low: float, high: float, count: int = 5) -> List[float]:
    if high <= low:
        return [low]
    step = (high - low) / (count - 1)
    return [low + i * step for i in range(count)]


def _layout(panel: Panel, offset_x: float) -> dict:
    """Переводить дані панелі в піксельні координати"""
    points = [(x, y) for s in panel.series for x, y in zip(s.x, s.y) if not panel.log_y or y > 0]
    if not points:
        points = [(0.0, 1.0)]
    transform = (lambda v: math.log10(v)) if panel.log_y else (lambda v: v)
    xs = [p[0] for p in points]
    ys = [transform(p[1]) for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if panel.log_y:
        # Межі по цілих декадах
        y_lo, y_hi = math.floor(y_lo), math.ceil(y_hi)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    left, top = offset_x + MARGIN, MARGIN
    width, height = PANEL_WIDTH - 2 * MARGIN, PANEL_HEIGHT - 2 * MARGIN

    def px(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * width

    def py(y: float) -> float:
        return top + height - (transform(y) - y_lo) / (y_hi - y_lo) * height

    series = []
    for i, s in enumerate(panel.series):
        kept: List[Tuple[float, float]] = [(x, y) for x, y in zip(s.x, s.y) if not panel.log_y or y > 0]
        series.append({
            "label": s.label,
            "color": PALETTE[i % len(PALETTE)],
            "points": [{"px": px(x), "py": py(y), "x": format_value(x), "y": format_value(y)} for x, y in kept],
            "path": " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in kept),
        })

    y_ticks = []
    for value in _ticks(y_lo, y_hi):
        label = f"1e{value:.3g}" if panel.log_y else f"{value:.3g}"
        position = top + height - (value - y_lo) / (y_hi - y_lo) * height
        y_ticks.append({"py": position, "label": label})
    x_ticks = [{"px": px(v), "label": f"{v:.4g}"} for v in _ticks(x_lo, x_hi)]

    return {
        "title": panel.title, "x_label": panel.x_label, "y_label": panel.y_label,
        "left": left, "top": top, "width": width, "height": height,
        "series": series, "x_ticks": x_ticks, "y_ticks": y_ticks,
    }


def render_line_charts(panels: Sequence[Panel], title: str) -> str:
    """Панелі поруч в одному SVG-документі"""
    layouts = [_layout(panel, i * PANEL_WIDTH) for i, panel in enumerate(panels)]
    template = _environment.get_template("line_chart.svg.j2")
    return template.render(title=title, panels=layouts,
                           width=PANEL_WIDTH * len(panels), height=PANEL_HEIGHT + 24)


def em_error_figure(records) -> str:
    """log W_1 як функція N (для кожного n) та як функція n (для кожного N)"""
    by_n = {}
    by_N = {}
    for r in records:
        by_n.setdefault(r.n, []).append((r.N, r.w1))
        by_N.setdefault(r.N, []).append((r.n, r.w1))

    left = Panel("W1 vs N", "N", "W1", [
        Series(f"n={n}", [p[0] for p in sorted(pts)], [p[1] for p in sorted(pts)])
        for n, pts in sorted(by_n.items())
    ])
    right = Panel("W1 vs n", "n", "W1", [
        Series(f"N={N}", [p[0] for p in sorted(pts)], [p[1] for p in sorted(pts)])
        for N, pts in sorted(by_N.items())
    ])
    return render_line_charts([left, right], "Euler-Maruyama: W1(Y_N, Y_N^(n),c)")


def write_svg(path: Union[str, Path], svg: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
