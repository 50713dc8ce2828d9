"""
Командний рядок DCG Evaluator

Кожна команда виводить результат у консоль і, за потреби, у CSV/JSON/SVG;
кожен CSV починається з рядків '# key: value' з повною конфігурацією запуску.
"""

from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import logging
import math
import sys

import click
from pydantic import BaseModel

from .. import __version__
from ..core.config import Settings
from ..core.errors import DcgError
from ..core.evaluator import GraphEvaluator
from ..core.graph.builders import build_bubble_sort_graph
from ..core.graph.document import load_graph
from ..core.measures.gaussian import gaussian_rate_table, omega_sequence
from ..core.measures.measure import DiscreteMeasure, wasserstein1
from ..core.measures.quantize import MeanSplitQuantizer
from ..core.measures.sources import (
    SourceSpec, ParetoSource, discrete, gaussian, point, uniform,
)
from ..core.sde.euler_maruyama import (
    DEFAULT_N_VALUES, DEFAULT_STEP_VALUES, EmExperiment, SdeSpec, summarize_experiment,
)
from ..core.selfcheck import SelfCheck
from ..core.utils.calculator import BoundCalculator
from ..core.utils.plotting import em_error_figure, write_svg
from ..core.utils.serialization import read_measure_csv, write_csv, write_json, write_measure_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class RunConfig(BaseModel):
    """Повна розв'язана конфігурація запуску, що повторюється в заголовку кожного CSV"""

    command: str
    version: str = __version__
    threads: int
    atom_cap: int
    path_cap: int
    merge_tolerance: float
    options: Dict[str, Any]

    def echo(self) -> Dict[str, Any]:
        data = self.model_dump(exclude={"options"})
        data.update({key: value for key, value in self.options.items() if value is not None})
        return data


class AppContext:
    def __init__(self, settings: Settings, out_dir: Optional[Path]):
        self.settings = settings
        self.out_dir = out_dir

    def output(self, path: Optional[Path]) -> Optional[Path]:
        if path is None:
            return None
        if self.out_dir is not None and not path.is_absolute():
            return self.out_dir / path
        return path

    def config(self, command: str, **options: Any) -> RunConfig:
        rendered = {k: (str(v) if isinstance(v, Path) else v) for k, v in options.items()}
        return RunConfig(command=command, threads=self.settings.threads, atom_cap=self.settings.atom_cap,
                         path_cap=self.settings.path_cap, merge_tolerance=self.settings.merge_tolerance,
                         options=rendered)


class SourceParam(click.ParamType):
    """gaussian:m,s | uniform:a,b | uniform-int:a,b | point:c | pareto:α[,scale] | csv:шлях"""

    name = "source"

    def convert(self, value, param, ctx) -> SourceSpec:
        if isinstance(value, SourceSpec):
            return value
        kind, _, args = str(value).partition(":")
        try:
            if kind == "csv":
                return discrete(read_measure_csv(args))
            numbers = [float(a) for a in args.split(",")] if args else []
            if kind == "gaussian" and len(numbers) == 2:
                return gaussian(*numbers)
            if kind == "uniform" and len(numbers) == 2:
                return uniform(*numbers)
            if kind == "point" and len(numbers) == 1:
                return point(numbers[0])
            if kind == "uniform-int" and len(numbers) == 2:
                lo, hi = int(numbers[0]), int(numbers[1])
                if lo > hi:
                    self.fail(f"uniform-int: потрібно a ≤ b, отримано {lo}, {hi}", param, ctx)
                return discrete(DiscreteMeasure.uniform_on(range(lo, hi + 1)))
            if kind == "pareto" and len(numbers) in (1, 2):
                return ParetoSource(alpha=numbers[0], scale=numbers[1] if len(numbers) == 2 else 1.0)
        except (ValueError, OSError, DcgError) as exc:
            self.fail(f"{value!r}: {exc}", param, ctx)
        self.fail(f"{value!r}: очікується {self.__doc__}", param, ctx)


class IntListParam(click.ParamType):
    """Список цілих: '1,100,200' або діапазон '4..12'"""

    name = "int-list"

    def convert(self, value, param, ctx) -> List[int]:
        if isinstance(value, (list, tuple)):
            return [int(v) for v in value]
        result: List[int] = []
        try:
            for token in str(value).split(","):
                token = token.strip()
                if ".." in token:
                    lo, hi = (int(part) for part in token.split(".."))
                    result.extend(range(lo, hi + 1))
                elif token:
                    result.append(int(token))
        except ValueError:
            self.fail(f"{value!r}: очікується список цілих чисел", param, ctx)
        if not result:
            self.fail("порожній список", param, ctx)
        return result


def configure_logging(verbose: bool) -> None:
    package_logger = logging.getLogger("dcg_evaluator")
    package_logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    # Повторний виклик main() замінює обробник, щоб писати в поточний sys.stderr
    for old in [h for h in package_logger.handlers if getattr(h, "_dcg_cli", False)]:
        package_logger.removeHandler(old)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler._dcg_cli = True
    package_logger.addHandler(handler)


@click.group()
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Максимум робочих потоків")
@click.option("--atom-cap", type=click.IntRange(min=1), default=2 ** 24, show_default=True,
              help="Ліміт атомів спільного закону")
@click.option("--path-cap", type=click.IntRange(min=1), default=10 ** 6, show_default=True,
              help="Ліміт кількості шляхів")
@click.option("--merge-tolerance", type=click.FloatRange(min=0.0), default=1e-12, show_default=True,
              help="Атоми ближчі за цей поріг зливаються")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Каталог для відносних шляхів виводу")
@click.option("--verbose", "-v", is_flag=True, help="Детальний журнал")
@click.version_option(__version__, prog_name="dcg")
@click.pass_context
def cli(ctx, threads, atom_cap, path_cap, merge_tolerance, out_dir, verbose):
    """Квантизовані розподіли на обчислювальних графах та оцінки похибки W1"""
    configure_logging(verbose)
    settings = Settings(threads=threads, atom_cap=atom_cap, path_cap=path_cap, merge_tolerance=merge_tolerance)
    ctx.obj = AppContext(settings, out_dir)


@cli.command()
@click.option("--source", "source", type=SourceParam(), required=True, help=SourceParam.__doc__)
@click.option("--n", "n", type=click.IntRange(min=0), required=True, help="Рівень квантизації")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV atom,weight")
@click.option("--tree", type=click.Path(dir_okay=False, path_type=Path), default=None, help="JSON дерева клітинок")
@click.pass_obj
def quantize(app: AppContext, source, n, out, tree):
    """Квантизація поділом за середнім T(μ, n)"""
    quantizer = MeanSplitQuantizer(app.settings)
    measure, cells = quantizer.quantize_source(source, n, with_tree=tree is not None)
    error = quantizer.quantization_error(source, n)

    click.echo(f"✅ {source.kind}: {len(measure)} атомів, W1(μ, μ^({n})) = {error:.10g}")
    for atom, weight in measure.pairs()[:16]:
        click.echo(f"   {atom:>22.15g}  {weight:.15g}")
    if len(measure) > 16:
        click.echo(f"   ... ще {len(measure) - 16}")

    config = app.config("quantize", source=source.to_dict(), n=n, out=out, tree=tree)
    if out is not None:
        path = write_measure_csv(app.output(out), measure, config.echo())
        click.echo(f"💾 {path}")
    if tree is not None:
        path = write_json(app.output(tree), cells.to_dict())
        click.echo(f"💾 {path}")


@cli.command("gaussian-rate")
@click.option("--n-max", type=click.IntRange(1, 20), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def gaussian_rate(app: AppContext, n_max, out):
    """W1(N(0,1), μ^(n)) для n = 0..n_max та відношення сусідніх похибок"""
    table = gaussian_rate_table(n_max)
    rows = []
    for current, following in zip(table, table[1:] + [None]):
        ratio = current.error / following.error if following is not None and following.error > 0 else math.nan
        rows.append((current.n, current.error, ratio))
        click.echo(f"📊 n={current.n:>2}  W1={current.error:.12e}  ratio={ratio:.4f}")
    if out is not None:
        path = write_csv(app.output(out), ["n", "error", "ratio"], rows,
                         app.config("gaussian-rate", n_max=n_max, out=out).echo())
        click.echo(f"💾 {path}")


@cli.command()
@click.option("--steps", type=click.IntRange(min=1), required=True, help="J, кількість кроків")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def omega(app: AppContext, steps, out):
    """ω_0 = 0, ω_(j+1) = E[X | X ≥ ω_j]"""
    sequence = omega_sequence(steps)
    normalized = [math.nan] + sequence.normalized().tolist()
    click.echo(f"📊 ω_{steps} = {sequence[steps]:.12g}, ω/√(2J) = {normalized[-1]:.6f}")
    if out is not None:
        rows = zip(range(steps + 1), sequence.values.tolist(), normalized)
        path = write_csv(app.output(out), ["j", "omega", "normalized"], rows,
                         app.config("omega", steps=steps, out=out).echo())
        click.echo(f"💾 {path}")


@cli.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--n", "n", type=click.IntRange(min=0), required=True)
@click.option("--constant", type=click.Choice(["loose", "tight"]), default="loose", show_default=True)
@click.option("--crude/--no-crude", default=False, help="Також груба оцінка")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="JSON звіт")
@click.pass_obj
def bound(app: AppContext, graph_path, n, constant, crude, out):
    """Оцінка W1(μ_Δ, μ_Δ^(n),c) з розкладом по джерелах"""
    graph = load_graph(graph_path)
    calculator = BoundCalculator(app.settings)
    report = calculator.theorem1_bound(graph, n, constant)

    click.echo(f"📊 Оцінка (n={n}, {constant}): {report.total:.10g}")
    for term in report.terms:
        click.echo(
            f"   {term.source}: W1={term.quantization_error:.6g}  diam={term.diameter:.6g}  "
            f"шляхів={term.paths}  ΣΠLip={term.distortion:.6g}  внесок={term.contribution:.6g}"
        )
    data = report.model_dump()
    if crude:
        data["crude"] = calculator.crude_bound(graph, n, constant)
        click.echo(f"📊 Груба оцінка: {data['crude']:.10g}")
    if out is not None:
        data["config"] = app.config("bound", graph=graph_path, n=n, constant=constant, crude=crude).echo()
        path = write_json(app.output(out), data)
        click.echo(f"💾 {path}")


@cli.command("eval")
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--mode", type=click.Choice(["exact", "cq", "mc"]), default="cq", show_default=True)
@click.option("--n", "n", type=click.IntRange(min=0), default=None, help="Рівень квантизації (cq; exact для неперервних)")
@click.option("--samples", type=click.IntRange(min=1), default=10 ** 5, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--node", default=None, help="Вивести маргінальний закон проміжного вузла")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def evaluate(app: AppContext, graph_path, mode, n, samples, seed, node, out):
    """Закон терміналу графа: exact | cq | mc"""
    graph = load_graph(graph_path)
    if mode == "cq" and n is None:
        raise click.UsageError("--mode cq потребує --n")
    if mode == "mc" and node is not None:
        raise click.UsageError("--node не підтримується в режимі mc")
    if node is not None and node not in graph:
        raise click.BadParameter(f"вузол '{node}' відсутній у графі", param_hint="--node")

    result = GraphEvaluator(app.settings).evaluate(graph, mode, n=n, samples=samples, seed=seed,
                                                   marginals=[node] if node else [])
    measure = result.marginals[node] if node else result.terminal_measure()
    target = node or graph.terminal
    click.echo(f"✅ {mode}: закон '{target}' має {len(measure)} атомів, "
               f"середнє {measure.mean():.10g}, діаметр {measure.diameter():.10g}")
    for stats in result.node_stats.values():
        marker = "🗜️" if stats.compressed else "  "
        click.echo(f"  {marker} {stats.node}: {stats.support_before} → {stats.support_after} ({stats.wall_ms:.1f} мс)")

    if out is not None:
        config = app.config("eval", graph=graph_path, mode=mode, n=n, samples=samples, seed=seed, node=node, out=out)
        path = write_measure_csv(app.output(out), measure, config.echo())
        click.echo(f"💾 {path}")


@cli.command()
@click.option("--mu", type=float, default=0.05, show_default=True)
@click.option("--sigma", type=click.FloatRange(min=0.0, min_open=True), default=0.4, show_default=True)
@click.option("--y0", type=float, default=100.0, show_default=True)
@click.option("--T", "horizon", type=click.FloatRange(min=0.0, min_open=True), default=1.0, show_default=True)
@click.option("--steps", type=IntListParam(), default=",".join(map(str, DEFAULT_STEP_VALUES)), show_default=True,
              help="Значення N")
@click.option("--n", "n_values", type=IntListParam(), default=",".join(map(str, DEFAULT_N_VALUES)), show_default=True,
              help="Значення n")
@click.option("--ref-samples", type=click.IntRange(min=1), default=10 ** 6, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--svg", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def em(app: AppContext, mu, sigma, y0, horizon, steps, n_values, ref_samples, seed, out, svg):
    """W1 між еталоном Монте-Карло для Y_N та μ_N^(n),c для геометричного броунівського руху"""
    if any(N < 1 for N in steps) or any(n < 1 for n in n_values):
        raise click.BadParameter("усі N та n мають бути ≥ 1")
    spec = SdeSpec.gbm(mu=mu, sigma=sigma, y0=y0, T=horizon, N=1)
    click.echo(f"🔍 {spec.name}, Y0={y0:g}, T={horizon:g}: {len(steps)}×{len(n_values)} комірок")
    records = EmExperiment(spec, app.settings, progress=True).run(n_values, steps, ref_samples, seed)

    summary = summarize_experiment(records)
    for n, trend in summary.by_n.items():
        click.echo(f"📊 n={n}: log W1 ~ √N, R²={trend.r_squared:.3f}, зростає: {'так' if trend.increasing else 'ні'}")
    for N, trend in summary.by_N.items():
        click.echo(f"📊 N={N}: нахил log₂ W1 по n = {trend.slope:.3f}")

    config = app.config("em", mu=mu, sigma=sigma, y0=y0, T=horizon, steps=steps, n=n_values,
                        ref_samples=ref_samples, seed=seed, out=out, svg=svg)
    if out is not None:
        columns = ["N", "n", "w1", "bound_fit", "diam", "support", "runtime_ms"]
        rows = [[getattr(r, c) for c in columns] for r in records]
        path = write_csv(app.output(out), columns, rows, config.echo())
        click.echo(f"💾 {path}")
    if svg is not None:
        path = write_svg(app.output(svg), em_error_figure(records))
        click.echo(f"💾 {path}")


@cli.command("sort-demo")
@click.option("--values", "values", default="1,2,3,4", show_default=True, help="Носій рівномірного розподілу")
@click.option("--count", type=click.IntRange(min=2, max=8), default=3, show_default=True, help="Кількість джерел")
@click.option("--k", "k", type=click.IntRange(min=1), default=None, help="Порядкова статистика (усі, якщо не задано)")
@click.pass_obj
def sort_demo(app: AppContext, values, count, k):
    """Порядкові статистики через граф сортування бульбашкою проти прямого перебору"""
    try:
        support = [float(v) for v in values.split(",")]
    except ValueError:
        raise click.BadParameter(f"{values!r}: очікується список чисел", param_hint="--values") from None
    if k is not None and k > count:
        raise click.BadParameter(f"k має бути ≤ {count}", param_hint="--k")

    source = discrete(DiscreteMeasure.uniform_on(support))
    evaluator = GraphEvaluator(app.settings)
    failures = 0
    for order_k in ([k] if k else range(1, count + 1)):
        graph = build_bubble_sort_graph([source] * count, order_k)
        result = evaluator.eval_exact_joint(graph).measure
        brute = DiscreteMeasure.uniform_on([sorted(t)[order_k - 1] for t in product(support, repeat=count)])
        distance = wasserstein1(result, brute)
        ok = distance <= 1e-12
        failures += not ok
        pairs = ", ".join(f"{w:.4g}δ({x:g})" for x, w in result.pairs())
        click.echo(f"{'✅' if ok else '❌'} X_({order_k}) [{len(graph)} вузлів]: {pairs}")
    return EXIT_FAILURE if failures else EXIT_OK


@cli.command()
@click.pass_obj
def selfcheck(app: AppContext):
    """Швидкий набір перевірок інваріантів"""
    results = SelfCheck(app.settings).run()
    for result in results:
        click.echo(f"{'✅' if result.passed else '❌'} {result.name}: {result.detail} ({result.wall_ms:.0f} мс)")
    failed = sum(not r.passed for r in results)
    click.echo(f"📊 Пройдено {len(results) - failed}/{len(results)}")
    return EXIT_FAILURE if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входу: 0 - успіх, 1 - помилка використання, 2 - чисельна або валідаційна помилка
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="dcg", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("⏹️  Перервано", err=True)
        return EXIT_USAGE
    except (DcgError, ValueError) as exc:
        click.echo(f"❌ {exc}", err=True)
        return EXIT_FAILURE
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
