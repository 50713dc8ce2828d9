import json

import pytest

from dcg_evaluator.cli.app import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from dcg_evaluator.core.graph import build_diamond_graph, save_graph
from dcg_evaluator.core.measures.measure import DiscreteMeasure
from dcg_evaluator.core.measures.quantize import quantize_source
from dcg_evaluator.core.measures.sources import discrete, gaussian
from dcg_evaluator.core.utils.serialization import read_config_echo, read_csv, read_measure_csv


@pytest.fixture
def coin_graph(tmp_path):
    path = tmp_path / "coins.json"
    path.write_text(json.dumps({
        "nodes": [
            {"id": "a", "kind": "source", "dist": {"type": "discrete", "atoms": [0, 1], "weights": [0.5, 0.5]}},
            {"id": "b", "kind": "source", "dist": {"type": "discrete", "atoms": [0, 1], "weights": [0.5, 0.5]}},
            {"id": "sum", "kind": "op", "op": "add", "inputs": ["a", "b"]},
        ],
        "terminal": "sum",
    }), encoding="utf-8")
    return path


class TestQuantize:
    def test_writes_measure(self, tmp_path):
        out = tmp_path / "q.csv"
        assert main(["quantize", "--source", "gaussian:0,1", "--n", "3", "--out", str(out)]) == EXIT_OK
        expected, _ = quantize_source(gaussian(0.0, 1.0), 3)
        assert read_measure_csv(out) == expected

    def test_header_echoes_configuration(self, tmp_path):
        out = tmp_path / "q.csv"
        main(["--threads", "2", "quantize", "--source", "uniform-int:1,8", "--n", "1", "--out", str(out)])
        config = read_config_echo(out)
        assert config["command"] == "quantize"
        assert config["n"] == "1"
        assert config["threads"] == "2"
        assert json.loads(config["source"])["type"] == "discrete"
        header, rows = read_csv(out)
        assert header == ["atom", "weight"]
        assert rows == [["2.5", "0.5"], ["6.5", "0.5"]]

    def test_rerun_is_bit_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["quantize", "--source", "pareto:3", "--n", "4", "--out", str(first)])
        main(["quantize", "--source", "pareto:3", "--n", "4", "--out", str(second)])
        assert first.read_text(encoding="utf-8").splitlines()[-16:] == \
            second.read_text(encoding="utf-8").splitlines()[-16:]

    def test_csv_source(self, tmp_path):
        from dcg_evaluator.core.utils.serialization import write_measure_csv

        source = write_measure_csv(tmp_path / "in.csv", DiscreteMeasure.uniform_on(range(1, 9)))
        out = tmp_path / "out.csv"
        assert main(["quantize", "--source", f"csv:{source}", "--n", "1", "--out", str(out)]) == EXIT_OK
        assert read_measure_csv(out) == DiscreteMeasure([2.5, 6.5], [0.5, 0.5])

    def test_tree_output(self, tmp_path):
        tree = tmp_path / "tree.json"
        assert main(["quantize", "--source", "uniform:0,1", "--n", "2", "--tree", str(tree)]) == EXIT_OK
        data = json.loads(tree.read_text(encoding="utf-8"))
        assert len(data["children"]) == 2

    def test_out_dir(self, tmp_path):
        assert main(["--out-dir", str(tmp_path), "quantize", "--source", "point:1", "--n", "2",
                     "--out", "p.csv"]) == EXIT_OK
        assert read_measure_csv(tmp_path / "p.csv") == DiscreteMeasure.point_mass(1.0)

    @pytest.mark.parametrize("source", ["gaussian:0", "laplace:0,1", "gaussian:0,-1", "uniform-int:5,1"])
    def test_bad_source_is_usage_error(self, source):
        assert main(["quantize", "--source", source, "--n", "2"]) == EXIT_USAGE

    def test_infinite_pareto_mean_fails(self):
        assert main(["quantize", "--source", "pareto:1", "--n", "2"]) == EXIT_FAILURE


class TestTables:
    def test_gaussian_rate(self, tmp_path):
        out = tmp_path / "rate.csv"
        assert main(["gaussian-rate", "--n-max", "8", "--out", str(out)]) == EXIT_OK
        header, rows = read_csv(out)
        assert header == ["n", "error", "ratio"]
        assert len(rows) == 9
        assert 1.8 <= float(rows[7][2]) <= 2.2
        assert rows[-1][2] == "nan"

    def test_omega(self, tmp_path, capsys):
        out = tmp_path / "omega.csv"
        assert main(["omega", "--steps", "100", "--out", str(out)]) == EXIT_OK
        header, rows = read_csv(out)
        assert header == ["j", "omega", "normalized"]
        assert len(rows) == 101
        assert float(rows[0][1]) == 0.0
        assert "ω_100" in capsys.readouterr().out


class TestGraphCommands:
    def test_eval_exact(self, coin_graph, tmp_path):
        out = tmp_path / "law.csv"
        assert main(["eval", "--graph", str(coin_graph), "--mode", "exact", "--out", str(out)]) == EXIT_OK
        assert read_measure_csv(out) == DiscreteMeasure([0.0, 1.0, 2.0], [0.25, 0.5, 0.25])

    def test_eval_cq_marginal(self, coin_graph, tmp_path):
        out = tmp_path / "law.csv"
        assert main(["eval", "--graph", str(coin_graph), "--mode", "cq", "--n", "1",
                     "--node", "sum", "--out", str(out)]) == EXIT_OK
        assert len(read_measure_csv(out)) == 2

    def test_eval_mc(self, coin_graph, tmp_path):
        out = tmp_path / "mc.csv"
        assert main(["eval", "--graph", str(coin_graph), "--mode", "mc", "--samples", "5000",
                     "--seed", "3", "--out", str(out)]) == EXIT_OK
        assert read_measure_csv(out).atoms.tolist() == [0.0, 1.0, 2.0]
        assert read_config_echo(out)["seed"] == "3"

    def test_cq_requires_level(self, coin_graph):
        assert main(["eval", "--graph", str(coin_graph), "--mode", "cq"]) == EXIT_USAGE

    def test_unknown_node(self, coin_graph):
        assert main(["eval", "--graph", str(coin_graph), "--mode", "exact", "--node", "zzz"]) == EXIT_USAGE

    def test_atom_cap_exceeded(self, coin_graph, capsys):
        assert main(["--atom-cap", "2", "eval", "--graph", str(coin_graph), "--mode", "cq", "--n", "1"]) == EXIT_FAILURE
        assert "--atom-cap" in capsys.readouterr().err

    def test_malformed_graph(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "nodes": [
                {"id": "s", "kind": "source", "dist": {"type": "gaussian", "mean": 0.0, "std": 0.0}},
                {"id": "v", "kind": "op", "op": "affine", "inputs": ["s"]},
            ],
            "terminal": "v",
        }), encoding="utf-8")
        assert main(["bound", "--graph", str(path), "--n", "3"]) == EXIT_FAILURE
        err = capsys.readouterr().err
        assert "'s'" in err
        assert "std" in err

    def test_bound_report(self, tmp_path, capsys):
        graph = save_graph(build_diamond_graph(discrete(DiscreteMeasure.uniform_on(range(1, 9)))),
                           tmp_path / "diamond.json")
        out = tmp_path / "bound.json"
        assert main(["bound", "--graph", str(graph), "--n", "1", "--crude", "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["total"] == pytest.approx(14.0)
        assert report["terms"][0]["paths"] == 2
        assert report["crude"] >= report["total"]
        assert report["config"]["command"] == "bound"
        assert "Оцінка" in capsys.readouterr().out

    def test_missing_graph_file(self, tmp_path):
        assert main(["bound", "--graph", str(tmp_path / "none.json"), "--n", "1"]) == EXIT_USAGE


class TestEm:
    def test_small_grid(self, tmp_path):
        out, svg = tmp_path / "em.csv", tmp_path / "em.svg"
        code = main(["em", "--steps", "1,2", "--n", "3..4", "--ref-samples", "5000", "--seed", "1",
                     "--out", str(out), "--svg", str(svg)])
        assert code == EXIT_OK
        header, rows = read_csv(out)
        assert header == ["N", "n", "w1", "bound_fit", "diam", "support", "runtime_ms"]
        assert [(row[0], row[1]) for row in rows] == [("1", "3"), ("1", "4"), ("2", "3"), ("2", "4")]
        assert json.loads(read_config_echo(out)["steps"]) == [1, 2]
        assert svg.read_text(encoding="utf-8").lstrip().startswith("<svg")

    def test_bad_step_list(self):
        assert main(["em", "--steps", "1,x"]) == EXIT_USAGE

    def test_zero_level_rejected(self):
        assert main(["em", "--steps", "1", "--n", "0", "--ref-samples", "10"]) == EXIT_USAGE


class TestMisc:
    def test_sort_demo(self, capsys):
        assert main(["sort-demo", "--values", "1,2,3,4", "--count", "3"]) == EXIT_OK
        assert capsys.readouterr().out.count("✅") == 3

    def test_sort_demo_bad_k(self):
        assert main(["sort-demo", "--count", "3", "--k", "4"]) == EXIT_USAGE

    def test_unknown_option(self):
        assert main(["quantize", "--bogus"]) == EXIT_USAGE

    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "1.0.0" in capsys.readouterr().out

    @pytest.mark.slow
    def test_selfcheck(self, capsys):
        assert main(["selfcheck"]) == EXIT_OK
        assert "12/12" in capsys.readouterr().out
