import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from prefgame.cli import bundled_config, main
from prefgame.games import appendix_e_game
from prefgame.metrics import execute, write_json
from prefgame.plot import VERTICES, project, simplex_svg
from prefgame.solvers import SolverConfig

GOLDEN = Path(__file__).parent / "golden"
GAME_FILE = bundled_config("appendix_e_game.json")
NASH = np.array([4, 3, 4]) / 11
PI_TAU_UNIFORM = np.array([0.33713585006567399237, 0.28346410909888174653, 0.37940004083544426109])
SVG_NS = "{http://www.w3.org/2000/svg}"


def write_config(tmp_path, runs, **extra):
    cfg = {"game": {"n": 3, "p": appendix_e_game().matrix.tolist()}, "runs": runs, **extra}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


def nash_json(capsys, *args):
    assert main(["nash", *map(str, args)]) == 0
    return json.loads(capsys.readouterr().out)


class TestNash:
    def test_appendix_e(self, capsys):
        out = nash_json(capsys, GAME_FILE)
        assert np.abs(np.array(out["policy"]) - NASH).max() <= 1e-10
        assert out["duality_gap"] <= 1e-10

    def test_indifferent(self, tmp_path, capsys):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"n": 2, "p": [[0.5, 0.5], [0.5, 0.5]]}))
        assert nash_json(capsys, path)["policy"] == [0.5, 0.5]

    def test_tau(self, capsys):
        out = nash_json(capsys, GAME_FILE, "--tau", "0.1")
        np.testing.assert_allclose(out["policy"], PI_TAU_UNIFORM, atol=1e-11)

    def test_tau_with_ref(self, tmp_path, capsys):
        ref = tmp_path / "ref.json"
        ref.write_text(json.dumps({"policy": NASH.tolist()}))
        out = nash_json(capsys, GAME_FILE, "--tau", "0.1", "--ref", ref)
        np.testing.assert_allclose(out["policy"], NASH, atol=1e-12)

    def test_missing_file(self, tmp_path):
        assert main(["nash", str(tmp_path / "nope.json")]) == 3

    def test_invalid_game(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"n": 2, "p": [[0.5, 0.7], [0.7, 0.5]]}))
        assert main(["nash", str(path)]) == 1

    def test_bad_json(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text("{oops")
        assert main(["nash", str(path)]) == 1


class TestRun:
    def test_bundled_appendix_e(self, tmp_path):
        assert main(["run", "--config", "appendix_e.json", "--out", str(tmp_path), "--jobs", "1"]) == 0
        index = json.loads((tmp_path / "index.json").read_text())["runs"]
        assert [e["algorithm"] for e in index] == ["MWU", "IterDPO", "IterIPO", "SPPO", "INPO", "COMAL"]
        comal = next(e for e in index if e["algorithm"] == "COMAL")
        assert comal["summary"]["final_linf_to_nash"] < 1e-3
        for e in index:
            for f in e["files"]:
                assert (tmp_path / f).exists()
        ET.parse(tmp_path / "trajectories.svg")

    def test_empty_runs(self, tmp_path, capsys):
        path = write_config(tmp_path, [])
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
        assert "runs" in capsys.readouterr().err

    def test_unknown_field(self, tmp_path, capsys):
        path = write_config(tmp_path, [{"algorithm": "MWU", "eta": 0.3, "initial": [0.2, 0.5, 0.3], "etta": 1}])
        assert main(["run", "--config", str(path)]) == 1
        assert "runs/0" in capsys.readouterr().err

    def test_syntax_error_line(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "game": 1,\n  oops\n}')
        assert main(["run", "--config", str(path)]) == 1
        assert "line 3" in capsys.readouterr().err

    def test_semantic_error(self, tmp_path, capsys):
        path = write_config(tmp_path, [{"algorithm": "INPO", "eta": 0.3, "tau": 0, "initial": [0.2, 0.5, 0.3]}])
        assert main(["run", "--config", str(path)]) == 1
        assert "tau" in capsys.readouterr().err

    def test_seed_override(self, tmp_path):
        runs = [
            {"algorithm": "MWU", "eta": 0.3, "outer_iterations": 5, "initial": [0.2, 0.5, 0.3]},
            {"algorithm": "MWU", "eta": 0.3, "outer_iterations": 5, "initial": [0.2, 0.5, 0.3],
             "oracle": {"mode": "sampled", "pairs_per_iteration": 1000}},
        ]
        path = write_config(tmp_path, runs)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(path), "--out", str(a), "--format", "csv", "--jobs", "1"]) == 0
        assert main(["run", "--config", str(path), "--out", str(b), "--format", "csv", "--seed", "7", "--jobs", "1"]) == 0

        def body(d, k):
            entry = json.loads((d / "index.json").read_text())["runs"][k]
            text = (d / entry["files"][0]).read_text()
            return [line.split(",", 1)[1] for line in text.splitlines()[1:]]

        assert body(a, 0) == body(b, 0)
        assert body(a, 1) != body(b, 1)

    def test_reproducible_and_parallel(self, tmp_path):
        runs = [
            {"algorithm": a, "eta": 0.3, "tau": 0.1, "outer_iterations": 20, "inner_iterations": 5, "initial": [0.2, 0.5, 0.3]}
            for a in ("MWU", "COMAL", "OMWU")
        ]
        path = write_config(tmp_path, runs, emit=["csv", "json", "svg"])
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(path), "--out", str(a), "--jobs", "1"]) == 0
        assert main(["run", "--config", str(path), "--out", str(b), "--jobs", "2"]) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())

        def strip(obj):
            if isinstance(obj, dict):
                return {k: strip(v) for k, v in obj.items() if k != "wall_time_ms"}
            if isinstance(obj, list):
                return [strip(v) for v in obj]
            return obj

        for name in names:
            if name.endswith(".json"):
                assert strip(json.loads((a / name).read_text())) == strip(json.loads((b / name).read_text()))
            else:
                assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_failed_run_recorded(self, tmp_path):
        # a transitive game has a pure equilibrium, outside the scope of the tolerance schedule
        cfg = {
            "game": {"n": 3, "p": [[0.5, 0.2, 0.3], [0.8, 0.5, 0.6], [0.7, 0.4, 0.5]]},
            "runs": [
                {"algorithm": "MWU", "eta": 0.3, "outer_iterations": 3, "initial": [0.2, 0.5, 0.3]},
                {"algorithm": "COMAL", "eta": 0.2, "tau": 0.1, "outer_iterations": 3,
                 "epsilon_schedule": "Theoretical", "initial": [0.2, 0.5, 0.3]},
            ],
        }
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--jobs", "1"]) == 2
        index = json.loads((tmp_path / "o" / "index.json").read_text())["runs"]
        assert index[0]["status"] == "ok" and index[1]["status"] == "error"
        assert (tmp_path / "o" / index[0]["files"][0]).exists()

    def test_game_file_relative(self, tmp_path):
        (tmp_path / "game.json").write_text(GAME_FILE.read_text())
        cfg = {"game": "game.json", "runs": [{"algorithm": "MWU", "eta": 0.3, "outer_iterations": 2, "initial": [0.2, 0.5, 0.3]}],
               "output_dir": "results"}
        (tmp_path / "exp.json").write_text(json.dumps(cfg))
        assert main(["run", "--config", str(tmp_path / "exp.json")]) == 0
        assert (tmp_path / "results" / "index.json").exists()

    def test_output_not_a_directory(self, tmp_path):
        path = write_config(tmp_path, [{"algorithm": "MWU", "eta": 0.3, "initial": [0.2, 0.5, 0.3]}])
        (tmp_path / "file").write_text("x")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "file")]) == 3

    def test_bad_jobs(self, tmp_path):
        path = write_config(tmp_path, [{"algorithm": "MWU", "eta": 0.3, "initial": [0.2, 0.5, 0.3]}])
        assert main(["run", "--config", str(path), "--jobs", "0"]) == 1

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json")]) == 3


def polylines(svg_path):
    root = ET.parse(svg_path).getroot()
    return root, root.findall(f"{SVG_NS}polyline")


class TestPlot:
    def record(self, tmp_path, config, name):
        path = tmp_path / name
        write_json(execute(appendix_e_game(), config), path)
        return path

    def test_comal_ends_at_star(self, tmp_path):
        path = self.record(tmp_path, SolverConfig("COMAL", 0.3, 0.1, 200, 25, initial=(0.2, 0.5, 0.3)), "c.json")
        assert main(["plot", str(path), "--out", str(tmp_path / "p.svg")]) == 0
        root, lines = polylines(tmp_path / "p.svg")
        last = np.array(lines[0].get("points").split()[-1].split(","), dtype=float)
        star = project(NASH)[0]
        assert np.hypot(*(last - star)) < 0.5
        assert root.find(f"{SVG_NS}circle").get("fill") == "blue"
        assert root.find(f"{SVG_NS}polygon[@class='nash']").get("fill") == "red"

    def test_single_point(self, tmp_path):
        path = self.record(tmp_path, SolverConfig("COMAL", 0.3, 0.1, 1, 1, initial=(0.2, 0.5, 0.3)), "one.json")
        assert main(["plot", str(path), "--out", str(tmp_path / "p.svg")]) == 0
        root, lines = polylines(tmp_path / "p.svg")
        assert len(lines) == 1 and len(lines[0].get("points").split()) == 1
        assert root.find(f"{SVG_NS}circle") is not None

    def test_two_trajectories(self, tmp_path):
        a = self.record(tmp_path, SolverConfig("MWU", 0.3, outer_iterations=50, initial=(0.2, 0.5, 0.3)), "a.json")
        b = self.record(tmp_path, SolverConfig("MWU", 0.1, outer_iterations=50, initial=(0.2, 0.5, 0.3)), "b.json")
        assert main(["plot", str(a), str(b), "--out", str(tmp_path / "p.svg")]) == 0
        root, lines = polylines(tmp_path / "p.svg")
        assert len(lines) == 2
        assert lines[0].get("stroke") != lines[1].get("stroke")
        assert len(root.findall(f"{SVG_NS}polygon[@class='simplex']")) == 1

    def test_csv_input(self, tmp_path):
        assert main(["run", "--config", "theorem2_rate.json", "--out", str(tmp_path), "--format", "csv"]) == 0
        csvs = list(tmp_path.glob("*.csv"))
        assert main(["plot", str(csvs[0]), "--out", str(tmp_path / "p.svg")]) == 0
        ET.parse(tmp_path / "p.svg")

    def test_wrong_dimension(self, tmp_path):
        cfg = {"game": {"n": 2, "p": [[0.5, 0.7], [0.3, 0.5]]},
               "runs": [{"algorithm": "MWU", "eta": 0.3, "outer_iterations": 2, "initial": [0.5, 0.5]}]}
        (tmp_path / "e.json").write_text(json.dumps(cfg))
        assert main(["run", "--config", str(tmp_path / "e.json"), "--out", str(tmp_path / "o"), "--format", "json"]) == 0
        rec = [p for p in (tmp_path / "o").glob("*.json") if p.name != "index.json"][0]
        assert main(["plot", str(rec), "--out", str(tmp_path / "p.svg")]) == 1

    def test_golden_layout(self):
        svg = simplex_svg(
            [("MWU", [[0.2, 0.5, 0.3], [0.3, 0.4, 0.3]]), ("COMAL", [[0.2, 0.5, 0.3], list(NASH)])], nash=NASH
        )
        assert svg == (GOLDEN / "two_paths.svg").read_text()

    def test_vertex_convention(self):
        xy = project(np.eye(3))
        assert xy[0][0] < xy[1][0] < xy[2][0]  # a left, b middle, c right
        assert xy[1][1] < xy[0][1] == xy[2][1]  # b on top
        np.testing.assert_array_equal(xy, VERTICES)


class TestBundled:
    @pytest.mark.parametrize("name", ["appendix_e.json", "appendix_e_sampled.json", "theorem2_rate.json", "theorem3_schedule.json"])
    def test_validates(self, name):
        from prefgame.cli import Experiment

        exp = Experiment.load(name)
        assert exp.model == appendix_e_game()
        assert exp.runs

    def test_theorem3_runs(self, tmp_path):
        assert main(["run", "--config", "theorem3_schedule.json", "--out", str(tmp_path), "--format", "json"]) == 0
        entry = json.loads((tmp_path / "index.json").read_text())["runs"][0]
        assert entry["summary"]["final_linf_to_nash"] < 1e-3
