import json
import os

import pytest

from rwglobal.cli import (EXIT_INPUT, EXIT_OK, EXIT_RESIDUAL, RunConfig, build_parser, main)
from rwglobal.errors import ConfigurationError
from rwglobal.graphs import FeynmanGraph

DATA = os.path.join(os.path.dirname(__file__), "data", "appendix_graphs.json")


def load(path, name):
    with open(os.path.join(path, name + ".json")) as f:
        return json.load(f)


def test_flat_flatness(tmp_path):
    assert main(["flatness", "--flat", "--n", "2", "--output", str(tmp_path)]) == EXIT_OK
    report = load(tmp_path, "flatness")
    assert report["passed"]
    assert all(v == 0.0 for v in report["residuals"].values())
    assert os.path.exists(os.path.join(tmp_path, "flatness.txt"))


def test_report_embeds_flags(tmp_path):
    args = ["grothendieck", "--K", "3", "--full-atiyah", "--output", str(tmp_path)]
    assert main(args) == EXIT_OK
    report = load(tmp_path, "grothendieck")
    assert report["flags"] == {"atiyah_half": False, "redef_R": False}
    assert "antihol_2" in report["diagnostics"]
    assert "antihol_2" not in report["residuals"]


def test_empty_enumeration(tmp_path):
    args = ["graphs", "enumerate", "--n-bulk", "2", "--rep", "B", "--output", str(tmp_path)]
    assert main(args) == EXIT_OK
    report = load(tmp_path, "graphs_enumerate")
    assert "absence of solutions" in report["notes"]
    assert report["data"]["catalog"] == []


def test_graph_catalog_check(tmp_path):
    assert main(["graphs", "check", "--graphs", DATA, "--output", str(tmp_path)]) == EXIT_OK
    report = load(tmp_path, "graphs_check")
    assert report["residuals"]["verdict_mismatches"] == 0.0
    assert report["diagnostics"]["graphs"] == 48.0


def test_graph_catalog_check_positional_file(tmp_path):
    assert main(["graphs", "check", DATA, "--output", str(tmp_path)]) == EXIT_OK
    assert load(tmp_path, "graphs_check")["diagnostics"]["graphs"] == 48.0
    assert main(["graphs", "check", "--output", str(tmp_path)]) == EXIT_INPUT


def test_weights_eval_single_graph(tmp_path):
    theta = FeynmanGraph([("u", "bulk_black"), ("v", "bulk_black")], [("u", "v")] * 3)
    path = tmp_path / "theta.json"
    path.write_text(json.dumps(theta.to_json()))
    args = build_parser().parse_args(["weights", "eval", "--graph", str(path)])
    assert RunConfig.from_args(args).graphs == str(path)
    out = tmp_path / "out"
    assert main(["weights", "eval", "--graph", str(path), "--n", "2", "--output", str(out)]) == EXIT_OK
    assert [w["label"] for w in load(out, "weights_eval")["data"]["weights"]] == ["0"]


def test_ihx_exit_status(tmp_path):
    base = ["weights", "ihx", "--seed", "7", "--n", "2", "--output", str(tmp_path)]
    assert main(base) == EXIT_OK
    assert main(base + ["--perturbation", "0.1"]) == EXIT_RESIDUAL
    assert not load(tmp_path, "weights_ihx")["passed"]


def test_bad_geometry_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"n\": 1, ")
    assert main(["flatness", "--geometry", str(path), "--output", str(tmp_path)]) == EXIT_INPUT
    assert main(["flatness", "--geometry", str(tmp_path / "missing.json"),
                 "--output", str(tmp_path)]) == EXIT_INPUT


def test_nilpotency_rational(tmp_path):
    assert main(["aksz", "nilpotency", "--rational", "--output", str(tmp_path)]) == EXIT_OK
    report = load(tmp_path, "aksz_nilpotency")
    assert report["config"]["ring"] == "rational"


def test_rational_runs_are_deterministic(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert main(["geometry", "--rational", "--K", "2", "--seed", "5", "--output", str(out)]) == EXIT_OK
    a, b = load(first, "geometry"), load(second, "geometry")
    assert a["data"] == b["data"]
    assert a["residuals"] == b["residuals"]
    assert a["config"]["output"] != b["config"]["output"]


def test_config_validation():
    args = build_parser().parse_args(["theta", "--N", "0"])
    with pytest.raises(ConfigurationError):
        RunConfig.from_args(args).validate()
    args = build_parser().parse_args(["weights", "as", "--hyperkahler", "--n", "2"])
    config = RunConfig.from_args(args)
    assert config.name == "weights_as"
    assert config.mode == "hyperkahler"
    with pytest.raises(SystemExit):
        build_parser().parse_args(["graphs", "enumerate", "--rep", "C"])


def test_dimension_help(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["flatness", "--help"])
    assert "holomorphic dimension is 2n" in " ".join(capsys.readouterr().out.split())
