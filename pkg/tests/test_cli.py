import json

import pytest

from dmcd.cli import build_parser, main, settings
from dmcd.graph import new_dag
from dmcd.graphio import write_graph


@pytest.fixture
def graphs(tmp_path):
    truth = new_dag("ABC", [("A", "B"), ("B", "C")])
    write_graph(truth, tmp_path / "truth.json")
    write_graph(new_dag("ABC", [("A", "B"), ("C", "B")]), tmp_path / "rev.json")
    write_graph(new_dag("ABC"), tmp_path / "empty.json")
    return tmp_path


def test_eval_perfect(graphs, capsys):
    assert main(["eval", "--pred", str(graphs / "truth.json"), "--truth", str(graphs / "truth.json")]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert row.split()[1:] == ["0", "1", "0", "0", "1", "1", "1"]


def test_eval_empty_prediction(graphs, capsys):
    assert main(["eval", "--pred", str(graphs / "empty.json"), "--truth", str(graphs / "truth.json"), "--report", str(graphs / "m.json")]) == 0
    report = json.loads((graphs / "m.json").read_text())
    assert report["tpr"] == 0 and report["shd"] == 2


def test_eval_reversal_fixture(graphs, capsys):
    assert main(["eval", "--pred", str(graphs / "rev.json"), "--truth", str(graphs / "truth.json")]) == 0
    row = capsys.readouterr().out.splitlines()[1].split()
    assert row[1] == "1" and row[2] == "0.5"


def test_exit_codes_by_error_family(graphs, tmp_path, capsys):
    (tmp_path / "cyc.json").write_text(json.dumps({"nodes": ["A", "B"], "edges": [["A", "B"], ["B", "A"]]}))
    write_graph(new_dag("AQ", [("A", "Q")]), tmp_path / "q.json")
    truth = str(graphs / "truth.json")
    codes = {
        "config": main(["run", "--metadata", "m.json"]),
        "data": main(["eval", "--pred", str(tmp_path / "absent.json"), "--truth", truth]),
        "validation": main(["eval", "--pred", str(tmp_path / "cyc.json"), "--truth", truth]),
        "mismatch": main(["eval", "--pred", str(tmp_path / "q.json"), "--truth", truth]),
    }
    assert codes == {"config": 2, "data": 3, "validation": 5, "mismatch": 5}
    assert "CycleDetected" in capsys.readouterr().err


def test_gen_then_run_with_mock(tmp_path, capsys):
    fx = tmp_path / "fx"
    assert main(["gen", "--chain", "--nodes", "4", "--samples", "3000", "--seed", "3", "--mock-truth", "--out", str(fx)]) == 0
    out = tmp_path / "out"
    argv = ["run", "--data", str(fx / "data.csv"), "--metadata", str(fx / "metadata.json"), "--truth", str(fx / "truth.json"),
            "--mock-dir", str(fx / "mock"), "--runs", "2", "--out", str(out)]
    assert main(argv) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["f1"] == {"mean": 1.0, "std": 0.0}
    assert "mean ± std (2 runs)" in capsys.readouterr().out


def test_mock_miss_is_a_provider_failure(tmp_path):
    fx = tmp_path / "fx"
    main(["gen", "--chain", "--nodes", "3", "--seed", "1", "--out", str(fx)])
    (fx / "mock").mkdir()
    argv = ["run", "--data", str(fx / "data.csv"), "--metadata", str(fx / "metadata.json"), "--mock-dir", str(fx / "mock"), "--out", str(tmp_path / "o")]
    assert main(argv) == 4


def test_audit_command(tmp_path, capsys):
    fx = tmp_path / "fx"
    main(["gen", "--chain", "--nodes", "3", "--seed", "2", "--out", str(fx)])
    capsys.readouterr()
    argv = ["audit", "--graph", str(fx / "truth.dot"), "--data", str(fx / "data.csv"), "--metadata", str(fx / "metadata.json"), "--report", str(tmp_path / "r.json")]
    assert main(argv) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert json.loads((tmp_path / "r.json").read_text())["pair_count"] == 3


def test_draft_print_prompt(tmp_path, capsys):
    fx = tmp_path / "fx"
    main(["gen", "--nodes", "3", "--seed", "0", "--out", str(fx)])
    capsys.readouterr()
    assert main(["draft", "--metadata", str(fx / "metadata.json"), "--print-prompt", "--out", str(tmp_path / "d")]) == 0
    text = capsys.readouterr().out
    assert all(f"- id: V{i}" in text for i in (1, 2, 3))


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('alpha = 0.01\nruns = 4\nmodel = "from-file"\n')
    args = build_parser().parse_args(["run", "--config", str(cfg), "--runs", "7"])
    s = settings(args)
    assert s["alpha"] == 0.01 and s["runs"] == 7 and s["model"] == "from-file" and s["seed"] == 0


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("alpha = = 1")
    assert main(["run", "--config", str(cfg)]) == 2
