import json

import numpy as np
import pytest

from dmcd.data import ScmSpec, VariableMeta, dataset_from_arrays, write_metadata, write_table
from dmcd.errors import ConfigError
from dmcd.graph import new_dag
from dmcd.graphio import read_graph
from dmcd.pipeline import RunConfig, run_pipeline, run_seeds
from dmcd.providers import ScriptedProvider
from doubles import delete_spurious, graph_response, is_revision, tree_bytes, write_fixture

CHAIN = new_dag(["V1", "V2", "V3"], [("V1", "V2"), ("V2", "V3")])
CHAIN_SPEC = ScmSpec(dag=CHAIN, coefficients={("V1", "V2"): 1.2, ("V2", "V3"): -0.9}, seed=4)


@pytest.fixture
def chain(tmp_path):
    return write_fixture(tmp_path / "fixture", CHAIN_SPEC, 2000)


def scripted(draft):
    return ScriptedProvider(lambda p: delete_spurious(p) if is_revision(p) else graph_response(draft))


def config(paths, out, **kw):
    return RunConfig(data=paths["data"], metadata=paths["metadata"], truth=paths["truth"], out=out, **kw)


def test_true_chain_recovered(chain, tmp_path):
    (art,) = run_pipeline(config(chain, tmp_path / "out"), scripted(CHAIN))
    assert art.ok and art.final == CHAIN
    assert art.metrics.f1 == 1.0 and art.metrics.shd == 0
    run_dir = tmp_path / "out" / "run_000"
    for name in ("draft_prompt_0.json", "draft_response_0.txt", "draft.json", "audit_report.json", "final_graph.json", "final_graph.dot", "metrics.json", "warnings.json"):
        assert (run_dir / name).is_file(), name
    assert read_graph(run_dir / "final_graph.json") == CHAIN


def test_spurious_edge_removed_by_refiner(tmp_path):
    dag = new_dag(["V1", "V2", "V3", "V4"], [("V1", "V2"), ("V2", "V3"), ("V3", "V4")])
    spec = ScmSpec(dag=dag, coefficients=dict.fromkeys(dag.edges, 1.0), seed=9)
    paths = write_fixture(tmp_path / "fx", spec, 5000)
    draft = dag.with_edges(dag.edges + (("V1", "V3"),))
    (art,) = run_pipeline(config(paths, tmp_path / "out", bh=True), scripted(draft))
    assert art.audit.finding("V1", "V3").verdict == "spurious_edge_candidate"
    assert art.final == dag and art.metrics.shd == 0
    assert (tmp_path / "out" / "run_000" / "revision_prompt_0.json").is_file()


def test_artifact_trees_are_byte_identical(chain, tmp_path):
    run_pipeline(config(chain, tmp_path / "a", runs=2), scripted(CHAIN))
    run_pipeline(config(chain, tmp_path / "b", runs=2), scripted(CHAIN))
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a and a == b


def test_multi_run_summary(chain, tmp_path):
    arts = run_pipeline(config(chain, tmp_path / "out", runs=3), scripted(CHAIN))
    assert len(arts) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["runs"] == 3 and summary["failed_runs"] == []
    assert all(m["std"] == 0 for m in summary["metrics"].values())
    assert "mean ± std (3 runs)" in (tmp_path / "out" / "summary.txt").read_text()


def test_run_seeds_are_independent_and_reproducible():
    assert run_seeds(0, 4) == run_seeds(0, 4)
    assert len(set(run_seeds(0, 4))) == 4 and run_seeds(0, 2) != run_seeds(1, 2)


def test_failed_run_does_not_abort_others(chain, tmp_path):
    calls = {"n": 0}

    def script(prompt):
        if is_revision(prompt):
            return delete_spurious(prompt)
        calls["n"] += 1
        return "garbage" if calls["n"] <= 2 else graph_response(CHAIN)

    arts = run_pipeline(config(chain, tmp_path / "out", runs=2), ScriptedProvider(script))
    assert not arts[0].ok and arts[0].error_phase == "draft" and arts[0].exit_code == 5
    assert arts[1].ok and arts[1].metrics.f1 == 1.0
    err = json.loads((tmp_path / "out" / "run_000" / "error.json").read_text())
    assert err["type"] == "SchemaError"
    assert (tmp_path / "out" / "run_000" / "draft_response_1.txt").read_text() == "garbage"
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["failed_runs"] == [0]


def test_full_neutralize_hides_names_in_recorded_prompts(tmp_path):
    rng = np.random.default_rng(0)
    rain = rng.standard_normal(500)
    wet = rain + rng.standard_normal(500)
    meta = [
        VariableMeta("rainfall", "Rainfall", "daily precipitation", "mm"),
        VariableMeta("wet_grass", "Wet grass", "lawn moisture sensor", "%"),
    ]
    ds = dataset_from_arrays({"rainfall": rain, "wet_grass": wet}, metadata=meta)
    write_table(ds, tmp_path / "d.csv")
    write_metadata(meta, tmp_path / "m.json")
    neutral = new_dag(["X1", "X2"], [("X1", "X2")])
    cfg = RunConfig(data=tmp_path / "d.csv", metadata=tmp_path / "m.json", out=tmp_path / "out", neutralize="full_neutralize", domain_hint="meteorology")
    (art,) = run_pipeline(cfg, scripted(neutral))
    assert art.ok and art.final == neutral
    prompt = (tmp_path / "out" / "run_000" / "draft_prompt_0.json").read_text().lower()
    for cue in ("rainfall", "wet", "precipitation", "lawn", "meteorology"):
        assert cue not in prompt
    mapping = json.loads((tmp_path / "out" / "neutralization.json").read_text())["mapping"]
    assert mapping == {"rainfall": "X1", "wet_grass": "X2"}


def test_domain_inference_call(chain, tmp_path):
    def script(prompt):
        if "domain" in prompt.system_text:
            return "Systems biology\n"
        return delete_spurious(prompt) if is_revision(prompt) else graph_response(CHAIN)

    provider = ScriptedProvider(script)
    run_pipeline(config(chain, tmp_path / "out", infer_domain=True), provider)
    assert json.loads((tmp_path / "out" / "domain.json").read_text())["domain"] == "Systems biology"
    assert "expert in Systems biology" in provider.calls[1].system_text


def test_second_audit_written_after_revision(tmp_path):
    dag = new_dag(["V1", "V2", "V3", "V4"], [("V1", "V2"), ("V2", "V3"), ("V3", "V4")])
    spec = ScmSpec(dag=dag, coefficients=dict.fromkeys(dag.edges, 1.0), seed=9)
    paths = write_fixture(tmp_path / "fx", spec, 5000)
    (art,) = run_pipeline(config(paths, tmp_path / "out", bh=True, second_audit=True), scripted(dag.with_edges(dag.edges + (("V1", "V3"),))))
    assert art.second_audit is not None
    assert (tmp_path / "out" / "run_000" / "audit_report_final.json").is_file()


@pytest.mark.parametrize(
    "overrides",
    [{"alpha": 1.5}, {"runs": 0}, {"provider": "carrier-pigeon"}, {"neutralize": "blur"}],
)
def test_config_validation(chain, tmp_path, overrides):
    with pytest.raises(ConfigError):
        run_pipeline(config(chain, tmp_path / "out", **overrides), scripted(CHAIN))


def test_missing_input_file(chain, tmp_path):
    cfg = config(chain, tmp_path / "out")
    cfg.data = tmp_path / "absent.csv"
    with pytest.raises(ConfigError):
        run_pipeline(cfg, scripted(CHAIN))


def test_config_is_persisted_without_output_path(chain, tmp_path):
    run_pipeline(config(chain, tmp_path / "out"), scripted(CHAIN))
    doc = json.loads((tmp_path / "out" / "config.json").read_text())
    assert doc["alpha"] == 0.05 and "out" not in doc and doc["provider_cfg"]["temperature"] == 0.0
