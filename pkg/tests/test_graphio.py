import json

import pytest
from hypothesis import given

from dmcd.errors import CycleDetected, IoError, SchemaError
from dmcd.graph import new_dag
from dmcd.graphio import graph_from_dot, graph_to_dot, graph_to_json, read_graph, write_graph
from test_graph import dags

CHAIN = new_dag("ABC", [("A", "B"), ("B", "C")])


@pytest.mark.parametrize("suffix", [".json", ".dot"])
def test_chain_roundtrip(tmp_path, suffix):
    path = tmp_path / f"g{suffix}"
    write_graph(CHAIN, path)
    back = read_graph(path)
    assert back == CHAIN and back.nodes == CHAIN.nodes and back.edges == CHAIN.edges


def test_json_schema():
    assert graph_to_json(CHAIN) == {"nodes": ["A", "B", "C"], "edges": [["A", "B"], ["B", "C"]]}


def test_dot_has_one_arrow_per_edge():
    dag = new_dag("ABCD", [("A", "B"), ("A", "C"), ("C", "D")])
    assert graph_to_dot(dag).count("->") == 3


def test_dot_quoting_roundtrip():
    dag = new_dag(['we"ird', "sp ace", "back\\slash"], [('we"ird', "sp ace"), ("sp ace", "back\\slash")])
    assert graph_from_dot(graph_to_dot(dag)) == dag


@given(dags())
def test_roundtrips_preserve_order(dag):
    assert graph_from_dot(graph_to_dot(dag)).nodes == dag.nodes
    from dmcd.graphio import graph_from_json

    back = graph_from_json(json.loads(json.dumps(graph_to_json(dag))))
    assert back.nodes == dag.nodes and back.edges == dag.edges


def test_cyclic_file_rejected(tmp_path):
    path = tmp_path / "cyc.json"
    path.write_text(json.dumps({"nodes": ["A", "B"], "edges": [["A", "B"], ["B", "A"]]}))
    with pytest.raises(CycleDetected):
        read_graph(path)
    dot = tmp_path / "cyc.dot"
    dot.write_text('digraph G {\n  "A" -> "B";\n  "B" -> "A";\n}\n')
    with pytest.raises(CycleDetected):
        read_graph(dot)


def test_read_errors(tmp_path):
    with pytest.raises(IoError):
        read_graph(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        read_graph(bad)
    bad.write_text(json.dumps({"nodes": ["A"], "edges": [["A"]]}))
    with pytest.raises(SchemaError):
        read_graph(bad)
    with pytest.raises(SchemaError):
        graph_from_dot("graph G { A -- B }")


def test_write_error(tmp_path):
    with pytest.raises(IoError):
        write_graph(CHAIN, tmp_path / "missing_dir" / "g.json")
