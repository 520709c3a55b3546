"""Graph files: JSON ``{"nodes": [...], "edges": [[src, dst], ...]}`` and Graphviz DOT."""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import IoError, SchemaError
from .graph import Dag, new_dag


def graph_to_json(dag: Dag) -> dict:
    return {"nodes": list(dag.nodes), "edges": [list(e) for e in dag.edges]}


def graph_from_json(doc) -> Dag:
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list) or not isinstance(doc.get("edges"), list):
        raise SchemaError("graph document needs 'nodes' and 'edges' lists")
    nodes = doc["nodes"]
    if not all(isinstance(n, str) for n in nodes):
        raise SchemaError("node ids must be strings")
    edges = []
    for e in doc["edges"]:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, str) for v in e)):
            raise SchemaError(f"bad edge {e!r}")
        edges.append((e[0], e[1]))
    return new_dag(nodes, edges)


def _quote(node: str) -> str:
    return '"' + node.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_to_dot(dag: Dag, name: str = "G") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f"  {_quote(n)};" for n in dag.nodes]
    lines += [f"  {_quote(u)} -> {_quote(v)};" for u, v in dag.edges]
    lines.append("}")
    return "\n".join(lines) + "\n"


_ID = r'"((?:[^"\\]|\\.)*)"|([A-Za-z_][\w.]*)'
_EDGE = re.compile(rf"^\s*(?:{_ID})\s*->\s*(?:{_ID})\s*;?\s*$")
_NODE = re.compile(rf"^\s*(?:{_ID})\s*;?\s*$")


def _unquote(quoted: str | None, bare: str | None) -> str:
    if quoted is None:
        return bare
    return re.sub(r"\\(.)", r"\1", quoted)


def graph_from_dot(text: str) -> Dag:
    """Read the subset of DOT written by :func:`graph_to_dot`."""
    nodes: list[str] = []
    edges = []
    seen = set()

    def add(node: str) -> None:
        if node not in seen:
            seen.add(node)
            nodes.append(node)

    body = text.strip().splitlines()
    if not body or not body[0].lstrip().startswith("digraph"):
        raise SchemaError("not a DOT digraph")
    for line in body[1:]:
        line = line.strip()
        if not line or line == "}" or line.startswith("//"):
            continue
        m = _EDGE.match(line)
        if m:
            u, v = _unquote(m.group(1), m.group(2)), _unquote(m.group(3), m.group(4))
            add(u)
            add(v)
            edges.append((u, v))
            continue
        m = _NODE.match(line)
        if m:
            add(_unquote(m.group(1), m.group(2)))
            continue
        raise SchemaError(f"unsupported DOT line: {line!r}")
    return new_dag(nodes, edges)


def write_graph(dag: Dag, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("dot" if path.suffix in (".dot", ".gv") else "json")
    text = graph_to_dot(dag) if fmt == "dot" else json.dumps(graph_to_json(dag), indent=2) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_graph(path: str | Path) -> Dag:
    """Load and validate a graph; cyclic files raise CycleDetected."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if path.suffix in (".dot", ".gv"):
        return graph_from_dot(text)
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return graph_from_json(doc)
