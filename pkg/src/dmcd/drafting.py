"""Draft a DAG from variable metadata with a language model, then revise it from audit findings."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

from .audit import AuditReport, PairFinding
from .data import VariableMeta
from .errors import (
    EmptyMetadata,
    IsolatedNode,
    NoDiscrepancies,
    NodeSetChanged,
    SchemaError,
    UnknownVariable,
    ValidationError,
)
from .graph import Dag, new_dag
from .providers import Prompt, Provider

DRAFT_SCHEMA = {
    "type": "object",
    "required": ["nodes", "edges"],
    "properties": {
        "nodes": {"type": "array", "items": {"type": "string"}},
        "edges": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "excluded": {"type": "array", "items": {"type": "string"}},
        "missing_variable_candidates": {"type": "array", "items": {"type": "string"}},
    },
}

REVISION_SCHEMA = {
    "type": "object",
    "required": ["edges"],
    "properties": {
        "nodes": DRAFT_SCHEMA["properties"]["nodes"],
        "edges": DRAFT_SCHEMA["properties"]["edges"],
        "notes": {"type": "string"},
    },
}

STRUCTURAL_RULES = """\
Structural rules:
1. The graph must be a directed acyclic graph: no directed cycles and no self-loops.
2. No isolated nodes: every node you include must have at least one incoming or outgoing edge.
3. Node labels must exactly match the variable ids listed below, character for character. Do not invent variables."""

DRAFT_GUIDANCE = """\
Guidance:
- Include every plausible direct causal relationship between variables that reflects a stable, generalizable mechanism.
- Leave out variables you judge causally irrelevant; they are simply not listed as nodes.
- For each edge, decide carefully which direction is causally appropriate.
- If an important cause or effect seems to be missing from the dataset, name it under "missing_variable_candidates" instead of adding it to the graph."""

REVISION_GUIDELINES = """\
Revision guidelines:
- Weigh the statistical strength of each finding (smaller q-value = stronger evidence) against the semantic plausibility of the relationship.
- A flagged spurious edge MAY be removed; removal is not mandatory. Keep it if the mechanism is well established and the evidence is weak or unstable.
- A flagged missing edge MAY be added, with a direction you judge plausible. Do not add it if the dependence can be explained by conditioning on a common effect (collider bias) or by an indirect path.
- Any finding may be retained unchanged when the statistical evidence is weak or unstable.
- Keep exactly the same node set; only edges may change."""


def _metadata_block(metadata: Sequence[VariableMeta]) -> str:
    lines = ["Variables:"]
    for meta in metadata:
        lines.append(f"- id: {meta.id}")
        if meta.name and meta.name != meta.id:
            lines.append(f"  name: {meta.name}")
        if meta.unit:
            lines.append(f"  unit: {meta.unit}")
        if meta.description:
            lines.append(f"  description: {meta.description}")
    return "\n".join(lines)


def build_draft_prompt(metadata: Sequence[VariableMeta], domain_hint: str | None = None) -> Prompt:
    if not metadata:
        raise EmptyMetadata("cannot draft a graph without variables")
    domain = domain_hint.strip() if domain_hint and domain_hint.strip() else "the domain this dataset comes from"
    system = (
        f"You are an expert in {domain}. You propose causal structures the way an experienced "
        "practitioner would, relying on domain mechanisms and background knowledge."
    )
    user = "\n\n".join(
        [
            "Propose a sparse causal graph over the variables of a dataset.",
            STRUCTURAL_RULES,
            DRAFT_GUIDANCE,
            _metadata_block(metadata),
            "Respond with a single JSON object matching this schema and nothing else:\n"
            + json.dumps(DRAFT_SCHEMA, indent=1),
        ]
    )
    return Prompt(system_text=system, user_text=user, response_schema=DRAFT_SCHEMA)


def build_domain_prompt(metadata: Sequence[VariableMeta]) -> Prompt:
    """Short prompt asking for the dataset's domain, used to frame the drafting prompt."""
    if not metadata:
        raise EmptyMetadata("no variables")
    user = (
        "Name the scientific or engineering domain these variables come from, "
        "in at most ten words. Reply with the domain only.\n\n" + _metadata_block(metadata)
    )
    return Prompt(system_text="You classify datasets by domain.", user_text=user)


def parse_domain_response(raw: str) -> str | None:
    line = raw.strip().splitlines()[0].strip().strip(".\"'") if raw.strip() else ""
    return line[:120] or None


# --- response parsing ------------------------------------------------------

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _load_object(raw: str) -> dict:
    if not isinstance(raw, str):
        raise SchemaError("response is not text")
    candidates = [m.group(1) for m in _FENCE.finditer(raw)] + [raw]
    start, end = raw.find("{"), raw.rfind("}")
    if 0 <= start < end:
        candidates.append(raw[start : end + 1])
    for text in candidates:
        try:
            doc = json.loads(text)
        except (ValueError, RecursionError):
            continue
        if isinstance(doc, dict):
            return doc
    raise SchemaError("response does not contain a JSON object")


def _str_list(doc: dict, key: str, required: bool) -> list[str]:
    if key not in doc or doc[key] is None:
        if required:
            raise SchemaError(f"missing field {key!r}")
        return []
    value = doc[key]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"field {key!r} must be a list of strings")
    return value


def _edge_list(doc: dict) -> list[tuple[str, str]]:
    if "edges" not in doc:
        raise SchemaError("missing field 'edges'")
    value = doc["edges"]
    if not isinstance(value, list):
        raise SchemaError("field 'edges' must be a list")
    edges = []
    for item in value:
        if isinstance(item, dict) and {"source", "target"} <= item.keys():
            item = [item["source"], item["target"]]
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(v, str) for v in item)):
            raise SchemaError(f"edge {item!r} is not a [source, target] pair of strings")
        edges.append((item[0], item[1]))
    return edges


def _candidates(doc: dict) -> list[str]:
    value = doc.get("missing_variable_candidates") or []
    if not isinstance(value, list):
        raise SchemaError("field 'missing_variable_candidates' must be a list")
    return [v if isinstance(v, str) else json.dumps(v, sort_keys=True) for v in value]


def _check_isolated(dag: Dag) -> None:
    isolated = [n for n in dag.nodes if dag.degree(n) == 0]
    if isolated:
        raise IsolatedNode(f"isolated nodes are not allowed: {isolated}")


@dataclass(frozen=True)
class DraftResult:
    dag: Dag
    excluded_variables: tuple[str, ...]
    missing_variable_candidates: tuple[str, ...]
    raw_response: str

    def to_json(self) -> dict:
        return {
            "nodes": list(self.dag.nodes),
            "edges": [list(e) for e in self.dag.edges],
            "excluded": list(self.excluded_variables),
            "missing_variable_candidates": list(self.missing_variable_candidates),
        }


def parse_draft_response(raw: str, dataset_ids: Sequence[str]) -> DraftResult:
    """Validate a drafted graph.

    Node order follows ``dataset_ids``. Edge endpoints missing from the
    node list are added to it; anything outside the dataset is rejected.
    """
    dataset_ids = list(dataset_ids)
    known = set(dataset_ids)
    doc = _load_object(raw)
    listed = _str_list(doc, "nodes", required=True)
    edges = _edge_list(doc)
    _str_list(doc, "excluded", required=False)
    candidates = _candidates(doc)

    used = set(listed) | {v for e in edges for v in e}
    unknown = sorted(used - known)
    if unknown:
        raise UnknownVariable(f"labels not in the dataset: {unknown}")
    if not used:
        raise SchemaError("draft graph is empty")
    index = {v: i for i, v in enumerate(dataset_ids)}
    nodes = [v for v in dataset_ids if v in used]
    edges = sorted(set(edges), key=lambda e: (index[e[0]], index[e[1]]))
    dag = new_dag(nodes, edges)
    _check_isolated(dag)
    excluded = tuple(v for v in dataset_ids if v not in used)
    return DraftResult(dag, excluded, tuple(candidates), raw)


def parse_revision_response(raw: str, dag: Dag) -> Dag:
    """Revised edge set over the unchanged node set of ``dag``."""
    doc = _load_object(raw)
    edges = _edge_list(doc)
    if doc.get("nodes") is not None:
        listed = _str_list(doc, "nodes", required=True)
        if set(listed) != set(dag.nodes):
            added = sorted(set(listed) - set(dag.nodes))
            dropped = sorted(set(dag.nodes) - set(listed))
            raise NodeSetChanged(f"node set must not change (added {added}, dropped {dropped})")
    outside = sorted({v for e in edges for v in e} - set(dag.nodes))
    if outside:
        raise UnknownVariable(f"edges reference nodes outside the graph: {outside}")
    index = {n: i for i, n in enumerate(dag.nodes)}
    revised = new_dag(dag.nodes, sorted(set(edges), key=lambda e: (index[e[0]], index[e[1]])))
    _check_isolated(revised)
    return revised


# --- revision --------------------------------------------------------------


def _discrepancy_entry(dag: Dag, f: PairFinding) -> dict:
    entry = {
        "pair": [f.implied.x, f.implied.y],
        "verdict": f.verdict,
        "q_value": float(f"{f.observed.q_value:.6g}"),
        "conditioning_set": dag.sort_ids(f.implied.conditioning_set),
    }
    if f.verdict == "spurious_edge_candidate":
        u, v = (f.implied.x, f.implied.y) if dag.has_edge(f.implied.x, f.implied.y) else (f.implied.y, f.implied.x)
        entry["edge"] = [u, v]
        entry["action"] = "removable (optional): data show weak evidence of a direct dependence"
    else:
        entry["action"] = "addable (optional): pair is dependent in the data but separated in the graph"
    return entry


def build_revision_prompt(dag: Dag, report: AuditReport) -> Prompt:
    found = report.discrepancies
    if not found:
        raise NoDiscrepancies("audit found no discrepancies; nothing to revise")
    graph = {"nodes": list(dag.nodes), "edges": [list(e) for e in dag.edges]}
    findings = [_discrepancy_entry(dag, f) for f in found]
    user = "\n\n".join(
        [
            "A draft causal graph was checked against observational data with conditional "
            f"independence tests (false discovery rate level {report.alpha}). "
            "Revise the graph in light of the findings below.",
            "Current graph:\n```json\n" + json.dumps(graph) + "\n```",
            "Findings:\n```json\n" + json.dumps(findings, indent=1) + "\n```",
            REVISION_GUIDELINES,
            STRUCTURAL_RULES.replace("listed below", "of the current graph"),
            "Respond with a single JSON object matching this schema and nothing else:\n"
            + json.dumps(REVISION_SCHEMA, indent=1),
        ]
    )
    system = "You revise causal graphs, balancing statistical evidence against domain knowledge."
    return Prompt(system_text=system, user_text=user, response_schema=REVISION_SCHEMA)


@dataclass
class RefineResult:
    dag: Dag
    warnings: list[str] = field(default_factory=list)
    exchanges: list[tuple[Prompt, str]] = field(default_factory=list)
    revised: bool = False


def run_refine_phase(dag: Dag, report: AuditReport, provider: Provider) -> RefineResult:
    """Ask the provider to revise ``dag``; never returns an invalid graph.

    An invalid revision triggers one re-prompt carrying the validation
    error; a second failure keeps ``dag`` and records a warning. Provider
    errors propagate.
    """
    if not report.discrepancies:
        return RefineResult(dag)
    result = RefineResult(dag)
    prompt = build_revision_prompt(dag, report)
    for attempt in range(2):
        raw = provider.complete(prompt)
        result.exchanges.append((prompt, raw))
        try:
            result.dag = parse_revision_response(raw, dag)
            result.revised = True
            return result
        except ValidationError as exc:
            error = f"{type(exc).__name__}: {exc}"
        if attempt == 0:
            prompt = Prompt(
                system_text=prompt.system_text,
                user_text=prompt.user_text
                + f"\n\nYour previous response was rejected ({error}). Return a corrected JSON object.",
                response_schema=prompt.response_schema,
            )
    result.warnings.append(f"revision rejected twice, keeping the unrevised graph ({error})")
    return result


__all__ = [
    "DraftResult",
    "RefineResult",
    "build_domain_prompt",
    "build_draft_prompt",
    "build_revision_prompt",
    "parse_domain_response",
    "parse_draft_response",
    "parse_revision_response",
    "run_refine_phase",
]
