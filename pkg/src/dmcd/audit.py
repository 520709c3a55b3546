"""Audit a candidate DAG against data.

Every unordered pair of graph nodes gets one CI test. Non-adjacent pairs
are tested given a separating set (the graph claims independence);
adjacent pairs are tested given the child's other parents (the graph
claims a direct dependence). All p-values form a single q-value batch.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

from .data import Dataset
from .errors import NodeNotInDataset, UnknownNode
from .graph import Dag, separator_for_pair
from .independence import RegressorConfig, TestResult, ci_test
from .multiplicity import adjust

Verdict = Literal["consistent", "missing_edge_candidate", "spurious_edge_candidate", "inconclusive"]
DISCREPANCIES = ("missing_edge_candidate", "spurious_edge_candidate")


@dataclass(frozen=True)
class ImpliedRelation:
    x: str
    y: str
    separated: bool
    conditioning_set: frozenset[str]


@dataclass(frozen=True)
class PairFinding:
    implied: ImpliedRelation
    observed: TestResult
    verdict: Verdict

    @property
    def pair(self) -> tuple[str, str]:
        return self.implied.x, self.implied.y

    @property
    def is_discrepancy(self) -> bool:
        return self.verdict in DISCREPANCIES


@dataclass(frozen=True)
class AuditReport:
    dag: Dag
    alpha: float
    findings: tuple[PairFinding, ...]
    pi0: float
    flags: dict[str, list[str]] = field(default_factory=dict)

    @property
    def pair_count(self) -> int:
        return len(self.findings)

    @property
    def discrepancies(self) -> list[PairFinding]:
        return [f for f in self.findings if f.is_discrepancy]

    def by_verdict(self, verdict: Verdict) -> list[PairFinding]:
        return [f for f in self.findings if f.verdict == verdict]

    def finding(self, x: str, y: str) -> PairFinding:
        key = tuple(sorted((x, y)))
        for f in self.findings:
            if f.pair == key:
                return f
        raise KeyError(key)

    def to_json(self) -> dict:
        order = self.dag.sort_ids
        return {
            "alpha": self.alpha,
            "pi0": self.pi0,
            "pair_count": self.pair_count,
            "nodes": list(self.dag.nodes),
            "flags": self.flags,
            "findings": [
                {
                    "x": f.implied.x,
                    "y": f.implied.y,
                    "separated": f.implied.separated,
                    "conditioning_set": order(f.implied.conditioning_set),
                    "verdict": f.verdict,
                    **f.observed.to_json(),
                }
                for f in self.findings
            ],
        }


def implied_relation(dag: Dag, x: str, y: str) -> ImpliedRelation:
    """CI claim the graph makes about (x, y) and the set to test it under."""
    for node in (x, y):
        if node not in dag:
            raise UnknownNode(f"unknown node {node!r}")
    if dag.adjacent(x, y):
        child, other = (y, x) if dag.has_edge(x, y) else (x, y)
        return ImpliedRelation(x, y, False, frozenset(dag.parents(child)) - {other})
    return ImpliedRelation(x, y, True, separator_for_pair(dag, x, y))


def classify(separated: bool, q: float, alpha: float, degenerate: bool = False) -> Verdict:
    if degenerate:
        return "inconclusive"
    if separated and q <= alpha:
        return "missing_edge_candidate"
    if not separated and q > alpha:
        return "spurious_edge_candidate"
    return "consistent"


def classify_discrepancies(findings: list[PairFinding], alpha: float) -> list[Verdict]:
    """Verdict per finding from its implied relation and q-value."""
    return [
        classify(f.implied.separated, f.observed.q_value, alpha, f.observed.degenerate)
        for f in findings
    ]


def audit_graph(
    dag: Dag,
    ds: Dataset,
    alpha: float = 0.05,
    regressor: RegressorConfig | None = None,
    lam: float = 0.5,
    bh: bool = False,
    workers: int = 1,
) -> AuditReport:
    """Test every unordered node pair and classify discrepancies.

    Findings are ordered by lexicographically sorted (x, y); the report is
    independent of ``workers``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    missing = [n for n in dag.nodes if n not in ds.columns]
    if missing:
        raise NodeNotInDataset(f"graph nodes absent from data: {missing}")

    pairs = sorted(tuple(sorted(p)) for p in itertools.combinations(dag.nodes, 2))
    relations = [implied_relation(dag, x, y) for x, y in pairs]

    def run(rel: ImpliedRelation) -> TestResult:
        return ci_test(ds, rel.x, rel.y, rel.conditioning_set, regressor)

    if workers > 1 and len(relations) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, relations))
    else:
        results = [run(rel) for rel in relations]

    if results:
        batch = adjust([r.p_value for r in results], lam=lam, bh=bh)
        qs, pi0 = batch.q_values, batch.pi0
    else:
        qs, pi0 = [], 1.0

    findings = []
    flags: dict[str, list[str]] = {}
    for rel, res, q in zip(relations, results, qs):
        res = res.with_q(q)
        verdict = classify(rel.separated, res.q_value, alpha, res.degenerate)
        findings.append(PairFinding(rel, res, verdict))
        for flag in res.flags:
            flags.setdefault(flag, []).append(f"{rel.x}|{rel.y}")
    return AuditReport(dag=dag, alpha=alpha, findings=tuple(findings), pi0=pi0, flags=flags)
