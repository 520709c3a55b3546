"""Score a predicted DAG against a reference DAG.

FDR here is (reversed + extra) / (tp + extra): reversed edges count as
false discoveries but are absent from the denominator, so FDR can exceed
1. ``bounded=True`` clamps FDR, FPR, precision and F1 into [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyList, MixedBoundedFlags, NodeMismatch
from .graph import Dag

METRICS = ("fdr", "tpr", "fpr", "shd", "precision", "recall", "f1")
LABELS = {"fdr": "FDR", "tpr": "TPR", "fpr": "FPR", "shd": "SHD", "precision": "Precision", "recall": "Recall", "f1": "F1"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    reversed: int
    fp_extra: int
    missing: int
    truth_total: int
    negatives: int

    @property
    def predicted_total(self) -> int:
        return self.tp + self.reversed + self.fp_extra


@dataclass(frozen=True)
class MetricsReport:
    fdr: float
    tpr: float
    fpr: float
    shd: int
    precision: float
    recall: float
    f1: float
    bounded: bool = False

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}

    def to_json(self) -> dict:
        return asdict(self)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def count_edge_categories(pred: Dag, truth: Dag) -> ConfusionCounts:
    """Edge categories of ``pred`` relative to ``truth``.

    Nodes of ``truth`` absent from ``pred`` are allowed; their edges count
    as missing.
    """
    outside = [n for n in pred.nodes if n not in truth]
    if outside:
        raise NodeMismatch(f"predicted nodes not in the reference graph: {outside}")
    truth_edges = set(truth.edges)
    tp = rev = 0
    for u, v in pred.edges:
        if (u, v) in truth_edges:
            tp += 1
        elif (v, u) in truth_edges:
            rev += 1
    n = len(truth)
    return ConfusionCounts(
        tp=tp,
        reversed=rev,
        fp_extra=len(pred.edges) - tp - rev,
        missing=len(truth_edges) - tp - rev,
        truth_total=len(truth_edges),
        negatives=n * (n - 1) // 2 - len(truth_edges),
    )


def compute_metrics(c: ConfusionCounts, bounded: bool = False) -> MetricsReport:
    """All 0/0 ratios are 0."""
    fdr = _ratio(c.reversed + c.fp_extra, c.tp + c.fp_extra)
    tpr = _ratio(c.tp, c.truth_total)
    fpr = _ratio(c.reversed + c.fp_extra, c.negatives)
    precision = _ratio(c.tp, c.predicted_total)
    f1 = _ratio(2 * precision * tpr, precision + tpr)
    if bounded:
        fdr, fpr, precision, f1 = (min(1.0, max(0.0, v)) for v in (fdr, fpr, precision, f1))
    return MetricsReport(
        fdr=fdr,
        tpr=tpr,
        fpr=fpr,
        shd=c.reversed + c.fp_extra + c.missing,
        precision=precision,
        recall=tpr,
        f1=f1,
        bounded=bounded,
    )


def shd(pred: Dag, truth: Dag) -> int:
    c = count_edge_categories(pred, truth)
    return c.reversed + c.fp_extra + c.missing


def evaluate(pred: Dag, truth: Dag, bounded: bool = False) -> MetricsReport:
    return compute_metrics(count_edge_categories(pred, truth), bounded)


@dataclass(frozen=True)
class RunAggregate:
    mean: dict[str, float]
    std: dict[str, float]
    runs: int
    bounded: bool
    single_run: bool

    def to_json(self) -> dict:
        return {
            "runs": self.runs,
            "bounded": self.bounded,
            "single_run": self.single_run,
            "metrics": {m: {"mean": self.mean[m], "std": self.std[m]} for m in METRICS},
        }


def aggregate_runs(reports: Sequence[MetricsReport]) -> RunAggregate:
    """Mean and sample (n-1) standard deviation per metric; std is 0 for one run."""
    if not reports:
        raise EmptyList("no reports to aggregate")
    flags = {r.bounded for r in reports}
    if len(flags) > 1:
        raise MixedBoundedFlags("cannot aggregate bounded and unbounded reports")
    values = np.array([[r.values()[m] for m in METRICS] for r in reports], dtype=float)
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1) if len(reports) > 1 else np.zeros(len(METRICS))
    return RunAggregate(
        mean=dict(zip(METRICS, mean.tolist())),
        std=dict(zip(METRICS, std.tolist())),
        runs=len(reports),
        bounded=flags.pop(),
        single_run=len(reports) == 1,
    )


def _fmt(value: float, metric: str) -> str:
    if metric == "shd" and float(value).is_integer():
        return str(int(value))
    return f"{value:.4g}" if math.isfinite(value) else str(value)


def format_table(rows: dict[str, MetricsReport | RunAggregate]) -> str:
    """Plain-text table, one row per label, columns FDR TPR FPR SHD Precision Recall F1.

    Aggregates render as ``mean ± std``.
    """
    header = [""] + [LABELS[m] for m in METRICS]
    body = []
    for label, row in rows.items():
        if isinstance(row, RunAggregate):
            cells = [f"{_fmt(row.mean[m], m)} ± {row.std[m]:.3g}" for m in METRICS]
        else:
            cells = [_fmt(row.values()[m], m) for m in METRICS]
        body.append([label] + cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))) for r in [header] + body]
    return "\n".join(line.rstrip() for line in lines) + "\n"
