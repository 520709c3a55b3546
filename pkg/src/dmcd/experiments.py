"""Synthetic experiments shared by the test suite and ``scripts/``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audit import AuditReport, audit_graph
from .data import Dataset, dataset_from_arrays, random_dag, random_linear_scm, synthesize_scm
from .graph import Dag, SeparationQuery, d_separated, new_dag, topological_order
from .independence import RegressorConfig, TestResult, chi_squared_test, partial_correlation_test, residual_pillai_test

# --- null models for calibration -------------------------------------------


def null_partial_correlation(rng: np.random.Generator, n: int = 500) -> Dataset:
    """Z -> X, Z -> Y, linear-Gaussian; X independent of Y given Z."""
    z = rng.standard_normal(n)
    x = 0.8 * z + rng.standard_normal(n)
    y = -1.0 * z + rng.standard_normal(n)
    return dataset_from_arrays({"x": x, "y": y, "z": z}, kinds=dict.fromkeys("xyz", "continuous"))


def null_chi_squared(rng: np.random.Generator, n: int = 500) -> Dataset:
    """Binary Z shifts the distributions of three-level X and Y; X independent of Y given Z."""
    z = rng.integers(0, 2, n)
    px = np.where(z[:, None] == 1, [0.5, 0.3, 0.2], [0.2, 0.3, 0.5])
    py = np.where(z[:, None] == 1, [0.2, 0.2, 0.6], [0.4, 0.4, 0.2])
    x = (rng.random(n)[:, None] > np.cumsum(px, axis=1)).sum(axis=1)
    y = (rng.random(n)[:, None] > np.cumsum(py, axis=1)).sum(axis=1)
    return dataset_from_arrays({"x": x, "y": y, "z": z}, kinds=dict.fromkeys("xyz", "discrete"))


def null_residual_pillai(rng: np.random.Generator, n: int = 1000) -> Dataset:
    """X = Z^2 + noise, Y = sin(Z) + noise; X independent of Y given Z."""
    z = rng.standard_normal(n)
    x = z**2 + rng.standard_normal(n)
    y = np.sin(z) + rng.standard_normal(n)
    return dataset_from_arrays({"x": x, "y": y, "z": z}, kinds=dict.fromkeys("xyz", "continuous"))


def null_p_values(test: str, reps: int, n: int, seed: int = 0, cfg: RegressorConfig | None = None) -> np.ndarray:
    """p-values of ``test`` on ``reps`` independent draws from its null model."""
    out = np.empty(reps)
    for rep, child in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        rng = np.random.default_rng(child)
        if test == "partial_correlation":
            res = partial_correlation_test(null_partial_correlation(rng, n), "x", "y", ["z"])
        elif test == "chi_squared":
            res = chi_squared_test(null_chi_squared(rng, n), "x", "y", ["z"])
        elif test == "residual_pillai":
            res = residual_pillai_test(null_residual_pillai(rng, n), "x", "y", ["z"], cfg)
        else:
            raise ValueError(test)
        out[rep] = res.p_value
    return out


# --- planted-error audit ----------------------------------------------------


@dataclass(frozen=True)
class PlantedDraft:
    truth: Dag
    draft: Dag
    spurious: tuple[tuple[str, str], ...]
    removed: tuple[str, str]


def plant_errors(
    truth: Dag,
    coefficients: dict[tuple[str, str], float],
    rng: np.random.Generator,
    n_spurious: int = 2,
    strong: float = 1.0,
) -> PlantedDraft | None:
    """Truth minus one strong edge plus ``n_spurious`` forward non-edges.

    Spurious edges follow the true causal order (so the draft stays acyclic)
    and never point into the child of the removed edge, so each one is
    independent of its child given the child's other draft parents.
    Returns None if the graph offers no valid choice.
    """
    strong_edges = [e for e in truth.edges if abs(coefficients[e]) >= strong]
    if not strong_edges:
        return None
    removed = strong_edges[rng.integers(len(strong_edges))]
    order = topological_order(truth)
    candidates = [
        (order[i], order[j])
        for i in range(len(order))
        for j in range(i + 1, len(order))
        if not truth.adjacent(order[i], order[j]) and order[j] != removed[1]
    ]
    if len(candidates) < n_spurious:
        return None
    picks = rng.choice(len(candidates), size=n_spurious, replace=False)
    spurious = tuple(candidates[i] for i in sorted(picks))
    edges = [e for e in truth.edges if e != removed] + list(spurious)
    return PlantedDraft(truth, new_dag(truth.nodes, edges), spurious, removed)


@dataclass(frozen=True)
class PlantedOutcome:
    seed: int
    spurious_flagged: tuple[bool, ...]
    removed_flagged: bool
    correct_pairs: int
    false_flags: int
    report: AuditReport

    @property
    def false_flag_rate(self) -> float:
        return self.false_flags / self.correct_pairs if self.correct_pairs else 0.0


def planted_error_trial(seed: int, k: int = 8, n: int = 5000, edge_prob: float = 0.3, alpha: float = 0.05) -> PlantedOutcome:
    """Audit a corrupted copy of a random linear-Gaussian SCM's graph.

    A pair is "correct" when it is not one of the planted errors and the
    draft's implied claim about it holds in the true graph.
    """
    rng = np.random.default_rng(seed)
    while True:
        truth = random_dag(k, edge_prob, rng)
        spec = random_linear_scm(truth, rng, seed=seed)
        planted = plant_errors(truth, spec.coefficients, rng)
        if planted is not None:
            break
    ds, _ = synthesize_scm(spec, n)
    report = audit_graph(planted.draft, ds, alpha)

    planted_pairs = {tuple(sorted(e)) for e in planted.spurious} | {tuple(sorted(planted.removed))}
    spurious_flagged = tuple(report.finding(*e).verdict == "spurious_edge_candidate" for e in planted.spurious)
    removed_flagged = report.finding(*planted.removed).verdict == "missing_edge_candidate"

    correct = false = 0
    for f in report.findings:
        if f.pair in planted_pairs:
            continue
        rel = f.implied
        if rel.separated:
            holds = d_separated(truth, SeparationQuery(rel.x, rel.y, rel.conditioning_set))
        else:
            holds = truth.adjacent(rel.x, rel.y)
        if not holds:
            continue
        correct += 1
        false += f.verdict != "consistent"
    return PlantedOutcome(seed, spurious_flagged, removed_flagged, correct, false, report)


def ks_uniform_pvalue(p_values: np.ndarray) -> float:
    from scipy import stats

    return float(stats.kstest(p_values, "uniform").pvalue)


__all__ = [
    "PlantedDraft",
    "PlantedOutcome",
    "TestResult",
    "ks_uniform_pvalue",
    "null_chi_squared",
    "null_p_values",
    "null_partial_correlation",
    "null_residual_pillai",
    "plant_errors",
    "planted_error_trial",
]
