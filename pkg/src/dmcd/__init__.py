"""Causal discovery by drafting a DAG from variable metadata and auditing it with CI tests."""

from .audit import AuditReport, audit_graph, classify, implied_relation
from .data import Dataset, ScmSpec, VariableMeta, load_table, neutralize_metadata, synthesize_scm
from .drafting import build_draft_prompt, build_revision_prompt, parse_draft_response, run_refine_phase
from .evaluation import aggregate_runs, compute_metrics, count_edge_categories, evaluate, shd
from .graph import Dag, SeparationQuery, d_separated, new_dag, separator_for_pair, topological_order
from .independence import RegressorConfig, chi_squared_test, ci_test, partial_correlation_test, residual_pillai_test, select_test
from .multiplicity import estimate_pi0, q_values
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"
