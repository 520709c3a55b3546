"""Draft -> audit -> refine -> evaluate, with every run's artifacts on disk."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .audit import AuditReport, audit_graph
from .data import Dataset, VariableMeta, load_table, neutralize_metadata, read_metadata
from .drafting import (
    DraftResult,
    build_domain_prompt,
    build_draft_prompt,
    parse_domain_response,
    parse_draft_response,
    run_refine_phase,
)
from .errors import ConfigError, DmcdError, NodeMismatch, ValidationError
from .evaluation import MetricsReport, RunAggregate, aggregate_runs, evaluate, format_table
from .graph import Dag, new_dag
from .graphio import graph_to_dot, graph_to_json, read_graph
from .independence import RegressorConfig
from .providers import MockProvider, OpenAICompatibleProvider, Prompt, Provider, ProviderConfig, RecordingProvider

log = logging.getLogger(__name__)

NeutralizeMode = Literal["off", "strip_descriptions", "full_neutralize"]


@dataclass
class RunConfig:
    data: Path
    metadata: Path
    truth: Path | None = None
    alpha: float = 0.05
    provider: Literal["openai_compatible", "mock"] = "mock"
    provider_cfg: ProviderConfig = field(default_factory=ProviderConfig)
    mock_dir: Path | None = None
    record_dir: Path | None = None
    runs: int = 1
    seed: int = 0
    out: Path = Path("dmcd_out")
    neutralize: NeutralizeMode = "off"
    rephrasings: dict[str, str] | None = None
    bounded: bool = False
    second_audit: bool = False
    domain_hint: str | None = None
    infer_domain: bool | None = None
    regressor: RegressorConfig = field(default_factory=RegressorConfig)
    lam: float = 0.5
    bh: bool = False
    workers: int = 1

    def validate(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.provider not in ("openai_compatible", "mock"):
            raise ConfigError(f"unknown provider {self.provider!r}")
        if self.neutralize not in ("off", "strip_descriptions", "full_neutralize"):
            raise ConfigError(f"unknown neutralization mode {self.neutralize!r}")
        for label, path in (("data", self.data), ("metadata", self.metadata), ("truth", self.truth)):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} file {path} not found")

    def public(self) -> dict:
        """Resolved settings worth persisting (no output path, no secrets)."""
        doc = asdict(self)
        doc.pop("out")
        doc.pop("record_dir")
        return json.loads(json.dumps(doc, default=str))


@dataclass
class RunArtifacts:
    index: int
    draft: DraftResult | None = None
    audit: AuditReport | None = None
    final: Dag | None = None
    metrics: MetricsReport | None = None
    second_audit: AuditReport | None = None
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    error: str | None = None
    error_phase: str | None = None
    exit_code: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None


def make_provider(cfg: RunConfig) -> Provider:
    if cfg.provider == "mock":
        if cfg.mock_dir is None:
            raise ConfigError("mock provider needs a mock directory")
        return MockProvider.from_dir(cfg.mock_dir)
    provider: Provider = OpenAICompatibleProvider(cfg.provider_cfg)
    if cfg.record_dir is not None:
        provider = RecordingProvider(provider, cfg.record_dir)
    return provider


def run_seeds(seed: int, runs: int) -> list[int]:
    """Independent per-run seeds split from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _map_graph(dag: Dag, mapping: dict[str, str]) -> Dag:
    unknown = [n for n in dag.nodes if n not in mapping]
    if unknown:
        raise NodeMismatch(f"reference graph nodes not in the dataset: {unknown}")
    return new_dag([mapping[n] for n in dag.nodes], [(mapping[u], mapping[v]) for u, v in dag.edges])


def draft_graph(
    provider: Provider,
    metadata: list[VariableMeta],
    domain_hint: str | None,
    exchanges: list[tuple[Prompt, str]] | None = None,
) -> DraftResult:
    """Phase I with one corrective re-prompt on an invalid response.

    Each (prompt, response) pair is appended to ``exchanges`` as it happens.
    """
    prompt = build_draft_prompt(metadata, domain_hint)
    ids = [m.id for m in metadata]
    exchanges = [] if exchanges is None else exchanges
    for attempt in range(2):
        raw = provider.complete(prompt)
        exchanges.append((prompt, raw))
        try:
            return parse_draft_response(raw, ids)
        except ValidationError as exc:
            if attempt == 1:
                raise
            prompt = Prompt(
                prompt.system_text,
                prompt.user_text + f"\n\nYour previous response was rejected ({type(exc).__name__}: {exc}). "
                "Return a corrected JSON object.",
                prompt.response_schema,
            )
    raise AssertionError("unreachable")


def _prepare(cfg: RunConfig) -> tuple[Dataset, Dag | None, dict[str, str]]:
    metadata = read_metadata(cfg.metadata)
    ds = load_table(cfg.data, metadata)
    truth = read_graph(cfg.truth) if cfg.truth else None
    mapping = {m.id: m.id for m in metadata}
    if cfg.neutralize != "off":
        new_meta, mapping = neutralize_metadata(metadata, cfg.neutralize, cfg.rephrasings)
        ds = ds.renamed(mapping, new_meta)
        if truth is not None:
            truth = _map_graph(truth, mapping)
    return ds, truth, mapping


def _run_one(
    index: int,
    seed: int,
    cfg: RunConfig,
    ds: Dataset,
    truth: Dag | None,
    provider: Provider,
    domain_hint: str | None,
    run_dir: Path,
) -> RunArtifacts:
    art = RunArtifacts(index)
    phase = "draft"
    try:
        t0 = time.perf_counter()
        exchanges: list[tuple[Prompt, str]] = []
        try:
            draft = draft_graph(provider, list(ds.metadata), domain_hint, exchanges)
        finally:
            for k, (prompt, raw) in enumerate(exchanges):
                _dump(run_dir / f"draft_prompt_{k}.json", prompt.to_json())
                (run_dir / f"draft_response_{k}.txt").write_text(raw, encoding="utf-8")
        art.draft = draft
        _dump(run_dir / "draft.json", draft.to_json())
        (run_dir / "draft_graph.dot").write_text(graph_to_dot(draft.dag), encoding="utf-8")
        art.timings["draft"] = time.perf_counter() - t0

        phase = "audit"
        t0 = time.perf_counter()
        regressor = RegressorConfig(**{**asdict(cfg.regressor), "seed": seed % 2**32})
        art.audit = audit_graph(draft.dag, ds, cfg.alpha, regressor, cfg.lam, cfg.bh, cfg.workers)
        _dump(run_dir / "audit_report.json", art.audit.to_json())
        art.timings["audit"] = time.perf_counter() - t0

        phase = "refine"
        t0 = time.perf_counter()
        refined = run_refine_phase(draft.dag, art.audit, provider)
        for k, (prompt, raw) in enumerate(refined.exchanges):
            _dump(run_dir / f"revision_prompt_{k}.json", prompt.to_json())
            (run_dir / f"revision_response_{k}.txt").write_text(raw, encoding="utf-8")
        art.final = refined.dag
        art.warnings.extend(refined.warnings)
        _dump(run_dir / "final_graph.json", graph_to_json(art.final))
        (run_dir / "final_graph.dot").write_text(graph_to_dot(art.final), encoding="utf-8")
        art.timings["refine"] = time.perf_counter() - t0

        if cfg.second_audit and refined.revised:
            phase = "second_audit"
            art.second_audit = audit_graph(art.final, ds, cfg.alpha, regressor, cfg.lam, cfg.bh, cfg.workers)
            _dump(run_dir / "audit_report_final.json", art.second_audit.to_json())

        if truth is not None:
            phase = "evaluate"
            art.metrics = evaluate(art.final, truth, cfg.bounded)
            _dump(run_dir / "metrics.json", art.metrics.to_json())
    except DmcdError as exc:
        art.error, art.error_phase, art.exit_code = f"{type(exc).__name__}: {exc}", phase, exc.exit_code
        _dump(run_dir / "error.json", {"phase": phase, "type": type(exc).__name__, "message": str(exc)})
        log.error("run %d failed in %s: %s", index, phase, art.error)
    _dump(run_dir / "warnings.json", art.warnings)
    for name, secs in art.timings.items():
        log.info("run %d %s took %.3fs", index, name, secs)
    return art


def run_pipeline(cfg: RunConfig, provider: Provider | None = None) -> list[RunArtifacts]:
    """Execute ``cfg.runs`` independent runs and write artifacts under ``cfg.out``.

    Timings are kept on the returned artifacts only, so that output trees
    from a deterministic provider are byte-identical.
    """
    cfg.validate()
    ds, truth, mapping = _prepare(cfg)
    provider = provider or make_provider(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", cfg.public())
    if cfg.neutralize != "off":
        _dump(out / "neutralization.json", {"mode": cfg.neutralize, "mapping": mapping})

    domain_hint = None if cfg.neutralize == "full_neutralize" else cfg.domain_hint
    infer = cfg.infer_domain if cfg.infer_domain is not None else cfg.provider != "mock"
    if domain_hint is None and infer and cfg.neutralize != "full_neutralize":
        domain_prompt = build_domain_prompt(list(ds.metadata))
        domain_hint = parse_domain_response(provider.complete(domain_prompt))
        _dump(out / "domain.json", {"prompt": domain_prompt.to_json(), "domain": domain_hint})

    artifacts = []
    for index, seed in enumerate(run_seeds(cfg.seed, cfg.runs)):
        run_dir = out / f"run_{index:03d}"
        run_dir.mkdir(exist_ok=True)
        artifacts.append(_run_one(index, seed, cfg, ds, truth, provider, domain_hint, run_dir))

    scored = [a.metrics for a in artifacts if a.metrics is not None]
    if scored:
        agg = aggregate_runs(scored)
        _dump(out / "summary.json", {"failed_runs": [a.index for a in artifacts if not a.ok], **agg.to_json()})
        (out / "summary.txt").write_text(summary_table(agg, scored), encoding="utf-8")
    return artifacts


def summary_table(agg: RunAggregate, reports: list[MetricsReport]) -> str:
    rows: dict = {f"run {i}": r for i, r in enumerate(reports)}
    rows[f"mean ± std ({agg.runs} runs)"] = agg
    return format_table(rows)
