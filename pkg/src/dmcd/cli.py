"""Command-line interface.

Exit codes: 0 success, 2 configuration, 3 data, 4 provider, 5 validation,
1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .audit import audit_graph
from .data import load_table, random_dag, random_linear_scm, read_metadata, synthesize_scm, write_metadata, write_table
from .drafting import build_draft_prompt, build_revision_prompt
from .errors import ConfigError, DmcdError
from .evaluation import evaluate, format_table
from .graph import new_dag
from .graphio import graph_to_json, read_graph, write_graph
from .independence import RegressorConfig
from .pipeline import RunConfig, draft_graph, make_provider, run_pipeline
from .providers import ProviderConfig

log = logging.getLogger("dmcd")

DEFAULTS = {
    "alpha": 0.05,
    "runs": 1,
    "provider": "mock",
    "model": ProviderConfig.model,
    "endpoint": ProviderConfig.endpoint,
    "api_key_env": ProviderConfig.api_key_env,
    "temperature": 0.0,
    "seed": 0,
    "out": "dmcd_out",
    "neutralize": "off",
    "bounded": False,
    "second_audit": False,
    "regressor": "gradient_boosted_trees",
    "workers": 1,
    "bh": False,
}


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in doc.items()}


def settings(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    merged = dict(DEFAULTS)
    merged.update(_load_config_file(getattr(args, "config", None)))
    merged.update({k: v for k, v in vars(args).items() if v is not None and k not in ("func", "config")})
    return merged


def _provider_cfg(s: dict) -> ProviderConfig:
    return ProviderConfig(
        endpoint=s["endpoint"], model=s["model"], temperature=float(s["temperature"]), api_key_env=s["api_key_env"]
    )


def _run_config(s: dict) -> RunConfig:
    for key in ("data", "metadata"):
        if not s.get(key):
            raise ConfigError(f"--{key} is required")
    opt = lambda key: Path(s[key]) if s.get(key) else None  # noqa: E731
    return RunConfig(
        data=Path(s["data"]),
        metadata=Path(s["metadata"]),
        truth=opt("truth"),
        alpha=float(s["alpha"]),
        provider=s["provider"],
        provider_cfg=_provider_cfg(s),
        mock_dir=opt("mock_dir"),
        record_dir=opt("record_dir"),
        runs=int(s["runs"]),
        seed=int(s["seed"]),
        out=Path(s["out"]),
        neutralize=s["neutralize"],
        bounded=bool(s["bounded"]),
        second_audit=bool(s["second_audit"]),
        domain_hint=s.get("domain_hint"),
        regressor=RegressorConfig(family=s["regressor"], seed=int(s["seed"])),
        bh=bool(s["bh"]),
        workers=int(s["workers"]),
    )


def cmd_run(args) -> int:
    cfg = _run_config(settings(args))
    artifacts = run_pipeline(cfg)
    summary = cfg.out / "summary.txt"
    if summary.exists():
        sys.stdout.write(summary.read_text(encoding="utf-8"))
    for art in artifacts:
        for warning in art.warnings:
            log.warning("run %d: %s", art.index, warning)
    failed = [a for a in artifacts if not a.ok]
    for art in failed:
        print(f"run {art.index} failed during {art.error_phase}: {art.error}", file=sys.stderr)
    return failed[0].exit_code if failed else 0


def cmd_draft(args) -> int:
    s = settings(args)
    if not s.get("metadata"):
        raise ConfigError("--metadata is required")
    cfg = RunConfig(
        data=Path(s.get("data") or s["metadata"]),
        metadata=Path(s["metadata"]),
        provider=s["provider"],
        provider_cfg=_provider_cfg(s),
        mock_dir=Path(s["mock_dir"]) if s.get("mock_dir") else None,
        record_dir=Path(s["record_dir"]) if s.get("record_dir") else None,
    )
    metadata = read_metadata(cfg.metadata)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    if s.get("print_prompt"):
        print(build_draft_prompt(metadata, s.get("domain_hint")).user_text)
        return 0
    exchanges: list = []
    try:
        result = draft_graph(make_provider(cfg), metadata, s.get("domain_hint"), exchanges)
    finally:
        for k, (prompt, raw) in enumerate(exchanges):
            (out / f"draft_prompt_{k}.json").write_text(json.dumps(prompt.to_json(), indent=2) + "\n", encoding="utf-8")
            (out / f"draft_response_{k}.txt").write_text(raw, encoding="utf-8")
    (out / "draft.json").write_text(json.dumps(result.to_json(), indent=2) + "\n", encoding="utf-8")
    write_graph(result.dag, out / "draft_graph.json")
    write_graph(result.dag, out / "draft_graph.dot")
    print(json.dumps(result.to_json(), indent=2))
    return 0


def cmd_audit(args) -> int:
    s = settings(args)
    for key in ("graph", "data", "metadata"):
        if not s.get(key):
            raise ConfigError(f"--{key} is required")
    ds = load_table(s["data"], read_metadata(s["metadata"]))
    dag = read_graph(s["graph"])
    regressor = RegressorConfig(family=s["regressor"], seed=int(s["seed"]))
    report = audit_graph(dag, ds, float(s["alpha"]), regressor, bh=bool(s["bh"]), workers=int(s["workers"]))
    text = json.dumps(report.to_json(), indent=2) + "\n"
    if s.get("report"):
        Path(s["report"]).write_text(text, encoding="utf-8")
    for f in report.findings:
        print(f"{f.implied.x:>12} {f.implied.y:<12} {f.observed.test_kind:<20} p={f.observed.p_value:.3g} q={f.observed.q_value:.3g} {f.verdict}")
    return 0


def cmd_eval(args) -> int:
    s = settings(args)
    pred, truth = read_graph(s["pred"]), read_graph(s["truth"])
    report = evaluate(pred, truth, bool(s["bounded"]))
    sys.stdout.write(format_table({"prediction": report}))
    if s.get("report"):
        Path(s["report"]).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_gen(args) -> int:
    """Synthetic linear-Gaussian fixture: data.csv, metadata.json, truth.json/.dot."""
    s = settings(args)
    rng = np.random.default_rng(int(s["seed"]))
    if s.get("chain"):
        names = [f"V{i + 1}" for i in range(int(s["nodes"]))]
        dag = new_dag(names, list(zip(names, names[1:])))
    else:
        dag = random_dag(int(s["nodes"]), float(s["edge_prob"]), rng)
    spec = random_linear_scm(dag, rng, seed=int(s["seed"]))
    ds, truth = synthesize_scm(spec, int(s["samples"]))
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_table(ds, out / "data.csv")
    write_metadata(ds.metadata, out / "metadata.json")
    write_graph(truth, out / "truth.json")
    write_graph(truth, out / "truth.dot")
    if s.get("mock_truth"):
        mock = out / "mock"
        mock.mkdir(exist_ok=True)
        answer = json.dumps(graph_to_json(truth))
        prompt = build_draft_prompt(list(ds.metadata), s.get("domain_hint"))
        (mock / f"{prompt.digest()}.txt").write_text(answer, encoding="utf-8")
        # a default-settings audit of the truth may still flag pairs; answer that revision by keeping the graph
        report = audit_graph(truth, ds)
        if report.discrepancies:
            revision = build_revision_prompt(truth, report)
            (mock / f"{revision.digest()}.txt").write_text(answer, encoding="utf-8")
    print(f"wrote {out} ({len(truth)} nodes, {len(truth.edges)} edges, {ds.sample_count} samples)")
    return 0


def _provider_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", choices=["openai_compatible", "mock"])
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--temperature", type=float)
    p.add_argument("--mock-dir", dest="mock_dir")
    p.add_argument("--record-dir", dest="record_dir")
    p.add_argument("--domain-hint", dest="domain_hint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmcd", description="LLM-drafted causal graphs audited with CI tests.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="draft, audit, refine and (optionally) evaluate")
    run.add_argument("--config")
    run.add_argument("--data")
    run.add_argument("--metadata")
    run.add_argument("--truth")
    run.add_argument("--alpha", type=float)
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--neutralize", choices=["off", "strip_descriptions", "full_neutralize"])
    run.add_argument("--bounded", action="store_true", default=None)
    run.add_argument("--second-audit", dest="second_audit", action="store_true", default=None)
    run.add_argument("--regressor", choices=["gradient_boosted_trees", "linear"])
    run.add_argument("--workers", type=int)
    run.add_argument("--bh", action="store_true", default=None, help="Benjamini-Hochberg (pi0 = 1)")
    _provider_flags(run)
    run.set_defaults(func=cmd_run)

    draft = sub.add_parser("draft", help="Phase I only: draft a graph from metadata")
    draft.add_argument("--config")
    draft.add_argument("--metadata")
    draft.add_argument("--data")
    draft.add_argument("--out")
    draft.add_argument("--print-prompt", dest="print_prompt", action="store_true", default=None)
    _provider_flags(draft)
    draft.set_defaults(func=cmd_draft)

    audit = sub.add_parser("audit", help="audit a graph file against data")
    audit.add_argument("--config")
    audit.add_argument("--graph")
    audit.add_argument("--data")
    audit.add_argument("--metadata")
    audit.add_argument("--alpha", type=float)
    audit.add_argument("--seed", type=int)
    audit.add_argument("--regressor", choices=["gradient_boosted_trees", "linear"])
    audit.add_argument("--workers", type=int)
    audit.add_argument("--bh", action="store_true", default=None)
    audit.add_argument("--report", help="write the JSON report here")
    audit.set_defaults(func=cmd_audit)

    ev = sub.add_parser("eval", help="score a predicted graph against a reference graph")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--bounded", action="store_true", default=None)
    ev.add_argument("--report", help="write the JSON metrics here")
    ev.set_defaults(func=cmd_eval)

    gen = sub.add_parser("gen", help="write a synthetic linear-Gaussian fixture")
    gen.add_argument("--nodes", type=int, default=5)
    gen.add_argument("--edge-prob", dest="edge_prob", type=float, default=0.4)
    gen.add_argument("--samples", type=int, default=2000)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--chain", action="store_true", default=None)
    gen.add_argument("--mock-truth", dest="mock_truth", action="store_true", default=None,
                     help="also write a mock provider directory answering the draft prompt with the true graph")
    gen.add_argument("--domain-hint", dest="domain_hint")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    del args.verbose, args.command
    try:
        return args.func(args)
    except DmcdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
