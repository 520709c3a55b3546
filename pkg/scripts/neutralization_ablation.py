"""Metadata-neutralization ablation with a scripted stand-in for the language model.

The stand-in "knows" the true graph only through variable names: it answers
with the truth when the prompt carries the original ids and with a chain over
whatever ids it sees otherwise. Comparing modes shows how the pipeline
reacts when name cues disappear; with a real provider pass --provider to the
``dmcd run`` command instead.

    python3 scripts/neutralization_ablation.py --out /tmp/ablation
"""

import argparse
import json
import re
from pathlib import Path

import numpy as np

from dmcd.data import random_dag, random_linear_scm, synthesize_scm, write_metadata, write_table
from dmcd.graphio import graph_to_json, write_graph
from dmcd.pipeline import RunConfig, run_pipeline
from dmcd.providers import ScriptedProvider

ID_LINE = re.compile(r"^- id: (\S+)$", re.M)


def stand_in(truth):
    known = set(truth.nodes)

    def answer(prompt):
        if "Findings:" in prompt.user_text:
            graph = json.loads(re.findall(r"```json\n(.*?)\n```", prompt.user_text, re.S)[0])
            return json.dumps(graph)
        ids = ID_LINE.findall(prompt.user_text)
        if set(ids) == known:
            doc = graph_to_json(truth)
            doc["nodes"] = [v for v in truth.nodes if truth.degree(v)]
            return json.dumps(doc)
        return json.dumps({"nodes": ids, "edges": [[u, v] for u, v in zip(ids, ids[1:])]})

    return ScriptedProvider(answer)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=6)
    parser.add_argument("--samples", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--out", type=Path, default=Path("ablation_out"))
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    truth = random_dag(args.nodes, 0.4, rng)
    ds, _ = synthesize_scm(random_linear_scm(truth, rng, seed=args.seed), args.samples)
    fixture = args.out / "fixture"
    fixture.mkdir(parents=True, exist_ok=True)
    write_table(ds, fixture / "data.csv")
    write_metadata(ds.metadata, fixture / "metadata.json")
    write_graph(truth, fixture / "truth.json")

    for mode in ("off", "strip_descriptions", "full_neutralize"):
        cfg = RunConfig(
            data=fixture / "data.csv",
            metadata=fixture / "metadata.json",
            truth=fixture / "truth.json",
            out=args.out / mode,
            runs=args.runs,
            seed=args.seed,
            neutralize=mode,
        )
        run_pipeline(cfg, stand_in(truth))
        print(f"== {mode}")
        print((args.out / mode / "summary.txt").read_text())


if __name__ == "__main__":
    main()
