#!/usr/bin/env python3
"""Prompt augmentation and candidate re-ranking.

Renders the retrieved context into model-specific prompt templates, then runs
three candidate solutions through the three-stage re-ranker: syntax filter,
sandboxed execution, and semantic selection against the query.
"""

import sys
from pathlib import Path

from pkgraph import (
    Candidate,
    EmbedderSpec,
    PkgGraph,
    PruneConfig,
    RetrievalMode,
    RunnerSpec,
    augment,
    rerank,
    retrieve,
)

ROOT = Path(__file__).parent.parent
GRAPH_DIR = Path(__file__).parent / "out" / "toy-graph"


def runner_command() -> str:
    """Prefer the built TypeScript runner; fall back to the test stub."""
    live = ROOT / "runner" / "dist" / "cli.js"
    if live.exists():
        return f"node {live}"
    return f"{sys.executable} {ROOT / 'tests' / 'stub_runner.py'}"


def main() -> None:
    if not GRAPH_DIR.exists():
        raise SystemExit("run demo_01_build_graph.py first")
    graph = PkgGraph.load(GRAPH_DIR)
    spec = EmbedderSpec(id=graph.embedder_id, dimension=graph.embedding_dim)
    query = "count how many boring stories appear in a list"

    result = retrieve(graph, query, RetrievalMode.FUNCTION_WISE, PruneConfig(), spec)
    for template in ("codellama", "starcoder", "deepseek"):
        print(f"=== {template} prompt ===")
        print(augment(query, result, template))
        print()

    candidates = [
        Candidate(id="none", origin="none",
                  source="def count_boring(stories):\n    return sum(s.count('boring') for s in stories)\n"),
        Candidate(id="block-pkg", origin="block-pkg",
                  source="def count_boring(stories):\n    return len(undefined_helper(stories))\n"),
        Candidate(id="bm25", origin="bm25",
                  source="def count_boring(stories:\n    pass\n"),
    ]
    # The bm25 candidate fails the syntax filter, the block-pkg one dies at
    # runtime (module-scope execution catches nothing here, but the judge-style
    # call below would), and the none candidate survives to the similarity stage.
    candidates[1].source += "undefined_helper([])\n"

    runner = RunnerSpec(command=runner_command(), timeout_seconds=5.0)
    report = rerank(candidates, query, runner, spec)
    counts = report.survivor_counts
    print("=== re-ranking ===")
    print(f"{counts[0]} candidates -> {counts[1]} parse -> {counts[2]} run")
    for candidate in report.candidates:
        print(f"  {candidate.id:>10}: syntax_ok={candidate.syntax_ok} "
              f"runtime_ok={candidate.runtime_ok} "
              f"error={candidate.runtime_error_kind} sim={candidate.similarity}")
    print(f"chosen: {report.chosen.id} (tier {report.tier})")
    print(f"stage error rates: {report.stage_error_rates}")


if __name__ == "__main__":
    main()
