"""Command-line entry point: build, query, rerank, eval, stats.

Exit codes: 0 success, 1 environment or input error, 2 empty-result domain
outcome (nothing of the requested kind in the index, no candidates).
All --json outputs are deterministic given the det-v1 embedder and the mock
generator: keys are sorted and no timestamps are emitted.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import code_analyzer, json_analyzer
from .embedding import EmbedderSpec, embed_graph
from .errors import (
    ConfigError,
    EmptyIndex,
    NoCandidates,
    NotAnObject,
    ParseFailure,
    PkgError,
    ProviderError,
)
from .evalharness import (
    APPROACH_PRESETS,
    Approach,
    GeneratorSpec,
    load_mock_table,
    load_tasks,
    run_suite,
    write_pass_matrix_csv,
)
from .graph import PkgGraph, thaw
from .rerank import RunnerSpec, load_candidate_dir, rerank
from .retrieval import PruneConfig, RetrievalMode, retrieve, search

_MODE_BY_NAME = {
    "block": RetrievalMode.BLOCK_WISE,
    "function": RetrievalMode.FUNCTION_WISE,
    "path": RetrievalMode.PATH_VALUE,
}


@dataclass
class Config:
    embedder: EmbedderSpec
    runner: RunnerSpec
    prune: PruneConfig
    generator: GeneratorSpec | None
    parallelism: int = 4


def load_config(path: str | None) -> Config:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from exc
    embedder = _build_section(raw, "embedder", EmbedderSpec)
    runner_raw = dict(raw.get("runner", {}))
    runner_raw.setdefault("command", "pkgraph-sandbox-runner")
    try:
        runner = RunnerSpec(**runner_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("runner", str(exc)) from exc
    prune = _build_section(raw, "prune", PruneConfig)
    generator = None
    if "generator" in raw:
        generator = _build_section(raw, "generator", GeneratorSpec)
    parallelism = raw.get("parallelism", 4)
    if not isinstance(parallelism, int) or parallelism <= 0:
        raise ConfigError("parallelism", "must be a positive integer")
    return Config(embedder, runner, prune, generator, parallelism)


def _build_section(raw: dict, name: str, factory):
    try:
        return factory(**raw.get(name, {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from exc


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except (EmptyIndex, NoCandidates) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PkgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# --- commands ------------------------------------------------------------------


def cmd_build(args: argparse.Namespace, config: Config) -> int:
    spec = _override_embedder(config.embedder, args)
    out_dir = Path(args.out)

    if args.resume and (out_dir / "manifest.json").exists():
        graph = thaw(PkgGraph.load(out_dir))
        spec = _spec_for_graph(graph, spec)
        skipped = 0
    else:
        graph = PkgGraph(embedder_id=spec.id, embedding_dim=spec.dimension)
        skipped = _ingest_corpus(Path(args.input), args.kind, graph)

    if not args.no_embed:
        try:
            embedded = embed_graph(graph, spec)
        except ProviderError as exc:
            # Keep partial progress on disk so --resume can continue.
            graph.seal()
            graph.save(out_dir)
            print(f"error: embedding failed ({exc}); partial graph saved, rerun with --resume",
                  file=sys.stderr)
            return 1
        print(f"embedded {embedded} nodes")

    graph.seal()
    graph.save(out_dir)
    stats = graph.stats()
    print(f"skipped records: {skipped}")
    print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_query(args: argparse.Namespace, config: Config) -> int:
    graph = PkgGraph.load(args.graph)
    spec = _spec_for_graph(graph, config.embedder)
    cfg = PruneConfig(
        enabled=config.prune.enabled and not args.no_prune,
        max_branches_removed=config.prune.max_branches_removed,
        min_remaining_lines=config.prune.min_remaining_lines,
    )
    mode = _MODE_BY_NAME[args.mode]
    result = retrieve(graph, args.prompt, mode, cfg, spec)
    payload = result.to_dict()
    if args.top_k > 1:
        ranked = search(graph, args.prompt, mode, args.top_k, spec)
        payload["ranking"] = [{"node_id": nid, "score": score} for nid, score in ranked]
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        node = graph.node(result.node_id)
        print(f"best node: {result.node_id} ({node.kind.value}, doc {node.doc_id})")
        print(f"similarity: {result.raw_similarity:.6f}"
              f" (augmented {result.augmented_similarity:.6f}, pruned={result.pruned})")
        print("--- context ---")
        print(result.rendered_context)
        for name, impl in result.resolved_calls:
            print(f"--- helper {name} ---")
            print(impl)
    return 0


def cmd_rerank(args: argparse.Namespace, config: Config) -> int:
    candidates = load_candidate_dir(args.candidates)
    runner = _override_runner(config.runner, args)
    report = rerank(candidates, args.query, runner, config.embedder,
                    max_workers=config.parallelism)
    if args.json:
        print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True))
    else:
        counts = report.survivor_counts
        print(f"candidates: {counts[0]} -> syntax ok: {counts[1]} -> runs: {counts[2]}")
        print(f"chosen: {report.chosen.id} (origin {report.chosen.origin}, tier {report.tier})")
        print(report.chosen.source)
    return 0


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    graph = PkgGraph.load(args.graph) if args.graph else None
    tasks = load_tasks(args.tasks)
    approaches = []
    for label in args.approaches.split(","):
        label = label.strip()
        if label not in APPROACH_PRESETS:
            raise ConfigError("approaches", f"unknown approach {label!r}; "
                              f"choose from {sorted(APPROACH_PRESETS)}")
        preset = APPROACH_PRESETS[label]
        template = preset.template if label == "none" else (args.template or preset.template)
        approaches.append(Approach(preset.label, preset.mode, preset.prune, template))

    generator = config.generator or GeneratorSpec()
    if args.mock_table:
        generator.mock_table = load_mock_table(args.mock_table)
        generator.endpoint = "mock"
    runner = _override_runner(config.runner, args)
    spec = _spec_for_graph(graph, config.embedder) if graph else config.embedder

    report = run_suite(
        tasks, graph, approaches, generator, runner, spec,
        prune_cfg=config.prune, retries=args.retries, max_workers=config.parallelism,
    )
    payload = json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(payload + "\n", encoding="utf-8")
    if args.csv:
        write_pass_matrix_csv(report, args.csv)
    if args.json:
        print(payload)
    else:
        print("pass@1:")
        for label in report.approaches + ["reranked"]:
            print(f"  {label:>20}: {report.pass_at_1[label]:.3f}")
        print(f"  {'ideal reranker':>20}: {report.ideal_rerank_pass_at_1:.3f}")
    return 0


def cmd_stats(args: argparse.Namespace, config: Config) -> int:
    graph = PkgGraph.load(args.graph)
    manifest = graph.manifest()
    print(json.dumps(
        {"manifest": manifest.__dict__, "stats": graph.stats().to_dict()},
        indent=2, sort_keys=True,
    ))
    return 0


# --- helpers -------------------------------------------------------------------


def _ingest_corpus(path: Path, kind: str, graph: PkgGraph) -> int:
    """Feed a JSONL corpus into the builder; returns the skipped-record count."""
    skipped = 0
    stem = path.stem
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            doc_id = f"{stem}:{line_no}"
            if kind == "code":
                try:
                    record = json.loads(line)
                    output = record["output"]
                except (json.JSONDecodeError, TypeError, KeyError):
                    skipped += 1
                    continue
                source = code_analyzer.strip_code_fences(output)
                functions, _diagnostics = code_analyzer.analyze_source(source, doc_id)
                code_analyzer.emit_graph(functions, graph)
            else:
                try:
                    json_analyzer.json_to_graph(line, doc_id, graph)
                except (ParseFailure, NotAnObject):
                    skipped += 1
    return skipped


def _override_embedder(spec: EmbedderSpec, args: argparse.Namespace) -> EmbedderSpec:
    dimension = getattr(args, "dimension", None)
    if dimension:
        return EmbedderSpec(
            id=spec.id, dimension=dimension, endpoint=spec.endpoint,
            api_key_env=spec.api_key_env, batch_size=spec.batch_size,
            model=spec.model, timeout_seconds=spec.timeout_seconds,
        )
    return spec


def _override_runner(runner: RunnerSpec, args: argparse.Namespace) -> RunnerSpec:
    command = getattr(args, "runner_cmd", None)
    if command:
        return RunnerSpec(command=command, timeout_seconds=runner.timeout_seconds,
                          memory_limit_mb=runner.memory_limit_mb)
    return runner


def _spec_for_graph(graph: PkgGraph, base: EmbedderSpec) -> EmbedderSpec:
    """Query-side spec pinned to the graph's embedder id and dimension."""
    return EmbedderSpec(
        id=graph.embedder_id, dimension=graph.embedding_dim, endpoint=base.endpoint,
        api_key_env=base.api_key_env, batch_size=base.batch_size, model=base.model,
        timeout_seconds=base.timeout_seconds,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkgraph",
        description="Programming knowledge graph: build, retrieve, re-rank, evaluate.",
    )
    parser.add_argument("--config", default=None, help="Path to a JSON config file.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="Build a graph from a JSONL corpus.")
    p_build.add_argument("--input", required=True, help="Corpus JSONL path.")
    p_build.add_argument("--kind", choices=["code", "json"], required=True)
    p_build.add_argument("--out", required=True, help="Output graph directory.")
    p_build.add_argument("--no-embed", action="store_true", help="Skip embedding.")
    p_build.add_argument("--resume", action="store_true",
                         help="Resume embedding of a partially built graph.")
    p_build.add_argument("--dimension", type=int, default=None,
                         help="Override the embedder dimension.")
    p_build.set_defaults(handler=cmd_build)

    p_query = sub.add_parser("query", help="Retrieve context for a prompt.")
    p_query.add_argument("--graph", required=True)
    p_query.add_argument("--mode", choices=sorted(_MODE_BY_NAME), required=True)
    p_query.add_argument("--prompt", required=True)
    p_query.add_argument("--no-prune", action="store_true")
    p_query.add_argument("--top-k", type=int, default=1)
    p_query.add_argument("--json", action="store_true")
    p_query.set_defaults(handler=cmd_query)

    p_rerank = sub.add_parser("rerank", help="Re-rank a candidate directory.")
    p_rerank.add_argument("--candidates", required=True,
                          help="Directory with index.jsonl and candidate files.")
    p_rerank.add_argument("--query", required=True)
    p_rerank.add_argument("--runner-cmd", default=None, help="Sandbox runner command.")
    p_rerank.add_argument("--json", action="store_true")
    p_rerank.set_defaults(handler=cmd_rerank)

    p_eval = sub.add_parser("eval", help="Run a task suite across approaches.")
    p_eval.add_argument("--graph", default=None)
    p_eval.add_argument("--tasks", required=True)
    p_eval.add_argument("--approaches", required=True,
                        help="Comma-separated labels, e.g. none,block-pkg.")
    p_eval.add_argument("--report", default=None, help="Write the JSON report here.")
    p_eval.add_argument("--csv", default=None, help="Write the pass matrix as CSV.")
    p_eval.add_argument("--template", default=None,
                        help="Prompt template for retrieval approaches.")
    p_eval.add_argument("--mock-table", default=None, help="Mock generator table JSONL.")
    p_eval.add_argument("--runner-cmd", default=None)
    p_eval.add_argument("--retries", type=int, default=1)
    p_eval.add_argument("--json", action="store_true")
    p_eval.set_defaults(handler=cmd_eval)

    p_stats = sub.add_parser("stats", help="Print graph statistics.")
    p_stats.add_argument("--graph", required=True)
    p_stats.set_defaults(handler=cmd_stats)

    return parser


if __name__ == "__main__":
    raise SystemExit(main())
