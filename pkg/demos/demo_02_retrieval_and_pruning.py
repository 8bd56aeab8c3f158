#!/usr/bin/env python3
"""Semantic retrieval with branch pruning over the toy graph.

Shows the three retrieval modes and the pruning behavior on a two-branch
counting function: a branch-specific query gets the off-topic branch removed,
while a query covering both topics keeps the function untouched.
"""

from pathlib import Path

from pkgraph import EmbedderSpec, PkgGraph, PruneConfig, RetrievalMode, retrieve, search

GRAPH_DIR = Path(__file__).parent / "out" / "toy-graph"


def show(result, title: str) -> None:
    print(f"--- {title} ---")
    print(f"node {result.node_id}  raw={result.raw_similarity:.4f}  "
          f"augmented={result.augmented_similarity:.4f}  pruned={result.pruned}")
    if result.pruned_branch_spans:
        print(f"removed line spans: {result.pruned_branch_spans}")
    print(result.rendered_context)
    for name, impl in result.resolved_calls:
        print(f"[helper {name}]")
        print(impl)
    print()


def main() -> None:
    if not GRAPH_DIR.exists():
        raise SystemExit("run demo_01_build_graph.py first")
    graph = PkgGraph.load(GRAPH_DIR)
    spec = EmbedderSpec(id=graph.embedder_id, dimension=graph.embedding_dim)
    cfg = PruneConfig()

    # Block-wise retrieval: the most granular mode.
    show(retrieve(graph, "sum the positive numbers", RetrievalMode.BLOCK_WISE, cfg, spec),
         "block-wise: sum the positive numbers")

    # Function-wise retrieval with pruning: the query mentions only boring
    # stories, so the exciting-branch loop is dropped from the rendering.
    show(retrieve(graph, "count the boring stories", RetrievalMode.FUNCTION_WISE, cfg, spec),
         "function-wise: count the boring stories")

    # The both-topic query keeps the identity rendering.
    show(retrieve(graph, "count the boring and exciting stories",
                  RetrievalMode.FUNCTION_WISE, cfg, spec),
         "function-wise: count boring AND exciting")

    # Call resolution: the mapper calls double_value, whose implementation is
    # attached from the graph so the context is self-contained.
    show(retrieve(graph, "double all items in a list", RetrievalMode.FUNCTION_WISE, cfg, spec),
         "function-wise with call resolution")

    # Path-value retrieval over the tutorials.
    show(retrieve(graph, "how to iterate over items", RetrievalMode.PATH_VALUE, cfg, spec),
         "path-value: how to iterate over items")

    # Raw ranked search is available for diagnostics.
    print("--- top 3 blocks for 'open file lines' ---")
    for node_id, score in search(graph, "open file lines", RetrievalMode.BLOCK_WISE, 3, spec):
        print(f"  node {node_id}: {score:.4f}")


if __name__ == "__main__":
    main()
