#!/usr/bin/env python3
"""Build a knowledge graph from the bundled toy corpora and inspect it.

Walks through the indexing pipeline by hand: parse functions out of a code
corpus, flatten JSON tutorials into path-value nodes, embed everything with
the deterministic embedder, seal the graph, and save it next to this script.
"""

import json
from pathlib import Path

from pkgraph import (
    EmbedderSpec,
    NodeKind,
    PkgGraph,
    analyze_source,
    embed_graph,
    emit_graph,
    json_to_graph,
    strip_code_fences,
)

DATA = Path(__file__).parent / "data"
OUT = Path(__file__).parent / "out" / "toy-graph"


def main() -> None:
    spec = EmbedderSpec(id="det-v1", dimension=256)
    graph = PkgGraph(embedder_id=spec.id, embedding_dim=spec.dimension)

    # 1. Code corpus: one record per line; functions are extracted from the
    #    record's output field after stripping markdown fences.
    for line_no, line in enumerate((DATA / "code_corpus.jsonl").read_text().splitlines(), 1):
        record = json.loads(line)
        source = strip_code_fences(record["output"])
        functions, diagnostics = analyze_source(source, f"code:{line_no}")
        emit_graph(functions, graph)
        print(f"code:{line_no}: {len(functions)} function(s), "
              f"{sum(len(f.blocks) for f in functions)} block(s), "
              f"{len(diagnostics)} diagnostic(s)")

    # 2. Text corpus: each line is one pre-structured JSON document.
    for line_no, line in enumerate((DATA / "tutorials.jsonl").read_text().splitlines(), 1):
        json_to_graph(line, f"tutorial:{line_no}", graph)

    # 3. Encode every node and freeze the graph.
    embedded = embed_graph(graph, spec)
    graph.seal()
    print(f"\nembedded {embedded} nodes with {spec.id} (d={spec.dimension})")

    stats = graph.stats()
    for kind in NodeKind:
        print(f"  {kind.value:>14}: {stats.node_counts[kind]}")
    print(f"  {'edges':>14}: {stats.total_edges}")

    # 4. Persist: manifest.json + nodes.jsonl + edges.jsonl.
    graph.save(OUT)
    print(f"\nsaved to {OUT}")
    reloaded = PkgGraph.load(OUT)
    print(f"reload identical: {reloaded == graph}")


if __name__ == "__main__":
    main()
