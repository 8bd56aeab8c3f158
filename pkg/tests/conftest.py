import sys
from pathlib import Path

import pytest

from pkgraph import (
    EmbedderSpec,
    PkgGraph,
    RunnerSpec,
    analyze_source,
    embed_graph,
    emit_graph,
)

TESTS_DIR = Path(__file__).parent

STUB_RUNNER_CMD = f"{sys.executable} {TESTS_DIR / 'stub_runner.py'}"

TOY_CORPUS = '''def add_numbers(a, b):
    return a + b

def count_stories(stories):
    boring = 0
    exciting = 0
    for story in stories:
        boring = boring + story.count("boring")
    for story in stories:
        exciting = exciting + story.count("exciting")
    return boring, exciting

def read_lines(path):
    lines = []
    with open(path) as handle:
        for line in handle:
            if line.strip():
                lines.append(line)
    return lines
'''


@pytest.fixture
def det_spec() -> EmbedderSpec:
    return EmbedderSpec(id="det-v1", dimension=256)


@pytest.fixture
def stub_runner() -> RunnerSpec:
    return RunnerSpec(command=STUB_RUNNER_CMD, timeout_seconds=5.0)


@pytest.fixture
def toy_graph(det_spec) -> PkgGraph:
    """Three-function code graph, fully embedded with det-v1."""
    graph = PkgGraph(embedder_id=det_spec.id, embedding_dim=det_spec.dimension)
    functions, diagnostics = analyze_source(TOY_CORPUS, "toy:1")
    assert not diagnostics
    emit_graph(functions, graph)
    embed_graph(graph, det_spec)
    graph.seal()
    return graph
