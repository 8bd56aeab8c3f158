"""Semantic search over the graph, branch pruning, and call-name resolution.

Search is exact brute force: the query is embedded once and compared against
every node of the mode's kind by cosine similarity, descending, with ties
broken by ascending node id. Pruning re-renders the best code node with one
child branch's lines deleted and keeps whichever variant (including the
untouched node) is most similar to the query.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from enum import Enum

from .embedding import EmbedderSpec, embed_text, similarity
from .errors import EmptyIndex, MissingEmbedding, WrongKind
from .graph import EdgeKind, NodeKind, PkgGraph, PkgNode
from .templates import augment

__all__ = [
    "RetrievalMode", "PruneConfig", "RetrievalResult", "PruneResult",
    "search", "prune", "resolve_calls", "retrieve", "augment",
]


class RetrievalMode(str, Enum):
    BLOCK_WISE = "block"
    FUNCTION_WISE = "function"
    PATH_VALUE = "path"


_KIND_FOR_MODE = {
    RetrievalMode.BLOCK_WISE: NodeKind.CODE_BLOCK,
    RetrievalMode.FUNCTION_WISE: NodeKind.FUNCTION_IMPL,
    RetrievalMode.PATH_VALUE: NodeKind.PATH_VALUE,
}

_CHILD_EDGE_FOR_KIND = {
    NodeKind.FUNCTION_IMPL: EdgeKind.IMPL_TO_BLOCK,
    NodeKind.CODE_BLOCK: EdgeKind.BLOCK_TO_BLOCK,
}


@dataclass
class PruneConfig:
    enabled: bool = True
    max_branches_removed: int = 1
    min_remaining_lines: int = 1

    def __post_init__(self) -> None:
        if self.max_branches_removed <= 0:
            raise ValueError("max_branches_removed must be positive")
        if self.min_remaining_lines <= 0:
            raise ValueError("min_remaining_lines must be positive")


@dataclass
class PruneResult:
    rendered: str
    removed_spans: list[tuple[int, int]]
    similarity: float


@dataclass
class RetrievalResult:
    node_id: int
    raw_similarity: float
    rendered_context: str
    pruned: bool
    pruned_branch_spans: list[tuple[int, int]] = field(default_factory=list)
    resolved_calls: list[tuple[str, str]] = field(default_factory=list)
    augmented_similarity: float = 0.0

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "raw_similarity": self.raw_similarity,
            "rendered_context": self.rendered_context,
            "pruned": self.pruned,
            "pruned_branch_spans": [list(span) for span in self.pruned_branch_spans],
            "resolved_calls": [
                {"name": name, "impl": impl} for name, impl in self.resolved_calls
            ],
            "augmented_similarity": self.augmented_similarity,
        }


def search(
    graph: PkgGraph,
    query: str,
    mode: RetrievalMode,
    top_k: int,
    spec: EmbedderSpec,
) -> list[tuple[int, float]]:
    """Rank all nodes of the mode's kind against the query, best first."""
    if top_k <= 0:
        raise ValueError("top_k must be positive")
    kind = _KIND_FOR_MODE[mode]
    candidates = list(graph.nodes_of_kind(kind))
    if not candidates:
        raise EmptyIndex(f"graph has no {kind.value} nodes")
    for node in candidates:
        if node.embedding is None:
            raise MissingEmbedding(node.id)
    query_vec = embed_text(spec, query)
    scored = [(node.id, similarity(query_vec, node.embedding)) for node in candidates]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:top_k]


def prune(
    graph: PkgGraph,
    node_id: int,
    query: str,
    cfg: PruneConfig,
    spec: EmbedderSpec,
) -> PruneResult:
    """Greedily drop up to max_branches_removed child branches if that helps.

    The candidate set in each round is the current rendering plus each
    remaining immediate child branch deleted; ties keep the current rendering
    first, then the lowest branch index. Removed spans are absolute line spans
    so the original text can be reconstructed.
    """
    node = graph.node(node_id)
    child_edge = _CHILD_EDGE_FOR_KIND.get(node.kind)
    if child_edge is None:
        raise WrongKind(f"cannot prune {node.kind.value} node {node_id}")

    query_vec = embed_text(spec, query)
    base_lines = node.content.split("\n")
    current_sim = similarity(query_vec, embed_text(spec, node.content))

    if node.span is None:
        return PruneResult(node.content, [], current_sim)
    offset = node.span[0]

    children = [
        graph.node(edge.dst)
        for edge in graph.out_edges(node_id, child_edge)
        if graph.node(edge.dst).span is not None
    ]
    removed: list[tuple[int, int]] = []
    remaining = list(enumerate(children))

    for _round in range(cfg.max_branches_removed):
        best: tuple[float, int, PkgNode, str] | None = None
        for branch_index, child in remaining:
            attempt = removed + [child.span]
            text = _render_without(base_lines, offset, attempt)
            if _line_count(text) < cfg.min_remaining_lines:
                continue
            score = similarity(query_vec, embed_text(spec, text))
            if best is None or score > best[0]:
                best = (score, branch_index, child, text)
        if best is None or best[0] <= current_sim:
            break
        current_sim = best[0]
        removed.append(best[2].span)
        remaining = [(i, c) for i, c in remaining if i != best[1]]

    rendered = _render_without(base_lines, offset, removed) if removed else node.content
    return PruneResult(rendered, removed, current_sim)


def resolve_calls(
    graph: PkgGraph,
    text: str,
    query: str,
    spec: EmbedderSpec,
    max_calls: int = 3,
) -> list[tuple[str, str]]:
    """Attach implementations for functions called but not defined in the text.

    Names are matched exactly against function-name nodes; when several corpus
    functions share a name, the one whose implementation is most similar to
    the query wins (ascending node id on ties). Resolution is depth 1.
    """
    if max_calls <= 0:
        return []
    called, defined = _called_and_defined(text)
    query_vec = None
    resolved: list[tuple[str, str]] = []
    for name in called:
        if name in defined or name in PYTHON_BUILTINS:
            continue
        matches = [
            n for n in graph.nodes_of_kind(NodeKind.FUNCTION_NAME) if n.content == name
        ]
        impls = [impl for impl in map(lambda n: _impl_of(graph, n), matches) if impl is not None]
        if not impls:
            continue
        if len(impls) == 1:
            chosen = impls[0]
        else:
            if query_vec is None:
                query_vec = embed_text(spec, query)
            scored = [
                (
                    -similarity(
                        query_vec,
                        impl.embedding
                        if impl.embedding is not None
                        else embed_text(spec, impl.content),
                    ),
                    impl.id,
                    impl,
                )
                for impl in impls
            ]
            scored.sort(key=lambda item: (item[0], item[1]))
            chosen = scored[0][2]
        resolved.append((name, chosen.content))
        if len(resolved) >= max_calls:
            break
    return resolved


def retrieve(
    graph: PkgGraph,
    query: str,
    mode: RetrievalMode,
    cfg: PruneConfig,
    spec: EmbedderSpec,
    max_calls: int = 3,
) -> RetrievalResult:
    """search(top 1) -> prune (code modes, when enabled) -> resolve_calls."""
    node_id, raw = search(graph, query, mode, top_k=1, spec=spec)[0]
    node = graph.node(node_id)

    if mode is RetrievalMode.PATH_VALUE:
        return RetrievalResult(
            node_id=node_id, raw_similarity=raw, rendered_context=node.content,
            pruned=False, augmented_similarity=raw,
        )

    if cfg.enabled:
        outcome = prune(graph, node_id, query, cfg, spec)
        rendered, spans, augmented = outcome.rendered, outcome.removed_spans, outcome.similarity
    else:
        rendered, spans, augmented = node.content, [], raw

    calls = resolve_calls(graph, rendered, query, spec, max_calls=max_calls)
    return RetrievalResult(
        node_id=node_id,
        raw_similarity=raw,
        rendered_context=rendered,
        pruned=bool(spans),
        pruned_branch_spans=spans,
        resolved_calls=calls,
        augmented_similarity=augmented,
    )


# --- internals ---------------------------------------------------------------


def _render_without(base_lines: list[str], offset: int, spans: list[tuple[int, int]]) -> str:
    drop: set[int] = set()
    for start, end in spans:
        drop.update(range(start - offset, end - offset + 1))
    return "\n".join(line for index, line in enumerate(base_lines) if index not in drop)


def _line_count(text: str) -> int:
    return len(text.split("\n")) if text else 0


def _impl_of(graph: PkgGraph, name_node: PkgNode) -> PkgNode | None:
    edges = graph.out_edges(name_node.id, EdgeKind.NAME_TO_IMPL)
    return graph.node(edges[0].dst) if edges else None


_CALL_RE = re.compile(r"\b([A-Za-z_]\w*)\s*\(")
_DEF_RE = re.compile(r"^\s*def\s+(\w+)", re.MULTILINE)


def _called_and_defined(text: str) -> tuple[list[str], set[str]]:
    """Called names in first-appearance order, and names bound in the text."""
    try:
        tree = ast.parse(text)
    except SyntaxError:
        # Pruned renderings may be syntactically incomplete; fall back to regex.
        called = list(dict.fromkeys(_CALL_RE.findall(text)))
        return called, set(_DEF_RE.findall(text))

    calls: list[tuple[int, int, str]] = []
    defined: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            calls.append((node.lineno, node.col_offset, node.func.id))
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            defined.add(node.name)
            defined.update(a.arg for a in _all_args(node.args))
        elif isinstance(node, ast.ClassDef):
            defined.add(node.name)
        elif isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            defined.add(node.id)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            for alias in node.names:
                defined.add((alias.asname or alias.name).split(".")[0])
        elif isinstance(node, ast.Lambda):
            defined.update(a.arg for a in _all_args(node.args))
    calls.sort(key=lambda item: (item[0], item[1]))
    return list(dict.fromkeys(name for _ln, _col, name in calls)), defined


def _all_args(args: ast.arguments) -> list[ast.arg]:
    collected = list(args.posonlyargs) + list(args.args) + list(args.kwonlyargs)
    if args.vararg:
        collected.append(args.vararg)
    if args.kwarg:
        collected.append(args.kwarg)
    return collected


# Static allowlist of Python builtin names; calls to these are never resolved
# against the corpus.
PYTHON_BUILTINS = frozenset({
    "ArithmeticError", "AssertionError", "AttributeError", "BaseException",
    "BlockingIOError", "BrokenPipeError", "BufferError", "BytesWarning",
    "ChildProcessError", "ConnectionAbortedError", "ConnectionError",
    "ConnectionRefusedError", "ConnectionResetError", "DeprecationWarning",
    "EOFError", "Ellipsis", "EncodingWarning", "EnvironmentError", "Exception",
    "False", "FileExistsError", "FileNotFoundError", "FloatingPointError",
    "FutureWarning", "GeneratorExit", "IOError", "ImportError", "ImportWarning",
    "IndentationError", "IndexError", "InterruptedError", "IsADirectoryError",
    "KeyError", "KeyboardInterrupt", "LookupError", "MemoryError",
    "ModuleNotFoundError", "NameError", "None", "NotADirectoryError",
    "NotImplemented", "NotImplementedError", "OSError", "OverflowError",
    "PendingDeprecationWarning", "PermissionError", "ProcessLookupError",
    "RecursionError", "ReferenceError", "ResourceWarning", "RuntimeError",
    "RuntimeWarning", "StopAsyncIteration", "StopIteration", "SyntaxError",
    "SyntaxWarning", "SystemError", "SystemExit", "TabError", "TimeoutError",
    "True", "TypeError", "UnboundLocalError", "UnicodeDecodeError",
    "UnicodeEncodeError", "UnicodeError", "UnicodeTranslateError",
    "UnicodeWarning", "UserWarning", "ValueError", "Warning", "ZeroDivisionError",
    "abs", "aiter", "all", "anext", "any", "ascii", "bin", "bool", "breakpoint",
    "bytearray", "bytes", "callable", "chr", "classmethod", "compile", "complex",
    "copyright", "credits", "delattr", "dict", "dir", "divmod", "enumerate",
    "eval", "exec", "exit", "filter", "float", "format", "frozenset", "getattr",
    "globals", "hasattr", "hash", "help", "hex", "id", "input", "int",
    "isinstance", "issubclass", "iter", "len", "license", "list", "locals",
    "map", "max", "memoryview", "min", "next", "object", "oct", "open", "ord",
    "pow", "print", "property", "quit", "range", "repr", "reversed", "round",
    "set", "setattr", "slice", "sorted", "staticmethod", "str", "sum", "super",
    "tuple", "type", "vars", "zip",
})
