"""In-memory programming knowledge graph and its on-disk JSONL format.

A graph starts in build phase (single writer), is sealed once, and is then
immutable and safe for concurrent readers. Node ids are dense integers
assigned in insertion order.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BuildPhaseClosed,
    CorruptRecord,
    CycleDetected,
    DimensionMismatch,
    DuplicateEdge,
    FormatVersionMismatch,
    InvalidEndpoint,
    KindMismatch,
)

FORMAT_VERSION = "1"

MANIFEST_FILE = "manifest.json"
NODES_FILE = "nodes.jsonl"
EDGES_FILE = "edges.jsonl"


class NodeKind(str, Enum):
    FUNCTION_NAME = "function_name"
    FUNCTION_IMPL = "function_impl"
    CODE_BLOCK = "code_block"
    PATH_VALUE = "path_value"


class EdgeKind(str, Enum):
    NAME_TO_IMPL = "name_to_impl"
    IMPL_TO_BLOCK = "impl_to_block"
    BLOCK_TO_BLOCK = "block_to_block"
    JSON_CHILD = "json_child"
    JSON_LIST_ITEM = "json_list_item"


# Allowed (src kind, dst kind) per edge kind.
EDGE_ENDPOINTS: dict[EdgeKind, tuple[NodeKind, NodeKind]] = {
    EdgeKind.NAME_TO_IMPL: (NodeKind.FUNCTION_NAME, NodeKind.FUNCTION_IMPL),
    EdgeKind.IMPL_TO_BLOCK: (NodeKind.FUNCTION_IMPL, NodeKind.CODE_BLOCK),
    EdgeKind.BLOCK_TO_BLOCK: (NodeKind.CODE_BLOCK, NodeKind.CODE_BLOCK),
    EdgeKind.JSON_CHILD: (NodeKind.PATH_VALUE, NodeKind.PATH_VALUE),
    EdgeKind.JSON_LIST_ITEM: (NodeKind.PATH_VALUE, NodeKind.PATH_VALUE),
}

# Edge kinds whose subgraphs must be acyclic (validated at seal time).
_STRUCTURAL_KINDS = frozenset(
    {EdgeKind.IMPL_TO_BLOCK, EdgeKind.BLOCK_TO_BLOCK, EdgeKind.JSON_CHILD, EdgeKind.JSON_LIST_ITEM}
)

Primitive = str | int | float | bool | None


@dataclass(eq=False)
class PkgNode:
    id: int
    kind: NodeKind
    content: str
    doc_id: str
    path: str | None = None
    value: Primitive = None
    function_id: int | None = None
    span: tuple[int, int] | None = None
    embedding: np.ndarray | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PkgNode):
            return NotImplemented
        if (self.id, self.kind, self.content, self.doc_id, self.path, self.value,
                self.function_id, self.span) != (other.id, other.kind, other.content,
                other.doc_id, other.path, other.value, other.function_id, other.span):
            return False
        if self.embedding is None or other.embedding is None:
            return self.embedding is None and other.embedding is None
        return np.array_equal(self.embedding, other.embedding)


@dataclass(frozen=True)
class PkgEdge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass
class GraphManifest:
    format_version: str
    embedder_id: str
    embedding_dim: int
    node_count: int
    edge_count: int
    created_at: str


@dataclass
class GraphStats:
    node_counts: dict[NodeKind, int]
    edge_counts: dict[EdgeKind, int]

    @property
    def total_nodes(self) -> int:
        return sum(self.node_counts.values())

    @property
    def total_edges(self) -> int:
        return sum(self.edge_counts.values())

    def to_dict(self) -> dict:
        return {
            "nodes": {k.value: v for k, v in self.node_counts.items()},
            "edges": {k.value: v for k, v in self.edge_counts.items()},
            "total_nodes": self.total_nodes,
            "total_edges": self.total_edges,
        }


class PkgGraph:
    """Adjacency-backed graph with a build phase and an immutable sealed phase."""

    def __init__(self, embedder_id: str = "det-v1", embedding_dim: int = 256):
        if embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")
        self.embedder_id = embedder_id
        self.embedding_dim = embedding_dim
        self.created_at: str = _now_iso()
        self._nodes: list[PkgNode] = []
        self._edges: list[PkgEdge] = []
        self._edge_set: set[tuple[int, int, EdgeKind]] = set()
        self._out: dict[int, list[PkgEdge]] = {}
        self._in: dict[int, list[PkgEdge]] = {}
        self._sealed = False

    # --- introspection ---------------------------------------------------

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> list[PkgNode]:
        return self._nodes

    @property
    def edges(self) -> list[PkgEdge]:
        return self._edges

    def node(self, node_id: int) -> PkgNode:
        if not 0 <= node_id < len(self._nodes):
            raise InvalidEndpoint(f"no node with id {node_id}")
        return self._nodes[node_id]

    def out_edges(self, node_id: int, kind: EdgeKind | None = None) -> list[PkgEdge]:
        edges = self._out.get(node_id, [])
        return edges if kind is None else [e for e in edges if e.kind is kind]

    def in_edges(self, node_id: int, kind: EdgeKind | None = None) -> list[PkgEdge]:
        edges = self._in.get(node_id, [])
        return edges if kind is None else [e for e in edges if e.kind is kind]

    def nodes_of_kind(self, kind: NodeKind) -> Iterator[PkgNode]:
        return (n for n in self._nodes if n.kind is kind)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PkgGraph):
            return NotImplemented
        return (
            self.embedder_id == other.embedder_id
            and self.embedding_dim == other.embedding_dim
            and self._nodes == other._nodes
            and self._edges == other._edges
        )

    # --- build phase -----------------------------------------------------

    def add_node(
        self,
        kind: NodeKind,
        content: str,
        doc_id: str,
        path: str | None = None,
        value: Primitive = None,
        function_id: int | None = None,
        span: tuple[int, int] | None = None,
        embedding: np.ndarray | None = None,
    ) -> int:
        self._require_build("add_node")
        if not content:
            raise ValueError("node content must be non-empty")
        if (kind is NodeKind.PATH_VALUE) != (path is not None):
            raise ValueError("path is present exactly for path_value nodes")
        if kind in (NodeKind.FUNCTION_IMPL, NodeKind.CODE_BLOCK):
            if function_id is None:
                raise ValueError(f"{kind.value} node requires function_id")
            if not (0 <= function_id < len(self._nodes)) or (
                self._nodes[function_id].kind is not NodeKind.FUNCTION_NAME
            ):
                raise ValueError(f"function_id {function_id} is not a function_name node")
        if embedding is not None:
            embedding = self._check_embedding(embedding)
        node_id = len(self._nodes)
        self._nodes.append(
            PkgNode(
                id=node_id, kind=kind, content=content, doc_id=doc_id, path=path,
                value=value, function_id=function_id,
                span=tuple(span) if span is not None else None, embedding=embedding,
            )
        )
        return node_id

    def add_edge(self, src: int, dst: int, kind: EdgeKind) -> None:
        self._require_build("add_edge")
        if not 0 <= src < len(self._nodes):
            raise InvalidEndpoint(f"edge source {src} does not exist")
        if not 0 <= dst < len(self._nodes):
            raise InvalidEndpoint(f"edge target {dst} does not exist")
        want_src, want_dst = EDGE_ENDPOINTS[kind]
        got_src, got_dst = self._nodes[src].kind, self._nodes[dst].kind
        if got_src is not want_src or got_dst is not want_dst:
            raise KindMismatch(
                f"{kind.value} requires {want_src.value}->{want_dst.value}, "
                f"got {got_src.value}->{got_dst.value}"
            )
        triple = (src, dst, kind)
        if triple in self._edge_set:
            raise DuplicateEdge(f"edge ({src}, {dst}, {kind.value}) already present")
        edge = PkgEdge(src, dst, kind)
        self._edges.append(edge)
        self._edge_set.add(triple)
        self._out.setdefault(src, []).append(edge)
        self._in.setdefault(dst, []).append(edge)

    def set_embedding(self, node_id: int, embedding: np.ndarray) -> None:
        self._require_build("set_embedding")
        self.node(node_id).embedding = self._check_embedding(embedding)

    def seal(self) -> None:
        self._require_build("seal")
        self._check_acyclic()
        self._sealed = True

    # --- sealed phase ------------------------------------------------------

    def stats(self) -> GraphStats:
        self._require_sealed("stats")
        node_counts = {kind: 0 for kind in NodeKind}
        edge_counts = {kind: 0 for kind in EdgeKind}
        for node in self._nodes:
            node_counts[node.kind] += 1
        for edge in self._edges:
            edge_counts[edge.kind] += 1
        return GraphStats(node_counts, edge_counts)

    def manifest(self) -> GraphManifest:
        return GraphManifest(
            format_version=FORMAT_VERSION,
            embedder_id=self.embedder_id,
            embedding_dim=self.embedding_dim,
            node_count=len(self._nodes),
            edge_count=len(self._edges),
            created_at=self.created_at,
        )

    def save(self, directory: str | Path) -> None:
        self._require_sealed("save")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = self.manifest()
        (directory / MANIFEST_FILE).write_text(
            json.dumps(manifest.__dict__, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        with open(directory / NODES_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for node in self._nodes:
                fh.write(_dump_node(node) + "\n")
        with open(directory / EDGES_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for edge in self._edges:
                record = {"src": edge.src, "dst": edge.dst, "kind": edge.kind.value}
                fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "PkgGraph":
        directory = Path(directory)
        manifest_path = directory / MANIFEST_FILE
        try:
            raw = json.loads(manifest_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise FileNotFoundError(f"not a graph directory: {directory}") from None
        except json.JSONDecodeError as exc:
            raise CorruptRecord(MANIFEST_FILE, 1, str(exc)) from exc
        version = raw.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatVersionMismatch(
                f"graph format {version!r} is not supported (expected {FORMAT_VERSION!r})"
            )
        graph = cls(embedder_id=raw["embedder_id"], embedding_dim=int(raw["embedding_dim"]))
        graph.created_at = raw.get("created_at", graph.created_at)

        for line_no, record in _read_jsonl(directory / NODES_FILE):
            graph._load_node_record(record, line_no)
        for line_no, record in _read_jsonl(directory / EDGES_FILE):
            graph._load_edge_record(record, line_no)

        if len(graph._nodes) != int(raw["node_count"]):
            raise CorruptRecord(
                NODES_FILE, len(graph._nodes),
                f"manifest declares {raw['node_count']} nodes, file has {len(graph._nodes)}",
            )
        if len(graph._edges) != int(raw["edge_count"]):
            raise CorruptRecord(
                EDGES_FILE, len(graph._edges),
                f"manifest declares {raw['edge_count']} edges, file has {len(graph._edges)}",
            )
        graph.seal()
        return graph

    # --- internals -----------------------------------------------------------

    def _require_build(self, op: str) -> None:
        if self._sealed:
            raise BuildPhaseClosed(f"{op} requires build phase; graph is sealed")

    def _require_sealed(self, op: str) -> None:
        if not self._sealed:
            raise ValueError(f"{op} requires a sealed graph")

    def _check_embedding(self, embedding: np.ndarray) -> np.ndarray:
        vector = np.asarray(embedding, dtype=np.float64)
        if vector.shape != (self.embedding_dim,):
            raise DimensionMismatch(
                f"embedding length {vector.shape} does not match dimension {self.embedding_dim}"
            )
        return vector

    def _check_acyclic(self) -> None:
        # Kahn's algorithm over the structural edge kinds only.
        indegree = [0] * len(self._nodes)
        structural = [e for e in self._edges if e.kind in _STRUCTURAL_KINDS]
        for edge in structural:
            indegree[edge.dst] += 1
        queue = [i for i, deg in enumerate(indegree) if deg == 0]
        visited = 0
        while queue:
            current = queue.pop()
            visited += 1
            for edge in self.out_edges(current):
                if edge.kind in _STRUCTURAL_KINDS:
                    indegree[edge.dst] -= 1
                    if indegree[edge.dst] == 0:
                        queue.append(edge.dst)
        if visited != len(self._nodes):
            offender = next(i for i, deg in enumerate(indegree) if deg > 0)
            raise CycleDetected(offender)

    def _load_node_record(self, record: dict, line_no: int) -> None:
        try:
            node_id = record["id"]
            kind = NodeKind(record["kind"])
            span = record.get("span")
            embedding = record.get("embedding")
            if embedding is not None:
                embedding = np.asarray(embedding, dtype=np.float64)
                if embedding.shape != (self.embedding_dim,):
                    raise DimensionMismatch(
                        f"{NODES_FILE}:{line_no}: embedding length {embedding.shape[0]} "
                        f"!= manifest dimension {self.embedding_dim}"
                    )
            if node_id != len(self._nodes):
                raise CorruptRecord(NODES_FILE, line_no, f"node id {node_id} out of order")
            self.add_node(
                kind=kind,
                content=record["content"],
                doc_id=record["doc_id"],
                path=record.get("path"),
                value=record.get("value"),
                function_id=record.get("function_id"),
                span=tuple(span) if span is not None else None,
                embedding=embedding,
            )
        except (DimensionMismatch, CorruptRecord):
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptRecord(NODES_FILE, line_no, str(exc)) from exc

    def _load_edge_record(self, record: dict, line_no: int) -> None:
        try:
            self.add_edge(int(record["src"]), int(record["dst"]), EdgeKind(record["kind"]))
        except (KeyError, ValueError, TypeError, InvalidEndpoint, KindMismatch, DuplicateEdge) as exc:
            raise CorruptRecord(EDGES_FILE, line_no, str(exc)) from exc


def thaw(graph: PkgGraph) -> PkgGraph:
    """Copy a sealed graph back into a build-phase graph (used for resumable embedding)."""
    builder = PkgGraph(embedder_id=graph.embedder_id, embedding_dim=graph.embedding_dim)
    builder.created_at = graph.created_at
    for node in graph.nodes:
        builder.add_node(
            kind=node.kind, content=node.content, doc_id=node.doc_id, path=node.path,
            value=node.value, function_id=node.function_id, span=node.span,
            embedding=None if node.embedding is None else node.embedding.copy(),
        )
    for edge in graph.edges:
        builder.add_edge(edge.src, edge.dst, edge.kind)
    return builder


def _now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat()


def _dump_node(node: PkgNode) -> str:
    record = {
        "id": node.id,
        "kind": node.kind.value,
        "content": node.content,
        "path": node.path,
        "value": node.value,
        "doc_id": node.doc_id,
        "function_id": node.function_id,
        "span": list(node.span) if node.span is not None else None,
        "embedding": node.embedding.tolist() if node.embedding is not None else None,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptRecord(path.name, line_no, str(exc)) from exc
