"""Path-value graph extraction from structured JSON documents.

Every key at every depth becomes one node whose path is the "-"-joined key
chain from the root ("-" inside keys is escaped as "\\-"; list elements use
their decimal index as the path segment). Primitive values are stored on the
node; objects and arrays store the null marker and their members hang below
via child/list edges. A synthetic root node anchors each document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import NotAnObject, ParseFailure, UnknownDocument
from .graph import EdgeKind, NodeKind, PkgGraph, Primitive


@dataclass
class PathValuePair:
    path: str
    value: Primitive
    depth: int


def json_to_graph(document: str, doc_id: str, graph: PkgGraph) -> int:
    """Add one document's path-value tree; returns the synthetic root node id."""
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"malformed JSON in {doc_id}: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(obj, dict):
        raise NotAnObject(f"{doc_id}: top-level JSON value must be an object")

    root_id = graph.add_node(
        NodeKind.PATH_VALUE, content=doc_id or "document", doc_id=doc_id, path="", value=None
    )
    _walk_container(obj, "", root_id, doc_id, graph)
    return root_id


def reconstruct_leaves(graph: PkgGraph, doc_id: str) -> dict[str, Primitive]:
    """Recover the primitive leaves of a previously ingested document."""
    if not graph.sealed:
        raise ValueError("reconstruct_leaves requires a sealed graph")
    nodes = [
        n for n in graph.nodes_of_kind(NodeKind.PATH_VALUE) if n.doc_id == doc_id
    ]
    if not nodes:
        raise UnknownDocument(f"no path-value nodes for document {doc_id!r}")
    return {n.path: n.value for n in nodes if n.value is not None}


def enumerate_pairs(obj: dict) -> list[PathValuePair]:
    """Flatten a parsed JSON object into the path-value pairs the graph stores."""
    pairs: list[PathValuePair] = []

    def walk(container, path: str, depth: int) -> None:
        items = container.items() if isinstance(container, dict) else enumerate(container)
        for key, value in items:
            segment = _escape_segment(key) if isinstance(key, str) else str(key)
            child_path = f"{path}-{segment}" if path else segment
            if isinstance(value, (dict, list)):
                pairs.append(PathValuePair(child_path, None, depth + 1))
                walk(value, child_path, depth + 1)
            else:
                pairs.append(PathValuePair(child_path, _stored_value(value), depth + 1))

    walk(obj, "", 0)
    return pairs


# --- internals ---------------------------------------------------------------


def _walk_container(container, path: str, parent_id: int, doc_id: str, graph: PkgGraph) -> None:
    if isinstance(container, dict):
        members = [(_escape_segment(k), v, EdgeKind.JSON_CHILD) for k, v in container.items()]
    else:
        members = [(str(i), v, EdgeKind.JSON_LIST_ITEM) for i, v in enumerate(container)]
    for segment, value, edge_kind in members:
        child_path = f"{path}-{segment}" if path else segment
        if isinstance(value, (dict, list)):
            node_id = graph.add_node(
                NodeKind.PATH_VALUE, content=child_path, doc_id=doc_id,
                path=child_path, value=None,
            )
            graph.add_edge(parent_id, node_id, edge_kind)
            _walk_container(value, child_path, node_id, doc_id, graph)
        else:
            stored = _stored_value(value)
            node_id = graph.add_node(
                NodeKind.PATH_VALUE,
                content=f"{child_path}: {_value_text(value)}",
                doc_id=doc_id,
                path=child_path,
                value=stored,
            )
            graph.add_edge(parent_id, node_id, edge_kind)


def _escape_segment(key: str) -> str:
    return key.replace("-", "\\-")


def _stored_value(value) -> Primitive:
    # A source-level null is kept as the text "null" so it stays distinguishable
    # from the container marker (stored None).
    return "null" if value is None else value


def _value_text(value) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value)
