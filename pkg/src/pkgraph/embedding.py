"""Embedding providers and cosine similarity.

Two providers exist behind one spec:

- ``det-v1``: offline, deterministic. Lowercase the text, take maximal runs of
  ``[a-z0-9_]`` as tokens, hash each token with 64-bit FNV-1a into one of ``d``
  components, and L2-normalize the count vector (all-zero stays all-zero).
- ``http``: POST ``{"input": [texts], "model": model}`` to an endpoint that
  answers ``{"data": [{"embedding": [...]}, ...]}``, bearer token taken from
  the environment variable named by ``EmbedderSpec.api_key_env``.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, ProviderError
from .graph import NodeKind, PkgGraph

DETERMINISTIC_EMBEDDER = "det-v1"
HTTP_EMBEDDER = "http"

_TOKEN_RE = re.compile(r"[a-z0-9_]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@dataclass
class EmbedderSpec:
    id: str = DETERMINISTIC_EMBEDDER
    dimension: int = 256
    endpoint: str | None = None
    api_key_env: str | None = None
    batch_size: int = 64
    model: str = ""
    timeout_seconds: float = 30.0

    def __post_init__(self) -> None:
        if self.id not in (DETERMINISTIC_EMBEDDER, HTTP_EMBEDDER):
            raise ValueError(f"unknown embedder id {self.id!r}")
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.id == HTTP_EMBEDDER and not self.endpoint:
            raise ValueError("http embedder requires an endpoint")


def fnv1a64(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _MASK64
    return value


def embed_text(spec: EmbedderSpec, text: str) -> np.ndarray:
    if spec.id == DETERMINISTIC_EMBEDDER:
        return _deterministic_vector(text, spec.dimension)
    return _embed_batch(spec, [text])[0]


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def embed_graph(
    graph: PkgGraph,
    spec: EmbedderSpec,
    node_filter: Iterable[NodeKind] | Callable[[NodeKind], bool] | None = None,
) -> int:
    """Embed every unembedded node whose kind passes the filter.

    Embeddings are written per batch, so a provider failure keeps the batches
    already embedded and a rerun resumes from the remaining nodes.
    """
    accept = _as_predicate(node_filter)
    if graph.embedding_dim != spec.dimension and any(
        n.embedding is not None for n in graph.nodes
    ):
        raise DimensionMismatch(
            f"graph already holds {graph.embedding_dim}-dim embeddings; "
            f"cannot re-embed at {spec.dimension}"
        )
    graph.embedder_id = spec.id
    graph.embedding_dim = spec.dimension
    pending = [n.id for n in graph.nodes if accept(n.kind) and n.embedding is None]
    embedded = 0
    for start in range(0, len(pending), spec.batch_size):
        batch = pending[start : start + spec.batch_size]
        vectors = _embed_batch(spec, [graph.node(i).content for i in batch])
        for node_id, vector in zip(batch, vectors):
            graph.set_embedding(node_id, vector)
        embedded += len(batch)
    return embedded


def _as_predicate(
    node_filter: Iterable[NodeKind] | Callable[[NodeKind], bool] | None,
) -> Callable[[NodeKind], bool]:
    if node_filter is None:
        return lambda _kind: True
    if callable(node_filter):
        return node_filter
    kinds = frozenset(node_filter)
    return lambda kind: kind in kinds


def _deterministic_vector(text: str, dimension: int) -> np.ndarray:
    vector = np.zeros(dimension, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        vector[fnv1a64(token.encode("utf-8")) % dimension] += 1.0
    norm = float(np.linalg.norm(vector))
    if norm > 0.0:
        vector /= norm
    return vector


def _embed_batch(spec: EmbedderSpec, texts: Sequence[str]) -> list[np.ndarray]:
    if spec.id == DETERMINISTIC_EMBEDDER:
        return [_deterministic_vector(text, spec.dimension) for text in texts]
    return _embed_batch_http(spec, texts)


def _embed_batch_http(spec: EmbedderSpec, texts: Sequence[str]) -> list[np.ndarray]:
    headers = {"Content-Type": "application/json"}
    if spec.api_key_env:
        token = os.environ.get(spec.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    request = urllib.request.Request(
        spec.endpoint,
        method="POST",
        data=json.dumps({"input": list(texts), "model": spec.model}).encode("utf-8"),
        headers=headers,
    )
    try:
        with urllib.request.urlopen(request, timeout=spec.timeout_seconds) as response:
            payload = json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise ProviderError(f"embedding endpoint returned HTTP {exc.code}", status=exc.code) from exc
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise ProviderError(f"embedding request failed: {exc}") from exc

    rows = payload.get("data")
    if not isinstance(rows, list) or len(rows) != len(texts):
        raise ProviderError("embedding response missing 'data' rows")
    vectors = []
    for row in rows:
        vector = np.asarray(row.get("embedding"), dtype=np.float64)
        if vector.shape != (spec.dimension,):
            raise DimensionMismatch(
                f"provider returned length {vector.shape} vector, expected {spec.dimension}"
            )
        vectors.append(vector)
    return vectors
