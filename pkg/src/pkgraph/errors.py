"""Exception types shared across the package."""

from __future__ import annotations


class PkgError(Exception):
    """Base class for all pkgraph errors."""


class ConfigError(PkgError):
    """Invalid configuration value; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


# --- graph build / persistence ------------------------------------------------

class BuildPhaseClosed(PkgError):
    """Mutation attempted on a sealed graph."""


class InvalidEndpoint(PkgError):
    """Edge references a node id that does not exist."""


class KindMismatch(PkgError):
    """Edge endpoints violate the node-kind constraints of the edge kind."""


class DuplicateEdge(PkgError):
    """The (src, dst, kind) triple was already added."""


class CycleDetected(PkgError):
    """Structural subgraph contains a cycle; reports one offending node."""

    def __init__(self, node_id: int):
        super().__init__(f"cycle detected through node {node_id}")
        self.node_id = node_id


class FormatVersionMismatch(PkgError):
    """On-disk graph was written with an unsupported format version."""


class CorruptRecord(PkgError):
    """A persisted record failed to parse or validate; reports the line."""

    def __init__(self, filename: str, line: int, message: str):
        super().__init__(f"{filename}:{line}: {message}")
        self.filename = filename
        self.line = line


class DimensionMismatch(PkgError):
    """Embedding length disagrees with the declared dimension."""


# --- analyzers -----------------------------------------------------------------

class ParseFailure(PkgError):
    """Input text could not be parsed; position reported when known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (offset {offset})")
        self.offset = offset


class NotAnObject(PkgError):
    """JSON document whose top level is not an object."""


class UnknownDocument(PkgError):
    """No nodes exist for the requested document id."""


# --- embedding providers --------------------------------------------------------

class ProviderError(PkgError):
    """Embedding provider call failed."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class LengthMismatch(PkgError):
    """Similarity of two vectors with different lengths."""


# --- retrieval -------------------------------------------------------------------

class EmptyIndex(PkgError):
    """No nodes of the requested kind exist in the graph."""


class MissingEmbedding(PkgError):
    """A candidate node has no stored embedding; names the node."""

    def __init__(self, node_id: int):
        super().__init__(f"node {node_id} has no embedding")
        self.node_id = node_id


class WrongKind(PkgError):
    """Operation applied to a node kind it does not support."""


class UnknownTemplate(PkgError):
    """Prompt template id is not registered."""


# --- re-ranking / evaluation ------------------------------------------------------

class NoCandidates(PkgError):
    """Selection invoked with an empty candidate set."""


class RunnerUnavailable(PkgError):
    """The sandbox runner itself could not be invoked or misbehaved."""


class GeneratorError(PkgError):
    """Generation provider call failed."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class MockMiss(PkgError):
    """Strict mock generator has no completion for the prompt."""
