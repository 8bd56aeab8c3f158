"""Programming knowledge graph engine.

Builds a graph of function names, implementations, code blocks, and JSON
path-value pairs; retrieves query-relevant nodes by embedding similarity with
branch pruning; augments generation prompts; and re-ranks candidate solutions
by syntax validity, runtime execution, and semantic similarity.
"""

from .code_analyzer import (
    BlockRecord,
    FunctionRecord,
    ParseDiagnostic,
    analyze_source,
    emit_graph,
    extract_blocks,
    extract_functions,
    strip_code_fences,
)
from .embedding import EmbedderSpec, embed_graph, embed_text, fnv1a64, similarity
from .evalharness import (
    Approach,
    EvalReport,
    GeneratorSpec,
    Task,
    context_token_count,
    extract_code,
    generate,
    judge,
    load_mock_table,
    load_tasks,
    prompt_key,
    run_suite,
)
from .graph import (
    EdgeKind,
    GraphManifest,
    GraphStats,
    NodeKind,
    PkgEdge,
    PkgGraph,
    PkgNode,
    thaw,
)
from .json_analyzer import PathValuePair, enumerate_pairs, json_to_graph, reconstruct_leaves
from .rerank import (
    Candidate,
    RerankReport,
    RunnerSpec,
    RunVerdict,
    rerank,
    run_program,
    runtime_filter,
    select,
    syntax_filter,
)
from .retrieval import (
    PruneConfig,
    PruneResult,
    RetrievalMode,
    RetrievalResult,
    augment,
    prune,
    resolve_calls,
    retrieve,
    search,
)
from .templates import DEFAULT_TEMPLATES, PromptTemplate, load_templates

__version__ = "0.1.0"
