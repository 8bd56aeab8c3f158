"""Function and code-block extraction from Python source text.

Each extracted function becomes three node families in the graph: a name node,
an implementation node holding the full source, and one code-block node per
if/for/while/with/try statement at any nesting depth. Block nesting is carried
as parent links so the emitted edges reflect syntactic containment.
"""

from __future__ import annotations

import ast
import re
import textwrap
from dataclasses import dataclass

from .errors import ParseFailure
from .graph import EdgeKind, NodeKind, PkgGraph

# Closed construct set. async for/with are normalized to their base keyword.
BLOCK_CONSTRUCTS = ("if", "for", "while", "with", "try")

_CONSTRUCT_BY_TYPE = {
    ast.If: "if",
    ast.For: "for",
    ast.AsyncFor: "for",
    ast.While: "while",
    ast.With: "with",
    ast.AsyncWith: "with",
    ast.Try: "try",
}

_TOP_LEVEL_DEF_RE = re.compile(r"^(?:async[ \t]+)?def[ \t]+[A-Za-z_]\w*")
_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


@dataclass
class BlockRecord:
    construct: str
    source: str
    span: tuple[int, int]
    parent: int | None = None


@dataclass
class FunctionRecord:
    name: str
    source: str
    blocks: list[BlockRecord]
    doc_id: str
    span: tuple[int, int]


@dataclass
class ParseDiagnostic:
    doc_id: str
    message: str
    line: int | None = None


def strip_code_fences(text: str) -> str:
    """Return the fenced code regions of a markdown-ish text, or the text itself."""
    fenced = _FENCE_RE.findall(text)
    if fenced:
        return "\n".join(region.rstrip("\n") for region in fenced)
    return text


def extract_functions(
    source: str, doc_id: str
) -> tuple[list[FunctionRecord], list[ParseDiagnostic]]:
    """Extract top-level and class-level function definitions.

    Nested defs stay inside their parent's source. When the document does not
    parse as a whole, top-level def regions are recovered individually and the
    broken ones become diagnostics instead of aborting the document.
    """
    lines = source.split("\n")
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return _recover_functions(lines, doc_id, exc)

    records = []
    for stmt in _collect_defs(tree.body):
        records.append(_record_from_def(stmt, lines, doc_id))
    return records, []


def extract_blocks(fn: FunctionRecord) -> list[BlockRecord]:
    """Decompose one function into construct blocks with containment links."""
    dedented = textwrap.dedent(fn.source)
    try:
        tree = ast.parse(dedented)
    except SyntaxError as exc:
        raise ParseFailure(f"function {fn.name!r} no longer parses: {exc.msg}", exc.offset)
    defs = [s for s in tree.body if isinstance(s, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if len(defs) != 1:
        raise ParseFailure(f"expected exactly one function definition in {fn.name!r}")

    fn_lines = fn.source.split("\n")
    doc_start = fn.span[0]
    blocks: list[BlockRecord] = []

    def visit(statements: list[ast.stmt], parent: int | None) -> None:
        for stmt in statements:
            construct = _CONSTRUCT_BY_TYPE.get(type(stmt))
            if construct is None:
                for child_body in _nested_bodies(stmt):
                    visit(child_body, parent)
                continue
            index = len(blocks)
            blocks.append(
                BlockRecord(
                    construct=construct,
                    source="\n".join(fn_lines[stmt.lineno - 1 : stmt.end_lineno]),
                    span=(doc_start + stmt.lineno - 1, doc_start + stmt.end_lineno - 1),
                    parent=parent,
                )
            )
            if isinstance(stmt, ast.If):
                _visit_if_chain(stmt, index, visit)
            elif isinstance(stmt, ast.Try):
                visit(stmt.body, index)
                for handler in stmt.handlers:
                    visit(handler.body, index)
                visit(stmt.orelse, index)
                visit(stmt.finalbody, index)
            elif isinstance(stmt, (ast.For, ast.AsyncFor, ast.While)):
                visit(stmt.body, index)
                visit(stmt.orelse, index)
            else:  # with / async with
                visit(stmt.body, index)

    visit(defs[0].body, None)
    return blocks


def emit_graph(fns: list[FunctionRecord], graph: PkgGraph) -> None:
    """Add one name node, one impl node, and the block tree per function."""
    for fn in fns:
        name_id = graph.add_node(NodeKind.FUNCTION_NAME, content=fn.name, doc_id=fn.doc_id)
        impl_id = graph.add_node(
            NodeKind.FUNCTION_IMPL, content=fn.source, doc_id=fn.doc_id,
            function_id=name_id, span=fn.span,
        )
        graph.add_edge(name_id, impl_id, EdgeKind.NAME_TO_IMPL)
        block_ids = []
        for block in fn.blocks:
            block_ids.append(
                graph.add_node(
                    NodeKind.CODE_BLOCK, content=block.source, doc_id=fn.doc_id,
                    function_id=name_id, span=block.span,
                )
            )
        for block, block_id in zip(fn.blocks, block_ids):
            if block.parent is None:
                graph.add_edge(impl_id, block_id, EdgeKind.IMPL_TO_BLOCK)
            else:
                graph.add_edge(block_ids[block.parent], block_id, EdgeKind.BLOCK_TO_BLOCK)


def analyze_source(
    source: str, doc_id: str
) -> tuple[list[FunctionRecord], list[ParseDiagnostic]]:
    """extract_functions plus extract_blocks for every record."""
    records, diagnostics = extract_functions(source, doc_id)
    for record in records:
        record.blocks = extract_blocks(record)
    return records, diagnostics


# --- internals ---------------------------------------------------------------


def _visit_if_chain(stmt: ast.If, index: int, visit) -> None:
    # An if/elif/else chain is a single statement, hence a single block; the
    # elif continuation is an If node in orelse at the same column.
    visit(stmt.body, index)
    orelse = stmt.orelse
    while (
        len(orelse) == 1
        and isinstance(orelse[0], ast.If)
        and orelse[0].col_offset == stmt.col_offset
    ):
        chained = orelse[0]
        visit(chained.body, index)
        orelse = chained.orelse
    visit(orelse, index)


def _nested_bodies(stmt: ast.stmt) -> list[list[ast.stmt]]:
    # Non-construct compound statements that can still contain constructs.
    # Nested function/class definitions are intentionally not descended into.
    if isinstance(stmt, ast.Match):
        return [case.body for case in stmt.cases]
    return []


def _collect_defs(body: list[ast.stmt]) -> list[ast.FunctionDef | ast.AsyncFunctionDef]:
    found: list[ast.FunctionDef | ast.AsyncFunctionDef] = []
    for stmt in body:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            found.append(stmt)
        elif isinstance(stmt, ast.ClassDef):
            found.extend(_collect_defs(stmt.body))
    return found


def _record_from_def(
    stmt: ast.FunctionDef | ast.AsyncFunctionDef, lines: list[str], doc_id: str
) -> FunctionRecord:
    start = stmt.lineno
    if stmt.decorator_list:
        # A decorator expression's lineno is the line carrying its "@".
        start = min(start, min(d.lineno for d in stmt.decorator_list))
    end = stmt.end_lineno
    return FunctionRecord(
        name=stmt.name,
        source="\n".join(lines[start - 1 : end]),
        blocks=[],
        doc_id=doc_id,
        span=(start, end),
    )


def _recover_functions(
    lines: list[str], doc_id: str, error: SyntaxError
) -> tuple[list[FunctionRecord], list[ParseDiagnostic]]:
    regions = _def_regions(lines)
    if not regions:
        return [], [ParseDiagnostic(doc_id, f"document does not parse: {error.msg}", error.lineno)]

    records: list[FunctionRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    for start, end in regions:
        text = "\n".join(lines[start - 1 : end])
        try:
            tree = ast.parse(text)
        except SyntaxError as exc:
            line = start + (exc.lineno or 1) - 1
            diagnostics.append(ParseDiagnostic(doc_id, f"skipped region: {exc.msg}", line))
            continue
        defs = _collect_defs(tree.body)
        if not defs:
            diagnostics.append(ParseDiagnostic(doc_id, "skipped region: no function found", start))
            continue
        for stmt in defs:
            record = _record_from_def(stmt, text.split("\n"), doc_id)
            record.span = (start + record.span[0] - 1, start + record.span[1] - 1)
            records.append(record)
    return records, diagnostics


def _def_regions(lines: list[str]) -> list[tuple[int, int]]:
    """1-based [start, end] line ranges of column-zero def statements."""
    starts = []
    for i, line in enumerate(lines):
        if _TOP_LEVEL_DEF_RE.match(line):
            start = i
            while start > 0 and lines[start - 1].startswith("@"):
                start -= 1
            starts.append((start, i))
    regions = []
    for idx, (start, def_line) in enumerate(starts):
        if idx + 1 < len(starts):
            boundary = starts[idx + 1][0]
        else:
            boundary = len(lines)
        end = def_line + 1
        for j in range(def_line + 1, boundary):
            text = lines[j]
            if text.strip() and not text[0].isspace():
                break
            if text.strip():
                end = j + 1
        regions.append((start + 1, end))
    return regions
