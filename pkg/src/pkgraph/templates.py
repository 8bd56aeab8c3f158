"""Prompt templates for instruction-tuned code models and query augmentation.

Each named template carries a with-context and a no-context variant; the
placeholders are ``{{query}}``, ``{{context}}`` and ``{{helpers}}``. Resolved
helper functions are appended to the context slot as numbered "helper code"
sections. Substitution is plain string replacement, so rendering is
byte-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .errors import UnknownTemplate

if TYPE_CHECKING:
    from .retrieval import RetrievalResult


@dataclass(frozen=True)
class PromptTemplate:
    with_context: str
    no_context: str


_CODELLAMA_WITH = (
    "[INST] You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "The following code might be helpful:\n"
    "{{context}}{{helpers}}\n"
    "If helper section is useful, integrate their logic directly into the body of "
    "the main function, otherwise just ignore them. You MUST write your solution "
    "between [PYTHON] and [/PYTHON]. Your solution MUST be executable. [/INST] "
)

_CODELLAMA_BARE = (
    "[INST] You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "Please write the python solution inside [PYTHON] and [/PYTHON] tags.\n"
    "[/INST] "
)

_STARCODER_WITH = (
    "### Instruction\n"
    "You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "The following code might be helpful:\n"
    "{{context}}{{helpers}}\n"
    "If they are useful, integrate their logic directly into the body of the main "
    "function, otherwise just ignore them.\n"
    "### Response\n"
)

_STARCODER_BARE = (
    "### Instruction\n"
    "You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "### Response\n"
)

_DEEPSEEK_WITH = (
    "[INST] You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "The following code might be helpful:\n"
    "{{context}}{{helpers}}\n"
    "If they are useful, integrate their logic directly into the body of the main "
    "function, otherwise just ignore them.\n"
    "[/INST]"
)

_DEEPSEEK_BARE = (
    "[INST] You are a python programmer. Solve the following problem:\n"
    "{{query}}\n\n"
    "[/INST]"
)

DEFAULT_TEMPLATES: dict[str, PromptTemplate] = {
    "codellama": PromptTemplate(_CODELLAMA_WITH, _CODELLAMA_BARE),
    "starcoder": PromptTemplate(_STARCODER_WITH, _STARCODER_BARE),
    "deepseek": PromptTemplate(_DEEPSEEK_WITH, _DEEPSEEK_BARE),
    # Bare no-RAG prompt used for the "none" approach.
    "none": PromptTemplate(_CODELLAMA_BARE, _CODELLAMA_BARE),
}


def render_helpers(resolved_calls: Sequence[tuple[str, str]]) -> str:
    parts = []
    for index, (_name, body) in enumerate(resolved_calls, start=1):
        parts.append(f"\nhelper code {index}:\n{body}")
    return "".join(parts)


def augment(
    query: str,
    result: "RetrievalResult | None",
    template_id: str,
    registry: dict[str, PromptTemplate] | None = None,
) -> str:
    """Substitute the query and retrieved context into the named template."""
    templates = registry if registry is not None else DEFAULT_TEMPLATES
    template = templates.get(template_id)
    if template is None:
        raise UnknownTemplate(f"no template named {template_id!r}")
    context = result.rendered_context if result is not None else ""
    helpers = render_helpers(result.resolved_calls) if result is not None else ""
    body = template.with_context if context else template.no_context
    return (
        body.replace("{{query}}", query)
        .replace("{{context}}", context)
        .replace("{{helpers}}", helpers)
    )


def load_templates(path: str | Path) -> dict[str, PromptTemplate]:
    """Load user templates from a JSON file of named template strings.

    A value may be a single string (used for both variants) or an object with
    "with_context" and "no_context" keys. Built-in names may be overridden.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    registry = dict(DEFAULT_TEMPLATES)
    for name, value in raw.items():
        if isinstance(value, str):
            registry[name] = PromptTemplate(value, value)
        else:
            registry[name] = PromptTemplate(value["with_context"], value["no_context"])
    return registry
