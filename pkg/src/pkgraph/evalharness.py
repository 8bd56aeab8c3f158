"""End-to-end experiment harness: generate, judge, re-rank, report.

For every task and approach the harness retrieves context (unless the
approach is retrieval-free), renders the prompt, asks the generator for a
single greedy completion, extracts the code, and judges it by running the
solution concatenated with the task's test script in the sandbox. The
re-ranked column picks among the per-approach solutions; the ideal column is
the per-task OR of the approach verdicts and is a diagnostic only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EmbedderSpec
from .errors import GeneratorError, MockMiss
from .graph import PkgGraph
from .rerank import (
    Candidate,
    RunnerSpec,
    classify_error_kind,
    rerank,
    run_program,
    stage_error_rates,
)
from .retrieval import PruneConfig, RetrievalMode, RetrievalResult, retrieve
from .templates import augment, render_helpers

HISTOGRAM_CLASSES = (
    "AssertionError", "NameError", "TypeError", "SyntaxError", "IndentationError", "Other",
)

# Completion used by the non-strict mock generator for unknown prompts.
MOCK_FALLBACK_COMPLETION = "[PYTHON]\npass\n[/PYTHON]"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_PYTHON_TAG_RE = re.compile(r"\[PYTHON\](.*?)\[/PYTHON\]", re.DOTALL)
_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


@dataclass
class Task:
    task_id: str
    prompt: str
    test_script: str
    entry_point: str
    topic: str | None = None

    def __post_init__(self) -> None:
        if not self.test_script:
            raise ValueError(f"task {self.task_id!r} has an empty test_script")


@dataclass
class GeneratorSpec:
    endpoint: str = "mock"
    model: str = "mock"
    max_new_tokens: int = 512
    temperature: float = 0.0
    mock_table: dict[str, str] | None = None
    strict_mock: bool = False
    timeout_seconds: float = 120.0

    def __post_init__(self) -> None:
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass
class Approach:
    label: str
    mode: RetrievalMode | None
    prune: bool = True
    template: str = "codellama"


APPROACH_PRESETS: dict[str, Approach] = {
    "none": Approach("none", None, prune=False, template="none"),
    "block-pkg": Approach("block-pkg", RetrievalMode.BLOCK_WISE),
    "block-pkg-noprune": Approach("block-pkg-noprune", RetrievalMode.BLOCK_WISE, prune=False),
    "func-pkg": Approach("func-pkg", RetrievalMode.FUNCTION_WISE),
    "func-pkg-noprune": Approach("func-pkg-noprune", RetrievalMode.FUNCTION_WISE, prune=False),
    "json-pkg": Approach("json-pkg", RetrievalMode.PATH_VALUE),
}


@dataclass
class EvalReport:
    approaches: list[str]
    task_ids: list[str]
    pass_at_1: dict[str, float]
    pass_matrix: dict[str, dict[str, bool]]
    error_histogram: dict[str, dict[str, int]]
    stage_error_rates: dict[str, dict[str, float]]
    avg_context_tokens: dict[str, float]
    ideal_rerank_pass_at_1: float
    topic_pass_at_1: dict[str, dict[str, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "approaches": self.approaches,
            "task_ids": self.task_ids,
            "pass_at_1": self.pass_at_1,
            "pass_matrix": self.pass_matrix,
            "error_histogram": self.error_histogram,
            "stage_error_rates": self.stage_error_rates,
            "avg_context_tokens": self.avg_context_tokens,
            "ideal_rerank_pass_at_1": self.ideal_rerank_pass_at_1,
            "topic_pass_at_1": self.topic_pass_at_1,
            "metadata": self.metadata,
        }


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def generate(spec: GeneratorSpec, prompt: str) -> str:
    """One greedy completion from the provider, or the mock table."""
    if spec.endpoint == "mock":
        table = spec.mock_table or {}
        completion = table.get(prompt_key(prompt))
        if completion is not None:
            return completion
        if spec.strict_mock:
            raise MockMiss(f"no mock completion for prompt hash {prompt_key(prompt)[:12]}")
        return MOCK_FALLBACK_COMPLETION
    request = urllib.request.Request(
        spec.endpoint,
        method="POST",
        data=json.dumps(
            {
                "model": spec.model,
                "prompt": prompt,
                "max_new_tokens": spec.max_new_tokens,
                "temperature": spec.temperature,
            }
        ).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request, timeout=spec.timeout_seconds) as response:
            payload = json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise GeneratorError(f"generator returned HTTP {exc.code}", status=exc.code) from exc
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise GeneratorError(f"generator request failed: {exc}") from exc
    completion = payload.get("completion")
    if not isinstance(completion, str):
        raise GeneratorError("generator response missing 'completion'")
    return completion


def extract_code(completion: str, template_id: str = "codellama") -> str:
    """[PYTHON] tags first, then the first fenced region, then the raw text."""
    tagged = _PYTHON_TAG_RE.search(completion)
    if tagged:
        return tagged.group(1).strip("\n")
    fenced = _FENCE_RE.search(completion)
    if fenced:
        return fenced.group(1).strip("\n")
    return completion


def judge(solution: str, task: Task, runner: RunnerSpec) -> tuple[bool, str | None]:
    """Run solution + test script in the sandbox; classify the failure kind."""
    verdict = run_program(solution + "\n" + task.test_script, runner)
    if verdict.status == "ok":
        return True, None
    if verdict.status == "timeout":
        return False, "Timeout"
    return False, classify_error_kind(verdict.error_kind)


def context_token_count(text: str) -> int:
    """Approximate token count: non-whitespace runs split at punctuation."""
    return len(_TOKEN_RE.findall(text))


def load_tasks(path: str | Path) -> list[Task]:
    tasks = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            task = Task(
                task_id=record["task_id"],
                prompt=record["prompt"],
                test_script=record["test_script"],
                entry_point=record["entry_point"],
                topic=record.get("topic"),
            )
            if task.task_id in seen:
                raise ValueError(f"duplicate task_id {task.task_id!r}")
            seen.add(task.task_id)
            tasks.append(task)
    return tasks


def load_mock_table(path: str | Path) -> dict[str, str]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            table[record["prompt_sha256"]] = record["completion"]
    return table


def run_suite(
    tasks: list[Task],
    graph: PkgGraph | None,
    approaches: list[Approach],
    generator: GeneratorSpec,
    runner: RunnerSpec,
    spec: EmbedderSpec,
    prune_cfg: PruneConfig | None = None,
    max_calls: int = 3,
    retries: int = 1,
    max_workers: int = 4,
) -> EvalReport:
    if not tasks:
        raise ValueError("task suite is empty")
    if any(a.mode is not None for a in approaches) and graph is None:
        raise ValueError("retrieval approaches require a graph")

    labels = [a.label for a in approaches]
    ordered_tasks = sorted(tasks, key=lambda t: t.task_id)
    pass_matrix: dict[str, dict[str, bool]] = {}
    error_kinds: dict[str, dict[str, str]] = {label: {} for label in labels + ["reranked"]}
    context_tokens: dict[str, list[int]] = {label: [] for label in labels}
    all_candidates: list[Candidate] = []

    for task in ordered_tasks:
        row: dict[str, bool] = {}
        task_candidates: list[Candidate] = []
        for approach in approaches:
            result = _retrieve_for(task, approach, graph, spec, prune_cfg, max_calls)
            context_tokens[approach.label].append(_context_tokens(result))
            prompt = augment(task.prompt, result, approach.template)
            solution = _generate_solution(generator, prompt, approach.template, retries)
            passed, kind = judge(solution, task, runner)
            row[approach.label] = passed
            if not passed:
                error_kinds[approach.label][task.task_id] = kind or "Other"
            task_candidates.append(
                Candidate(id=approach.label, origin=approach.label, source=solution)
            )

        report = rerank(task_candidates, task.prompt, runner, spec, max_workers=max_workers)
        reranked_passed = row[report.chosen.origin]
        row["reranked"] = reranked_passed
        if not reranked_passed:
            error_kinds["reranked"][task.task_id] = (
                error_kinds[report.chosen.origin].get(task.task_id, "Other")
            )
        all_candidates.extend(report.candidates)
        pass_matrix[task.task_id] = row

    all_labels = labels + ["reranked"]
    pass_at_1 = {
        label: _mean([pass_matrix[t.task_id][label] for t in ordered_tasks])
        for label in all_labels
    }
    ideal = _mean(
        [any(pass_matrix[t.task_id][label] for label in labels) for t in ordered_tasks]
    )
    histogram = {
        label: _histogram(error_kinds[label].values()) for label in all_labels
    }
    avg_tokens = {
        label: (sum(counts) / len(counts) if counts else 0.0)
        for label, counts in context_tokens.items()
    }

    topic_pass = {}
    topics = sorted({t.topic for t in ordered_tasks if t.topic})
    for topic in topics:
        members = [t for t in ordered_tasks if t.topic == topic]
        topic_pass[topic] = {
            label: _mean([pass_matrix[t.task_id][label] for t in members])
            for label in all_labels
        }

    return EvalReport(
        approaches=labels,
        task_ids=[t.task_id for t in ordered_tasks],
        pass_at_1=pass_at_1,
        pass_matrix=pass_matrix,
        error_histogram=histogram,
        stage_error_rates=stage_error_rates(all_candidates),
        avg_context_tokens=avg_tokens,
        ideal_rerank_pass_at_1=ideal,
        topic_pass_at_1=topic_pass,
        metadata={
            "generator_endpoint": generator.endpoint,
            "generator_model": generator.model,
            "temperature": generator.temperature,
            "max_new_tokens": generator.max_new_tokens,
            "task_count": len(ordered_tasks),
            "token_rule": "non-whitespace runs split at punctuation (approximate)",
        },
    )


def write_pass_matrix_csv(report: EvalReport, path: str | Path) -> None:
    labels = report.approaches + ["reranked"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_id"] + labels)
        for task_id in report.task_ids:
            row = report.pass_matrix[task_id]
            writer.writerow([task_id] + [int(row[label]) for label in labels])


# --- internals ---------------------------------------------------------------


def _retrieve_for(
    task: Task,
    approach: Approach,
    graph: PkgGraph | None,
    spec: EmbedderSpec,
    prune_cfg: PruneConfig | None,
    max_calls: int,
) -> RetrievalResult | None:
    if approach.mode is None:
        return None
    base = prune_cfg or PruneConfig()
    cfg = PruneConfig(
        enabled=approach.prune,
        max_branches_removed=base.max_branches_removed,
        min_remaining_lines=base.min_remaining_lines,
    )
    return retrieve(graph, task.prompt, approach.mode, cfg, spec, max_calls=max_calls)


def _context_tokens(result: RetrievalResult | None) -> int:
    if result is None:
        return 0
    return context_token_count(result.rendered_context + render_helpers(result.resolved_calls))


def _generate_solution(
    generator: GeneratorSpec, prompt: str, template_id: str, retries: int
) -> str:
    for _attempt in range(max(1, retries + 1)):
        try:
            return extract_code(generate(generator, prompt), template_id)
        except GeneratorError:
            continue
    # The task is recorded as failed for this approach: the stand-in program
    # fails the runtime filter and any judge run.
    return "raise RuntimeError('generation failed')"


def _mean(values: list[bool]) -> float:
    return sum(values) / len(values) if values else 0.0


def _histogram(kinds) -> dict[str, int]:
    counts = {name: 0 for name in HISTOGRAM_CLASSES}
    for kind in kinds:
        counts[classify_error_kind(kind)] += 1
    return counts
