"""Candidate filtering and selection: syntax check, sandboxed run, similarity.

Selection degrades tier-wise: argmax query-candidate similarity over the
candidates that parsed and ran (tier 1), else over those that parsed (tier 2),
else over everything (tier 3), so one solution is always returned.
"""

from __future__ import annotations

import ast
import json
import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import EmbedderSpec, embed_text, similarity
from .errors import NoCandidates, RunnerUnavailable

ERROR_TAXONOMY = ("AssertionError", "NameError", "TypeError", "SyntaxError", "IndentationError")

# Extra wall-clock slack granted to the runner process itself beyond the
# candidate's timeout budget.
_RUNNER_GRACE_SECONDS = 15.0


@dataclass
class RunnerSpec:
    command: str
    timeout_seconds: float = 5.0
    memory_limit_mb: int = 512

    def __post_init__(self) -> None:
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.memory_limit_mb <= 0:
            raise ValueError("memory_limit_mb must be positive")


@dataclass
class Candidate:
    id: str
    origin: str
    source: str
    syntax_ok: bool | None = None
    runtime_ok: bool | None = None
    runtime_error_kind: str | None = None
    similarity: float | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "origin": self.origin,
            "syntax_ok": self.syntax_ok,
            "runtime_ok": self.runtime_ok,
            "runtime_error_kind": self.runtime_error_kind,
            "similarity": self.similarity,
        }


@dataclass
class RunVerdict:
    status: str
    error_kind: str | None
    stderr_tail: str
    duration_ms: float


@dataclass
class RerankReport:
    chosen: Candidate
    tier: int
    candidates: list[Candidate]
    survivor_counts: tuple[int, int, int]
    stage_error_rates: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "chosen_id": self.chosen.id,
            "chosen_origin": self.chosen.origin,
            "tier": self.tier,
            "candidates": [c.to_dict() for c in self.candidates],
            "survivor_counts": {
                "all": self.survivor_counts[0],
                "syntax_ok": self.survivor_counts[1],
                "runtime_ok": self.survivor_counts[2],
            },
            "stage_error_rates": self.stage_error_rates,
        }


def syntax_filter(candidates: list[Candidate]) -> list[Candidate]:
    """Record a parse verdict on every candidate; nothing is removed."""
    for candidate in candidates:
        try:
            ast.parse(candidate.source)
        except (SyntaxError, ValueError):
            candidate.syntax_ok = False
        else:
            candidate.syntax_ok = True
    return candidates


def run_program(source: str, runner: RunnerSpec) -> RunVerdict:
    """Execute one program through the sandbox-runner protocol."""
    with tempfile.NamedTemporaryFile(
        "w", suffix=".py", prefix="candidate_", delete=False, encoding="utf-8"
    ) as handle:
        handle.write(source)
        path = handle.name
    try:
        argv = shlex.split(runner.command) + [
            path,
            "--timeout", str(runner.timeout_seconds),
            "--memory-mb", str(runner.memory_limit_mb),
        ]
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=runner.timeout_seconds + _RUNNER_GRACE_SECONDS,
            )
        except FileNotFoundError as exc:
            raise RunnerUnavailable(f"runner command not found: {runner.command}") from exc
        except subprocess.TimeoutExpired as exc:
            raise RunnerUnavailable(f"runner did not answer in time: {runner.command}") from exc
        if proc.returncode != 0:
            raise RunnerUnavailable(
                f"runner exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}"
            )
        line = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
        try:
            payload = json.loads(line)
            return RunVerdict(
                status=payload["status"],
                error_kind=payload.get("error_kind"),
                stderr_tail=payload.get("stderr_tail", ""),
                duration_ms=float(payload.get("duration_ms", 0.0)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise RunnerUnavailable(f"runner emitted an invalid verdict: {line[:200]}") from exc
    finally:
        os.unlink(path)


def runtime_filter(
    candidates: list[Candidate], runner: RunnerSpec, max_workers: int = 4
) -> list[Candidate]:
    """Execute every syntax-valid candidate; record runtime verdicts."""
    to_run = [c for c in candidates if c.syntax_ok]
    if to_run:
        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            verdicts = list(pool.map(lambda c: run_program(c.source, runner), to_run))
        for candidate, verdict in zip(to_run, verdicts):
            if verdict.status == "ok":
                candidate.runtime_ok = True
                candidate.runtime_error_kind = None
            elif verdict.status == "timeout":
                candidate.runtime_ok = False
                candidate.runtime_error_kind = "Timeout"
            else:
                candidate.runtime_ok = False
                candidate.runtime_error_kind = verdict.error_kind or "Other"
    return candidates


def select(
    candidates: list[Candidate], query: str, spec: EmbedderSpec
) -> tuple[Candidate, int]:
    """Argmax similarity in the best non-empty tier; ties to the lowest id."""
    if not candidates:
        raise NoCandidates("no candidates to select from")
    runnable = [c for c in candidates if c.syntax_ok and c.runtime_ok]
    parsable = [c for c in candidates if c.syntax_ok]
    if runnable:
        pool, tier = runnable, 1
    elif parsable:
        pool, tier = parsable, 2
    else:
        pool, tier = candidates, 3
    query_vec = embed_text(spec, query)
    for candidate in pool:
        candidate.similarity = similarity(query_vec, embed_text(spec, candidate.source))
    chosen = sorted(pool, key=lambda c: (-c.similarity, c.id))[0]
    return chosen, tier


def classify_error_kind(kind: str | None) -> str:
    """Collapse a raw exception name into the reporting taxonomy."""
    if kind in ERROR_TAXONOMY:
        return kind
    return "Other"


def stage_error_rates(candidates: list[Candidate]) -> dict[str, dict[str, float]]:
    """Per-origin fraction of candidates with syntax and with runtime errors."""
    by_origin: dict[str, list[Candidate]] = {}
    for candidate in candidates:
        by_origin.setdefault(candidate.origin, []).append(candidate)
    rates = {}
    for origin in sorted(by_origin):
        group = by_origin[origin]
        total = len(group)
        syntax_bad = sum(1 for c in group if c.syntax_ok is False)
        runtime_bad = sum(1 for c in group if c.runtime_ok is False)
        rates[origin] = {
            "syntax_error_rate": syntax_bad / total,
            "runtime_error_rate": runtime_bad / total,
        }
    return rates


def rerank(
    candidates: list[Candidate],
    query: str,
    runner: RunnerSpec,
    spec: EmbedderSpec,
    max_workers: int = 4,
) -> RerankReport:
    """syntax_filter -> runtime_filter -> select, with stage statistics."""
    if not candidates:
        raise NoCandidates("no candidates to rerank")
    ordered = sorted(candidates, key=lambda c: c.id)
    syntax_filter(ordered)
    runtime_filter(ordered, runner, max_workers=max_workers)
    chosen, tier = select(ordered, query, spec)
    return RerankReport(
        chosen=chosen,
        tier=tier,
        candidates=ordered,
        survivor_counts=(
            len(ordered),
            sum(1 for c in ordered if c.syntax_ok),
            sum(1 for c in ordered if c.syntax_ok and c.runtime_ok),
        ),
        stage_error_rates=stage_error_rates(ordered),
    )


def load_candidate_dir(directory: str | Path) -> list[Candidate]:
    """Read candidates from a directory with an index.jsonl of {id, origin, path}."""
    directory = Path(directory)
    index = directory / "index.jsonl"
    candidates = []
    with open(index, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            source = (directory / record["path"]).read_text(encoding="utf-8")
            candidates.append(Candidate(id=record["id"], origin=record["origin"], source=source))
    return candidates
