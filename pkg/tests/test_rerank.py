import json
import random

import numpy as np
import pytest

from pkgraph import (
    Candidate,
    RunnerSpec,
    embed_text,
    rerank,
    run_program,
    runtime_filter,
    select,
    syntax_filter,
)
from pkgraph.errors import NoCandidates, RunnerUnavailable
from gengraph import random_text
from genfuncs import random_corpus


def make(id_, source, origin="none"):
    return Candidate(id=id_, origin=origin, source=source)


# --- syntax filter ---------------------------------------------------------------


def test_syntax_filter_verdicts():
    candidates = [
        make("a", "def f(: pass"),
        make("b", "x = 1\n"),
        make("c", "def f():\n\tif x:\n        pass\n"),
    ]
    syntax_filter(candidates)
    assert [c.syntax_ok for c in candidates] == [False, True, False]


def test_syntax_filter_matches_reference_parser_fixture():
    rng = random.Random(20240505)
    programs = []
    for source, _ in random_corpus(rng, 34):
        programs.append(source)
    for source, _ in random_corpus(rng, 33):
        # Break the header: drop the colon.
        programs.append(source.replace("):", ")", 1))
    for source, _ in random_corpus(rng, 33):
        # Break indentation: outdent the first indented line.
        lines = source.split("\n")
        for index, line in enumerate(lines):
            if line.startswith("    ") and not line.startswith("        "):
                lines[index] = line[2:]
                break
        programs.append("\n".join(lines))
    assert len(programs) == 100

    candidates = [make(str(i), src) for i, src in enumerate(programs)]
    syntax_filter(candidates)
    for candidate, source in zip(candidates, programs):
        try:
            compile(source, "<fixture>", "exec")
            expected = True
        except SyntaxError:
            expected = False
        assert candidate.syntax_ok == expected


# --- runtime filter ---------------------------------------------------------------


def test_runtime_filter_verdicts(stub_runner):
    candidates = [
        make("a", "x = 1\n"),
        make("b", "print(undefined_name)\n"),
        make("c", "def f(: pass"),
    ]
    syntax_filter(candidates)
    runtime_filter(candidates, stub_runner)
    assert candidates[0].runtime_ok is True
    assert candidates[1].runtime_ok is False
    assert candidates[1].runtime_error_kind == "NameError"
    # Syntax-failed candidates are skipped entirely.
    assert candidates[2].runtime_ok is None
    assert candidates[2].runtime_error_kind is None


def test_runtime_filter_timeout(stub_runner):
    runner = RunnerSpec(command=stub_runner.command, timeout_seconds=2.0)
    candidates = syntax_filter([make("a", "while True: pass\n")])
    runtime_filter(candidates, runner)
    assert candidates[0].runtime_ok is False
    assert candidates[0].runtime_error_kind == "Timeout"


def test_runner_unavailable():
    runner = RunnerSpec(command="/nonexistent/runner-binary")
    with pytest.raises(RunnerUnavailable):
        run_program("x = 1\n", runner)


def test_run_program_canned_verdict(stub_runner):
    verdict = run_program("# verdict: error TypeError\n", stub_runner)
    assert verdict.status == "error"
    assert verdict.error_kind == "TypeError"


# --- select --------------------------------------------------------------------


def test_select_similarity_argmax(det_spec):
    candidates = [
        make("c1", "alpha beta"),
        make("c2", "gamma delta"),
    ]
    for c in candidates:
        c.syntax_ok = True
        c.runtime_ok = True
    chosen, tier = select(candidates, "alpha beta", det_spec)
    assert chosen.id == "c1"
    assert tier == 1
    assert candidates[0].similarity == pytest.approx(1.0)


def test_select_tier3_when_all_invalid(det_spec):
    candidates = [make("c1", "def broken(:"), make("c2", "also ( broken")]
    for c in candidates:
        c.syntax_ok = False
    chosen, tier = select(candidates, "anything", det_spec)
    assert tier == 3
    assert chosen.id in ("c1", "c2")


def test_select_single_candidate_any_verdict(det_spec):
    candidate = make("only", "def broken(:")
    candidate.syntax_ok = False
    chosen, tier = select([candidate], "q", det_spec)
    assert chosen.id == "only"
    assert tier == 3


def test_select_empty_raises(det_spec):
    with pytest.raises(NoCandidates):
        select([], "q", det_spec)


def test_select_never_skips_valid_tier(det_spec):
    candidates = [make("bad", "def broken(:"), make("good", "x = 1")]
    candidates[0].syntax_ok = False
    candidates[1].syntax_ok = True
    chosen, tier = select(candidates, "anything at all", det_spec)
    assert chosen.id == "good"
    assert tier == 2


def test_select_matches_bruteforce_over_tiers_randomized(det_spec):
    # Property: selection equals an argmax loop over the best non-empty tier.
    rng = random.Random(20240506)
    for _case in range(150):
        count = rng.randint(1, 8)
        candidates = []
        for i in range(count):
            c = make(f"c{i}", random_text(rng), origin=rng.choice(("none", "block-pkg")))
            c.syntax_ok = rng.random() < 0.7
            if c.syntax_ok:
                c.runtime_ok = rng.random() < 0.6
            candidates.append(c)
        query = random_text(rng)
        chosen, tier = select(list(candidates), query, det_spec)

        tier_runnable = [c for c in candidates if c.syntax_ok and c.runtime_ok]
        tier_parsable = [c for c in candidates if c.syntax_ok]
        pool = tier_runnable or tier_parsable or candidates
        expected_tier = 1 if tier_runnable else (2 if tier_parsable else 3)
        query_vec = embed_text(det_spec, query)
        best, best_key = None, None
        for c in pool:
            vec = embed_text(det_spec, c.source)
            qn, vn = float(np.linalg.norm(query_vec)), float(np.linalg.norm(vec))
            score = 0.0 if qn == 0.0 or vn == 0.0 else float(np.dot(query_vec, vec)) / (qn * vn)
            key = (-score, c.id)
            if best_key is None or key < best_key:
                best, best_key = c, key
        assert tier == expected_tier
        assert chosen.id == best.id


# --- rerank -----------------------------------------------------------------------


def test_rerank_three_stage_pipeline(stub_runner, det_spec):
    candidates = [
        make("broken-syntax", "def f(: pass", origin="bm25"),
        make("broken-runtime", "print(undefined_name)\n", origin="none"),
        make("clean", "value = 1\n", origin="block-pkg"),
    ]
    report = rerank(candidates, "value", stub_runner, det_spec)
    assert report.chosen.id == "clean"
    assert report.tier == 1
    assert report.survivor_counts == (3, 2, 1)
    assert report.stage_error_rates["bm25"]["syntax_error_rate"] == 1.0
    assert report.stage_error_rates["none"]["runtime_error_rate"] == 1.0
    assert report.stage_error_rates["block-pkg"] == {
        "syntax_error_rate": 0.0, "runtime_error_rate": 0.0,
    }


def test_rerank_similarity_decides_between_clean_candidates(stub_runner, det_spec):
    # The non-RAG candidate can win when it is closer to the query.
    candidates = [
        make("none", 'text = "count words in text"\ncount = len(text.split())\n', origin="none"),
        make("block-pkg", "total = 0\n", origin="block-pkg"),
    ]
    report = rerank(candidates, "count words in text", stub_runner, det_spec)
    assert report.chosen.origin == "none"


def test_rerank_empty_raises(stub_runner, det_spec):
    with pytest.raises(NoCandidates):
        rerank([], "q", stub_runner, det_spec)


def test_rerank_deterministic_with_canned_verdicts(stub_runner, det_spec):
    candidates_spec = [
        ("a", "# verdict: ok\nx = alpha\n"),
        ("b", "# verdict: error NameError\ny = beta\n"),
        ("c", "# verdict: timeout\nz = gamma\n"),
    ]
    reports = []
    for _ in range(2):
        candidates = [make(i, s) for i, s in candidates_spec]
        report = rerank(candidates, "alpha", stub_runner, det_spec)
        reports.append(json.dumps(report.to_dict(), sort_keys=True))
    assert reports[0] == reports[1]
    report = rerank([make(i, s) for i, s in candidates_spec], "alpha", stub_runner, det_spec)
    assert report.chosen.id == "a"
    assert report.candidates[1].runtime_error_kind == "NameError"
    assert report.candidates[2].runtime_error_kind == "Timeout"
