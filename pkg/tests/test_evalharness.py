import json

import pytest

from pkgraph import (
    Approach,
    GeneratorSpec,
    PruneConfig,
    RetrievalMode,
    Task,
    context_token_count,
    extract_code,
    generate,
    judge,
    load_mock_table,
    load_tasks,
    prompt_key,
    retrieve,
    run_suite,
)
from pkgraph.errors import MockMiss
from pkgraph.evalharness import write_pass_matrix_csv
from pkgraph.templates import augment


# --- generate -------------------------------------------------------------------


def test_mock_generator_table_hit():
    spec = GeneratorSpec(mock_table={prompt_key("p"): "def f(): return 1"})
    assert generate(spec, "p") == "def f(): return 1"


def test_mock_generator_strict_miss():
    spec = GeneratorSpec(mock_table={}, strict_mock=True)
    with pytest.raises(MockMiss):
        generate(spec, "unknown prompt")


def test_mock_generator_fallback():
    spec = GeneratorSpec(mock_table={})
    assert "[PYTHON]" in generate(spec, "unknown prompt")


# --- extract_code ------------------------------------------------------------------


def test_extract_code_python_tags():
    assert extract_code("[PYTHON]\nx=1\n[/PYTHON]") == "x=1"


def test_extract_code_fenced_fallback():
    completion = "Sure!\n```python\ny = 2\n```\nDone."
    assert extract_code(completion) == "y = 2"


def test_extract_code_plain_last_resort():
    assert extract_code("just text") == "just text"


# --- judge ---------------------------------------------------------------------


TASK = Task(task_id="t1", prompt="add two numbers",
            test_script="assert add(1, 2) == 3", entry_point="add")


def test_judge_pass(stub_runner):
    passed, kind = judge("def add(a, b):\n    return a + b", TASK, stub_runner)
    assert passed and kind is None


def test_judge_wrong_value(stub_runner):
    passed, kind = judge("def add(a, b):\n    return a - b", TASK, stub_runner)
    assert not passed
    assert kind == "AssertionError"


def test_judge_missing_entry_point(stub_runner):
    passed, kind = judge("x = 1", TASK, stub_runner)
    assert not passed
    assert kind == "NameError"


def test_judge_idempotent(stub_runner):
    verdicts = {judge("def add(a, b):\n    return a + b", TASK, stub_runner) for _ in range(3)}
    assert verdicts == {(True, None)}


# --- token counting -----------------------------------------------------------------


def test_context_token_count_rule():
    assert context_token_count("") == 0
    assert context_token_count("x = 1") == 3
    assert context_token_count("def f(x):") == 6


# --- suite ---------------------------------------------------------------------


def toy_tasks(count: int) -> list[Task]:
    return [
        Task(
            task_id=f"t{i:02d}",
            prompt=f"implement function f{i} that returns {i}",
            test_script=f"assert f{i}() == {i}",
            entry_point=f"f{i}",
            topic="arith" if i % 2 == 0 else "other",
        )
        for i in range(count)
    ]


def passing_completion(i: int) -> str:
    return f"[PYTHON]\ndef f{i}():\n    return {i}\n[/PYTHON]"


def broken_completion(i: int) -> str:
    # Breaks at module scope, so both the runtime filter and the judge fail it.
    return f"[PYTHON]\nprint(undefined_name_{i})\n[/PYTHON]"


def wrong_value_completion(i: int) -> str:
    return f"[PYTHON]\ndef f{i}():\n    return -1\n[/PYTHON]"


def make_mock_table(tasks, graph, approaches, spec, completion_for):
    """Mirror the harness's prompt construction to key the mock table."""
    table = {}
    for task in tasks:
        for approach in approaches:
            if approach.mode is None:
                result = None
            else:
                cfg = PruneConfig(enabled=approach.prune)
                result = retrieve(graph, task.prompt, approach.mode, cfg, spec)
            prompt = augment(task.prompt, result, approach.template)
            table[prompt_key(prompt)] = completion_for(task, approach)
    return table


APPROACHES = [
    Approach("none", None, prune=False, template="none"),
    Approach("block-pkg", RetrievalMode.BLOCK_WISE),
]


def run_two_task_suite(toy_graph, det_spec, stub_runner):
    tasks = toy_tasks(2)

    def completion_for(task, approach):
        i = int(task.task_id[1:])
        return passing_completion(i) if approach.label == "block-pkg" else broken_completion(i)

    table = make_mock_table(tasks, toy_graph, APPROACHES, det_spec, completion_for)
    generator = GeneratorSpec(mock_table=table, strict_mock=True)
    return run_suite(tasks, toy_graph, APPROACHES, generator, stub_runner, det_spec)


def test_suite_block_pkg_wins(toy_graph, det_spec, stub_runner):
    report = run_two_task_suite(toy_graph, det_spec, stub_runner)
    assert report.pass_at_1 == {"none": 0.0, "block-pkg": 1.0, "reranked": 1.0}
    assert report.ideal_rerank_pass_at_1 == 1.0
    # The broken none-solutions fail at the runtime stage, every time.
    assert report.stage_error_rates["none"]["runtime_error_rate"] == 1.0
    assert report.error_histogram["none"]["NameError"] == 2
    assert report.avg_context_tokens["none"] == 0.0
    assert report.avg_context_tokens["block-pkg"] > 0


def test_suite_single_approach_reranked_equals_it(toy_graph, det_spec, stub_runner):
    tasks = toy_tasks(2)
    approaches = [Approach("none", None, prune=False, template="none")]

    def completion_for(task, approach):
        return passing_completion(int(task.task_id[1:]))

    table = make_mock_table(tasks, toy_graph, approaches, det_spec, completion_for)
    generator = GeneratorSpec(mock_table=table, strict_mock=True)
    report = run_suite(tasks, None, approaches, generator, stub_runner, det_spec)
    assert report.pass_at_1["reranked"] == report.pass_at_1["none"] == 1.0


def test_suite_all_fail_task_excluded_from_ideal(toy_graph, det_spec, stub_runner):
    tasks = toy_tasks(2)

    def completion_for(task, approach):
        i = int(task.task_id[1:])
        if i == 0:
            return passing_completion(i)
        return wrong_value_completion(i)

    table = make_mock_table(tasks, toy_graph, APPROACHES, det_spec, completion_for)
    generator = GeneratorSpec(mock_table=table, strict_mock=True)
    report = run_suite(tasks, toy_graph, APPROACHES, generator, stub_runner, det_spec)
    assert report.ideal_rerank_pass_at_1 == 0.5
    assert report.pass_at_1["reranked"] <= report.ideal_rerank_pass_at_1
    # Wrong-value solutions run fine but fail the judge with AssertionError.
    assert report.error_histogram["block-pkg"]["AssertionError"] == 1


def test_report_invariants(toy_graph, det_spec, stub_runner):
    report = run_two_task_suite(toy_graph, det_spec, stub_runner)
    for label in report.approaches + ["reranked"]:
        column = [report.pass_matrix[t][label] for t in report.task_ids]
        assert report.pass_at_1[label] == sum(column) / len(column)
        failures = sum(1 for v in column if not v)
        assert sum(report.error_histogram[label].values()) == failures
    recomputed_ideal = sum(
        any(report.pass_matrix[t][label] for label in report.approaches)
        for t in report.task_ids
    ) / len(report.task_ids)
    assert report.ideal_rerank_pass_at_1 == recomputed_ideal
    for label in report.approaches:
        assert report.ideal_rerank_pass_at_1 >= report.pass_at_1[label]
    assert report.ideal_rerank_pass_at_1 >= report.pass_at_1["reranked"]


def test_topic_aggregation(toy_graph, det_spec, stub_runner):
    report = run_two_task_suite(toy_graph, det_spec, stub_runner)
    assert set(report.topic_pass_at_1) == {"arith", "other"}
    assert report.topic_pass_at_1["arith"]["block-pkg"] == 1.0


def test_generator_failure_records_task_as_failed(toy_graph, det_spec, stub_runner):
    tasks = toy_tasks(1)
    approaches = [Approach("none", None, prune=False, template="none")]
    generator = GeneratorSpec(endpoint="http://127.0.0.1:1/generate", model="m",
                              timeout_seconds=0.5)
    report = run_suite(tasks, None, approaches, generator, stub_runner, det_spec,
                       retries=1)
    assert report.pass_at_1["none"] == 0.0
    assert report.error_histogram["none"]["Other"] == 1


def test_task_and_mock_table_files(tmp_path):
    tasks_path = tmp_path / "tasks.jsonl"
    tasks_path.write_text(
        json.dumps({"task_id": "a", "prompt": "p", "test_script": "assert True",
                    "entry_point": "f", "topic": "misc"}) + "\n"
    )
    tasks = load_tasks(tasks_path)
    assert tasks[0].topic == "misc"

    table_path = tmp_path / "mock.jsonl"
    table_path.write_text(json.dumps({"prompt_sha256": "ff", "completion": "x"}) + "\n")
    assert load_mock_table(table_path) == {"ff": "x"}


def test_duplicate_task_ids_rejected(tmp_path):
    record = json.dumps({"task_id": "a", "prompt": "p", "test_script": "assert True",
                         "entry_point": "f"})
    tasks_path = tmp_path / "tasks.jsonl"
    tasks_path.write_text(record + "\n" + record + "\n")
    with pytest.raises(ValueError):
        load_tasks(tasks_path)


def test_pass_matrix_csv(tmp_path, toy_graph, det_spec, stub_runner):
    report = run_two_task_suite(toy_graph, det_spec, stub_runner)
    out = tmp_path / "matrix.csv"
    write_pass_matrix_csv(report, out)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "task_id,none,block-pkg,reranked"
    assert lines[1] == "t00,0,1,1"
