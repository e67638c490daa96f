import json
import logging
from dataclasses import replace
from pathlib import Path

import httpx
import pytest

from src.errors import ConfigError, DataError
from src.llm import BackendConfig, BackendKind, Gateway
from src.pipeline import (
    CASES_FILE,
    CONFIG_FILE,
    REPORT_FILE,
    CorruptRunDir,
    NTooLarge,
    RunInputs,
    Split,
    Task,
    Uncited,
    backend_error_exit,
    cmd_eval,
    cmd_run,
    load_run_config,
    render_config,
    sample_ids,
    select_ids,
    split_ids,
    with_cue,
)
from src.prompting import MissingCot, PromptMode
from src.retrieval import NoCitationsFound, RetrievalStrategy

FIXTURES = Path(__file__).parent / "fixtures"
CONFIG_DIR = Path(__file__).parent.parent / "configs"
KEY_VAR = "SEMIQA_TEST_KEY"


def write_ini(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def sara_ini(tmp_path, extra=""):
    return write_ini(
        tmp_path / "sara.ini",
        f"""
[run]
task = sara
output_dir = {tmp_path / "run"}

[data]
cases = {FIXTURES / "sara" / "cases.jsonl"}

[backend]
kind = mock
fixture = {FIXTURES / "sara" / "mock.jsonl"}
max_parallel = 2
{extra}""",
    )


def finqa_ini(tmp_path):
    return write_ini(
        tmp_path / "finqa.ini",
        f"""
[run]
task = finqa
output_dir = {tmp_path / "run"}

[data]
corpus = {FIXTURES / "finqa" / "finqa_mini.json"}

[retrieval]
fact_mode = gold

[backend]
kind = mock
fixture = {FIXTURES / "finqa" / "mock.jsonl"}
""",
    )


def http_gateway(monkeypatch, handler):
    monkeypatch.setenv(KEY_VAR, "sk-test")
    config = BackendConfig(
        kind=BackendKind.HTTP_COMPLETIONS,
        endpoint_url="https://llm.example.test/v1/completions",
        auth_env_var=KEY_VAR,
        max_retries=0,
        retry_base_s=0.0,
    )
    return Gateway(config, transport=httpx.MockTransport(handler))


# Config files


def test_relative_paths_and_defaults(tmp_path):
    path = write_ini(
        tmp_path / "configs" / "exp.ini",
        "[run]\ntask = sara\n[data]\ncases = ../data/cases.jsonl\n[backend]\nkind = mock\nfixture = m.jsonl\n",
    )
    config = load_run_config(path)
    base = (tmp_path / "configs").resolve()
    assert config.cases == (tmp_path / "data" / "cases.jsonl").resolve()
    assert config.backend.fixture == base / "m.jsonl"
    assert config.output_dir == base / "runs" / "exp"
    assert config.backend.cache_dir == config.output_dir / "cache"
    assert config.mode == PromptMode.COT
    assert config.strategy == RetrievalStrategy.REFERENCES
    assert config.split == Split.ALL
    assert config.stop == ("###",)


@pytest.mark.parametrize(
    "extra, message",
    [
        ("[extras]\nx = 1\n", "unknown section"),
        ("[prompt]\nshots = 3\n", "unknown key"),
        ("[prompt]\nmode = many\n", r"\[prompt\] mode"),
        ("[prompt]\nmax_prompt_tokens = lots\n", "expected an integer"),
        ("[prompt]\nstop = ###\n", "JSON array"),
        ("[retrieval]\nk = 0\n", "k must be"),
    ],
)
def test_config_errors(tmp_path, extra, message):
    with pytest.raises(ConfigError, match=message):
        load_run_config(sara_ini(tmp_path, extra))


def test_duplicate_run_section_is_an_error(tmp_path):
    # configparser rejects a section given twice
    with pytest.raises(ConfigError):
        load_run_config(sara_ini(tmp_path, "[run]\nseed = 1\n"))


def test_missing_task_and_file(tmp_path):
    with pytest.raises(ConfigError, match="task is required"):
        load_run_config(write_ini(tmp_path / "x.ini", "[backend]\nkind = mock\nfixture = m\n"))
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.ini")
    with pytest.raises(ConfigError, match="corpus is required"):
        load_run_config(
            write_ini(tmp_path / "y.ini", "[run]\ntask = finqa\n[backend]\nkind = mock\nfixture = m\n")
        )
    with pytest.raises(ConfigError, match="seed is required"):
        replace(load_run_config(sara_ini(tmp_path)), sample_n=5)


def test_no_retrieval_strategy(tmp_path):
    config = load_run_config(sara_ini(tmp_path, "[retrieval]\nstrategy = none\n"))
    assert config.strategy == "none"
    inputs = RunInputs.load(config)
    assert inputs.statutes == {}
    context, question = inputs.context("s7703_a_1_pos")
    assert context == inputs.sara_cases["s7703_a_1_pos"].text
    assert "7703(a)(1)" in question


def test_snapshot_round_trip(tmp_path):
    config = load_run_config(sara_ini(tmp_path, "[scoring]\nentailment_cues = holds, applies\n"))
    snapshot = write_ini(tmp_path / "snapshot" / "config.ini", render_config(config))
    assert load_run_config(snapshot) == config


@pytest.mark.parametrize("name", ["example.ini", "sara-mock.ini", "finqa-mock.ini"])
def test_bundled_configs_load(name):
    config = load_run_config(CONFIG_DIR / name)
    assert config.task in (Task.SARA, Task.FINQA)


# Case selection


def test_sample_ids_is_deterministic():
    ids = [f"case-{i:03d}" for i in range(100)]
    first = sample_ids(ids, 10, seed=1)
    assert first == sample_ids(list(reversed(ids)), 10, seed=1)
    assert first == sorted(first)
    assert len(set(first)) == 10
    assert set(first) <= set(ids)
    assert first != sample_ids(ids, 10, seed=2)
    assert sample_ids(ids, 100, seed=1) == ids
    with pytest.raises(NTooLarge):
        sample_ids(ids, 101, seed=1)


def test_split_ids():
    ids = [f"case-{i:03d}" for i in range(50)]
    validation = split_ids(reversed(ids), Split.VALIDATION)
    test = split_ids(ids, Split.TEST)
    assert validation == ids[:40]
    assert test == ids[40:]
    assert split_ids(ids, Split.ALL) == ids


def test_ids_file_selection(tmp_path):
    config = load_run_config(sara_ini(tmp_path))
    ids_file = write_ini(tmp_path / "ids.txt", "# picked\ntax_case_1\n\ns7703_a_2_neg\n")
    config = replace(config, ids_file=ids_file)
    all_ids = RunInputs.load(config).case_ids()
    assert select_ids(config, all_ids) == ["s7703_a_2_neg", "tax_case_1"]

    write_ini(ids_file, "no_such_case\n")
    with pytest.raises(DataError, match="no_such_case"):
        select_ids(config, all_ids)


# Prompt inputs


def test_with_cue():
    completion = " reasons\nAnswer: Entailment"
    assert with_cue("Explanation:", completion) == "Explanation: reasons\nAnswer: Entailment"
    assert with_cue("Answer:", "Entailment") == "Answer: Entailment"
    assert with_cue("Answer:", "") == "Answer:"


def test_sara_context_carries_statute_and_facts(tmp_path):
    inputs = RunInputs.load(load_run_config(sara_ini(tmp_path)))
    context, _ = inputs.context("s7703_a_1_pos")
    assert "s7703(a)(1): " in context
    assert context.endswith(inputs.sara_cases["s7703_a_1_pos"].text)
    with pytest.raises(DataError, match="unknown case id"):
        inputs.context("nope")


def uncited_cases(tmp_path):
    record = {
        "id": "plain",
        "text": "Alice was born in 1990.",
        "question": "Alice is an adult.",
        "gold": "Entailment",
    }
    return write_ini(tmp_path / "cases.jsonl", json.dumps(record) + "\n")


def test_uncited_case_is_failed_and_recorded(tmp_path):
    config = replace(load_run_config(sara_ini(tmp_path)), cases=uncited_cases(tmp_path))
    with pytest.raises(NoCitationsFound):
        RunInputs.load(config).context("plain")

    result = cmd_run(config, quiet=True)
    assert result.backend_calls == 0
    assert result.report.accuracy == 0.0
    [record] = [json.loads(line) for line in (tmp_path / "run" / CASES_FILE).read_text().splitlines()]
    assert record["error_kind"] == "NoCitationsFound"
    assert record["completion"] is None
    assert backend_error_exit(result) == 0


def test_uncited_case_facts_only_fallback(tmp_path, caplog):
    ini = sara_ini(tmp_path, "[retrieval]\nuncited = facts-only\n")
    config = replace(load_run_config(ini), cases=uncited_cases(tmp_path))
    assert config.uncited == Uncited.FACTS_ONLY
    with caplog.at_level(logging.WARNING):
        context, _ = RunInputs.load(config).context("plain")
    assert context == "Alice was born in 1990."
    assert "cites no section" in caplog.text


def test_finqa_context_uses_gold_facts(tmp_path):
    inputs = RunInputs.load(load_run_config(finqa_ini(tmp_path)))
    context, question = inputs.context("ACME/2019/page_10.pdf-1#0")
    assert context.splitlines()[1].startswith("net sales")
    assert question == "what was the percentage change in net sales from 2018 to 2019?"


# Runs


def test_sara_run_end_to_end(tmp_path):
    config = load_run_config(sara_ini(tmp_path))
    result = cmd_run(config, quiet=True)
    assert result.report.n == 4
    assert result.report.accuracy == 1.0
    assert result.report.ci90 == {"accuracy": 0.0}
    assert result.backend_calls == 4
    assert backend_error_exit(result) == 0

    run_dir = tmp_path / "run"
    assert (run_dir / CONFIG_FILE).exists()
    records = [json.loads(line) for line in (run_dir / CASES_FILE).read_text().splitlines()]
    assert sorted(r["id"] for r in records) == [
        "s152_c_1_pos",
        "s7703_a_1_pos",
        "s7703_a_2_neg",
        "tax_case_1",
    ]
    assert all(r["cue"] == "Explanation:" and len(r["exemplar_ids"]) == 8 for r in records)


def test_rerun_is_cached_and_identical(tmp_path):
    config = load_run_config(sara_ini(tmp_path))
    cmd_run(config, quiet=True)
    report_path = tmp_path / "run" / REPORT_FILE
    first = report_path.read_bytes()

    again = cmd_run(config, quiet=True)
    assert again.backend_calls == 0
    assert report_path.read_bytes() == first
    assert len((tmp_path / "run" / CASES_FILE).read_text().splitlines()) == 4


def test_finqa_run_end_to_end(tmp_path):
    result = cmd_run(load_run_config(finqa_ini(tmp_path)), quiet=True)
    report = result.report
    assert report.task == "finqa"
    assert report.n == 4
    assert report.program_accuracy == 1.0
    assert report.answer_accuracy == 1.0
    assert set(report.ci90) == {"accuracy", "program_accuracy", "answer_accuracy"}


def test_sample_selects_subset(tmp_path):
    config = load_run_config(sara_ini(tmp_path))
    config = replace(config, sample_n=2, seed=7)
    result = cmd_run(config, quiet=True)
    assert result.report.n == 2
    assert cmd_run(config, quiet=True).report == result.report


def test_empty_split_is_refused(tmp_path):
    config = replace(load_run_config(sara_ini(tmp_path)), split=Split.TEST)
    with pytest.raises(ConfigError, match="no cases selected"):
        cmd_run(config, quiet=True)


def test_changed_config_is_refused(tmp_path):
    config = load_run_config(sara_ini(tmp_path))
    cmd_run(config, quiet=True)
    with pytest.raises(ConfigError, match="different config"):
        cmd_run(replace(config, mode=PromptMode.FEW), quiet=True)


def test_missing_cot_aborts_run(tmp_path):
    bank = write_ini(
        tmp_path / "bank.jsonl",
        json.dumps({"id": "e1", "context": "c", "question": "q", "answer": "Entailment"}) + "\n",
    )
    config = replace(load_run_config(sara_ini(tmp_path)), exemplars=bank, n_exemplars=1)
    with pytest.raises(MissingCot):
        cmd_run(config, quiet=True)


def test_backend_failures_resume(tmp_path, monkeypatch):
    config = load_run_config(sara_ini(tmp_path))

    failing = http_gateway(monkeypatch, lambda request: httpx.Response(503))
    result = cmd_run(config, quiet=True, gateway=failing)
    assert result.backend_failures == 4
    assert result.report.accuracy == 0.0
    assert backend_error_exit(result) == 2

    answering = http_gateway(
        monkeypatch,
        lambda request: httpx.Response(200, json={"choices": [{"text": " Answer: Entailment"}]}),
    )
    result = cmd_run(config, quiet=True, gateway=answering)
    assert result.backend_failures == 0
    assert answering.calls == 4
    assert result.report.accuracy == 0.75
    assert backend_error_exit(result) == 0


# Re-scoring


def test_eval_matches_run_report(tmp_path):
    cmd_run(load_run_config(sara_ini(tmp_path)), quiet=True)
    run_dir = tmp_path / "run"
    stored = json.loads((run_dir / REPORT_FILE).read_text())
    assert cmd_eval(run_dir).to_dict() == stored
    assert cmd_eval(run_dir).to_dict() == stored


def test_eval_after_deleting_a_record(tmp_path):
    cmd_run(load_run_config(sara_ini(tmp_path)), quiet=True)
    cases = tmp_path / "run" / CASES_FILE
    lines = cases.read_text().splitlines()
    cases.write_text("\n".join(lines[1:]) + "\n")
    assert cmd_eval(tmp_path / "run").n == 3


def test_eval_rejects_non_run_dirs(tmp_path):
    with pytest.raises(CorruptRunDir):
        cmd_eval(tmp_path)
    cmd_run(load_run_config(sara_ini(tmp_path)), quiet=True)
    (tmp_path / "run" / CASES_FILE).write_text("{broken\n")
    with pytest.raises(CorruptRunDir):
        cmd_eval(tmp_path / "run")
