"""Run orchestration: INI run configs, case selection, resumable runs and re-scoring."""

import configparser
import io
import json
import logging
import random
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

from tqdm import tqdm

from .citations import extract_citations
from .config import (
    ANSWER_REL_TOL,
    CONTRADICTION_CUES,
    DEFAULT_SEED,
    ENTAILMENT_CUES,
    EXEMPLAR_DIR,
    LEXICAL_K,
    MAX_OUTPUT_TOKENS,
    MAX_PROMPT_TOKENS,
    PROGRAM_REL_TOL,
    STATUTE_DIR,
    TEMPERATURE,
    VALIDATION_SIZE,
)
from .errors import BackendError, ConfigError, DataError, SemiQAError
from .evaluation import EvalReport, FinQAOutcome, SaraOutcome, score_finqa, score_sara
from .finqa import (
    FactMode,
    FinQuestion,
    FinReport,
    load_corpus,
    load_precomputed,
    render_facts,
    retrieve_facts,
)
from .llm import BackendConfig, BackendExhausted, BackendKind, CompletionRequest, Gateway
from .prompting import (
    BuiltPrompt,
    PromptConfig,
    PromptMode,
    Template,
    build_prompt,
    load_exemplar_bank,
)
from .retrieval import NoCitationsFound, RetrievalStrategy, render_context, retrieve
from .sara import SaraCase, load_sara_cases
from .statute import ParsedStatute, load_statute_corpus

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.ini"
CASES_FILE = "cases.jsonl"
REPORT_FILE = "report.json"

# Retrieval strategy that passes the case facts without any statute text
NO_RETRIEVAL = "none"
DEFAULT_STOP = ("###",)

CONFIG_KEYS = {
    "run": ("task", "split", "sample_n", "seed", "ids_file", "output_dir"),
    "data": ("statute_dir", "cases", "corpus", "exemplars", "precomputed"),
    "retrieval": ("strategy", "fact_mode", "k", "uncited"),
    "prompt": (
        "mode",
        "n_exemplars",
        "template",
        "max_prompt_tokens",
        "max_output_tokens",
        "temperature",
        "stop",
    ),
    "backend": (
        "kind",
        "endpoint_url",
        "model_id",
        "auth_env_var",
        "timeout_s",
        "max_retries",
        "max_parallel",
        "fixture",
        "retry_base_s",
        "cache_dir",
    ),
    "scoring": ("rel_tol", "program_rel_tol", "entailment_cues", "contradiction_cues"),
}


class Task(StrEnum):
    SARA = "sara"
    FINQA = "finqa"


class Split(StrEnum):
    VALIDATION = "validation"
    TEST = "test"
    ALL = "all"


class Uncited(StrEnum):
    """What a SARA case without any section citation gets."""

    FAIL = "fail"
    FACTS_ONLY = "facts-only"


class NTooLarge(ConfigError):
    pass


class CorruptRunDir(DataError):
    pass


@dataclass(frozen=True)
class RunConfig:
    task: Task
    output_dir: Path
    backend: BackendConfig
    mode: PromptMode = PromptMode.COT
    split: Split = Split.ALL
    sample_n: int | None = None
    seed: int | None = None
    ids_file: Path | None = None
    statute_dir: Path = STATUTE_DIR
    cases: Path | None = None
    corpus: Path | None = None
    exemplars: Path | None = None
    precomputed: Path | None = None
    strategy: str = RetrievalStrategy.REFERENCES
    fact_mode: FactMode = FactMode.GOLD
    k: int = LEXICAL_K
    uncited: Uncited = Uncited.FAIL
    n_exemplars: int | None = None
    template: Template | None = None
    max_prompt_tokens: int = MAX_PROMPT_TOKENS
    max_output_tokens: int = MAX_OUTPUT_TOKENS
    temperature: float = TEMPERATURE
    stop: tuple[str, ...] = DEFAULT_STOP
    rel_tol: float = ANSWER_REL_TOL
    program_rel_tol: float = PROGRAM_REL_TOL
    entailment_cues: tuple[str, ...] = ENTAILMENT_CUES
    contradiction_cues: tuple[str, ...] = CONTRADICTION_CUES

    def __post_init__(self):
        if self.template is None:
            object.__setattr__(self, "template", Template(self.task))
        if self.exemplars is None:
            object.__setattr__(self, "exemplars", EXEMPLAR_DIR / f"{self.task}.jsonl")
        if self.sample_n is not None and self.seed is None:
            raise ConfigError("[run] seed is required when sample_n is set")
        if self.sample_n is not None and self.sample_n < 1:
            raise ConfigError(f"[run] sample_n must be >= 1, got {self.sample_n}")
        if self.task == Task.SARA and self.cases is None:
            raise ConfigError("[data] cases is required for the sara task")
        if self.task == Task.FINQA and self.corpus is None:
            raise ConfigError("[data] corpus is required for the finqa task")
        if self.k < 1:
            raise ConfigError(f"[retrieval] k must be >= 1, got {self.k}")

    @property
    def cases_path(self) -> Path:
        return self.output_dir / CASES_FILE


# Config file


class _Reader:
    """Typed access to one parsed INI file; errors name the section and key."""

    def __init__(self, parser: configparser.ConfigParser, base: Path):
        self.parser = parser
        self.base = base

    def raw(self, section: str, key: str) -> str | None:
        value = self.parser.get(section, key, fallback=None)
        if value is None or not value.strip():
            return None
        return value.strip()

    def fail(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(f"[{section}] {key}: {message}")

    def text(self, section, key, default=None):
        value = self.raw(section, key)
        return default if value is None else value

    def integer(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise self.fail(section, key, f"expected an integer, got {value!r}") from None

    def number(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise self.fail(section, key, f"expected a number, got {value!r}") from None

    def choice(self, section, key, enum, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return enum(value)
        except ValueError:
            choices = ", ".join(e.value for e in enum)
            raise self.fail(section, key, f"{value!r} is not one of {choices}") from None

    def path(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        path = Path(value).expanduser()
        return path if path.is_absolute() else (self.base / path).resolve()

    def words(self, section, key, default=()):
        value = self.raw(section, key)
        if value is None:
            return tuple(default)
        return tuple(w.strip() for w in value.split(",") if w.strip())

    def strings(self, section, key, default=()):
        """A JSON array of strings, for values that may hold commas or escapes."""
        value = self.raw(section, key)
        if value is None:
            return tuple(default)
        try:
            items = json.loads(value)
        except json.JSONDecodeError:
            raise self.fail(section, key, f"expected a JSON array of strings, got {value!r}") from None
        if not isinstance(items, list) or not all(isinstance(s, str) for s in items):
            raise self.fail(section, key, "expected a JSON array of strings")
        return tuple(items)


def _check_keys(parser: configparser.ConfigParser, path: Path):
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"{path}: unknown key [{section}] {key}")


def load_run_config(path: Path) -> RunConfig:
    """Read and validate an INI run config; relative paths resolve against its directory."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"config file not found: {path}")
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e
    _check_keys(parser, path)
    r = _Reader(parser, path.resolve().parent)

    task = r.choice("run", "task", Task)
    if task is None:
        raise ConfigError(f"{path}: [run] task is required")
    output_dir = r.path("run", "output_dir", r.base / "runs" / path.stem)

    kind = r.choice("backend", "kind", BackendKind)
    if kind is None:
        raise ConfigError(f"{path}: [backend] kind is required")
    backend_defaults = BackendConfig.__dataclass_fields__
    backend = BackendConfig(
        kind=kind,
        endpoint_url=r.text("backend", "endpoint_url", ""),
        model_id=r.text("backend", "model_id", ""),
        auth_env_var=r.text("backend", "auth_env_var", backend_defaults["auth_env_var"].default),
        timeout_s=r.number("backend", "timeout_s", backend_defaults["timeout_s"].default),
        max_retries=r.integer("backend", "max_retries", backend_defaults["max_retries"].default),
        max_parallel=r.integer("backend", "max_parallel", backend_defaults["max_parallel"].default),
        fixture=r.path("backend", "fixture"),
        retry_base_s=r.number("backend", "retry_base_s", backend_defaults["retry_base_s"].default),
        cache_dir=r.path("backend", "cache_dir", output_dir / "cache"),
    )

    strategy = r.text("retrieval", "strategy", RetrievalStrategy.REFERENCES.value)
    if strategy != NO_RETRIEVAL:
        strategy = r.choice("retrieval", "strategy", RetrievalStrategy, RetrievalStrategy.REFERENCES)

    return RunConfig(
        task=task,
        output_dir=output_dir,
        backend=backend,
        mode=r.choice("prompt", "mode", PromptMode, PromptMode.COT),
        split=r.choice("run", "split", Split, Split.ALL),
        sample_n=r.integer("run", "sample_n"),
        seed=r.integer("run", "seed"),
        ids_file=r.path("run", "ids_file"),
        statute_dir=r.path("data", "statute_dir", STATUTE_DIR),
        cases=r.path("data", "cases"),
        corpus=r.path("data", "corpus"),
        exemplars=r.path("data", "exemplars"),
        precomputed=r.path("data", "precomputed"),
        strategy=strategy,
        fact_mode=r.choice("retrieval", "fact_mode", FactMode, FactMode.GOLD),
        k=r.integer("retrieval", "k", LEXICAL_K),
        uncited=r.choice("retrieval", "uncited", Uncited, Uncited.FAIL),
        n_exemplars=r.integer("prompt", "n_exemplars"),
        template=r.choice("prompt", "template", Template),
        max_prompt_tokens=r.integer("prompt", "max_prompt_tokens", MAX_PROMPT_TOKENS),
        max_output_tokens=r.integer("prompt", "max_output_tokens", MAX_OUTPUT_TOKENS),
        temperature=r.number("prompt", "temperature", TEMPERATURE),
        stop=r.strings("prompt", "stop", DEFAULT_STOP),
        rel_tol=r.number("scoring", "rel_tol", ANSWER_REL_TOL),
        program_rel_tol=r.number("scoring", "program_rel_tol", PROGRAM_REL_TOL),
        entailment_cues=r.words("scoring", "entailment_cues", ENTAILMENT_CUES),
        contradiction_cues=r.words("scoring", "contradiction_cues", CONTRADICTION_CUES),
    )


def _ini_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ", ".join(value)
    return str(value)


def render_config(config: RunConfig) -> str:
    """Fully resolved INI rendering, stored as the run directory snapshot."""
    b = config.backend
    sections = {
        "run": {
            "task": config.task,
            "split": config.split,
            "sample_n": config.sample_n,
            "seed": config.seed,
            "ids_file": config.ids_file,
            "output_dir": config.output_dir,
        },
        "data": {
            "statute_dir": config.statute_dir,
            "cases": config.cases,
            "corpus": config.corpus,
            "exemplars": config.exemplars,
            "precomputed": config.precomputed,
        },
        "retrieval": {
            "strategy": config.strategy,
            "fact_mode": config.fact_mode,
            "k": config.k,
            "uncited": config.uncited,
        },
        "prompt": {
            "mode": config.mode,
            "n_exemplars": config.n_exemplars,
            "template": config.template,
            "max_prompt_tokens": config.max_prompt_tokens,
            "max_output_tokens": config.max_output_tokens,
            "temperature": config.temperature,
            "stop": json.dumps(list(config.stop)),
        },
        "backend": {
            "kind": b.kind,
            "endpoint_url": b.endpoint_url,
            "model_id": b.model_id,
            "auth_env_var": b.auth_env_var,
            "timeout_s": b.timeout_s,
            "max_retries": b.max_retries,
            "max_parallel": b.max_parallel,
            "fixture": b.fixture,
            "retry_base_s": b.retry_base_s,
            "cache_dir": b.cache_dir,
        },
        "scoring": {
            "rel_tol": config.rel_tol,
            "program_rel_tol": config.program_rel_tol,
            "entailment_cues": config.entailment_cues,
            "contradiction_cues": config.contradiction_cues,
        },
    }
    parser = configparser.ConfigParser(interpolation=None)
    for name, values in sections.items():
        parser[name] = {key: _ini_value(value) for key, value in values.items()}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


# Case selection


def read_ids(path: Path) -> list[str]:
    """Case ids, one per line; blank lines and # comments are ignored."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise ConfigError(f"ids file not found: {path}") from e
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


def write_ids(path: Path, ids: list[str]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def sample_ids(ids: list[str], n: int, seed: int = DEFAULT_SEED) -> list[str]:
    """Uniform sample without replacement, deterministic for a seed, in sorted order."""
    if n < 0:
        raise ConfigError(f"sample size must be >= 0, got {n}")
    if n > len(ids):
        raise NTooLarge(f"cannot sample {n} cases from {len(ids)}")
    return sorted(random.Random(seed).sample(sorted(ids), n))


def split_ids(ids: list[str], split: Split) -> list[str]:
    """Validation is the first cases by sorted id; test is the rest."""
    ordered = sorted(ids)
    if split == Split.VALIDATION:
        return ordered[:VALIDATION_SIZE]
    if split == Split.TEST:
        return ordered[VALIDATION_SIZE:]
    return ordered


def select_ids(config: RunConfig, ids: list[str]) -> list[str]:
    selected = split_ids(ids, config.split)
    if config.ids_file is not None:
        wanted = read_ids(config.ids_file)
        unknown = sorted(set(wanted) - set(ids))
        if unknown:
            raise DataError(f"{config.ids_file}: unknown case ids {', '.join(unknown[:5])}")
        wanted_set = set(wanted)
        selected = [i for i in selected if i in wanted_set]
    if config.sample_n is not None:
        selected = sample_ids(selected, config.sample_n, config.seed)
    return selected


# Inputs and prompts


@dataclass
class RunInputs:
    """Everything a run reads, loaded once and shared by the worker threads."""

    config: RunConfig
    prompt_config: PromptConfig
    sara_cases: dict[str, SaraCase] = field(default_factory=dict)
    statutes: dict[str, ParsedStatute] = field(default_factory=dict)
    finqa_pairs: dict[str, tuple[FinReport, FinQuestion]] = field(default_factory=dict)
    precomputed: dict | None = None

    @classmethod
    def load(cls, config: RunConfig) -> "RunInputs":
        bank = ()
        if config.mode != PromptMode.ZERO:
            if not config.exemplars.exists():
                raise ConfigError(f"exemplar bank not found: {config.exemplars}")
            bank = load_exemplar_bank(config.exemplars)
        prompt_config = PromptConfig(
            mode=config.mode,
            exemplar_bank=bank,
            n_exemplars=config.n_exemplars,
            template=config.template,
            max_prompt_tokens=config.max_prompt_tokens,
        )
        inputs = cls(config, prompt_config)
        if config.task == Task.SARA:
            inputs.sara_cases = {c.id: c for c in load_sara_cases(config.cases)}
            if config.strategy != NO_RETRIEVAL:
                inputs.statutes = load_statute_corpus(config.statute_dir)
        else:
            if not config.corpus.exists():
                raise ConfigError(f"FinQA corpus not found: {config.corpus}")
            inputs.finqa_pairs = {q.report_id: (r, q) for r, q in load_corpus(config.corpus)}
            if config.fact_mode == FactMode.PRECOMPUTED:
                if config.precomputed is None:
                    raise ConfigError("[data] precomputed is required for fact_mode = precomputed")
                inputs.precomputed = load_precomputed(config.precomputed)
        return inputs

    def case_ids(self) -> list[str]:
        return sorted(self.sara_cases if self.config.task == Task.SARA else self.finqa_pairs)

    def gold(self, case_id: str) -> dict:
        if self.config.task == Task.SARA:
            return {"gold": self.sara_cases[case_id].gold}
        question = self.finqa_pairs[case_id][1]
        return {"gold": question.gold_answer, "gold_program": question.gold_program}

    def context(self, case_id: str) -> tuple[str, str]:
        """(context, question) for the test block of a case."""
        if case_id not in self.sara_cases and case_id not in self.finqa_pairs:
            raise DataError(f"unknown case id {case_id!r}")
        if self.config.task == Task.SARA:
            case = self.sara_cases[case_id]
            if self.config.strategy == NO_RETRIEVAL:
                return case.text, case.question
            citations = extract_citations(f"{case.text}\n{case.question}")
            try:
                retrieved = retrieve(self.statutes, citations, self.config.strategy)
            except NoCitationsFound:
                if self.config.uncited != Uncited.FACTS_ONLY:
                    raise
                logger.warning("case %s cites no section, prompting with the facts only", case_id)
                return case.text, case.question
            statutes = render_context(retrieved.sentences)
            return (f"{statutes}\n\n{case.text}" if statutes else case.text), case.question

        report, question = self.finqa_pairs[case_id]
        facts = retrieve_facts(
            report, question, self.config.fact_mode, self.config.k, self.precomputed
        )
        return render_facts(report, facts), question.question

    def build(self, case_id: str) -> BuiltPrompt:
        context, question = self.context(case_id)
        return build_prompt(self.prompt_config, context, question)


def with_cue(cue: str, completion: str) -> str:
    """The text extraction runs on: the prompt's cue line plus the completion."""
    if not completion or completion[0].isspace():
        return cue + completion
    return f"{cue} {completion}"


# Run directory


def load_case_records(run_dir: Path, strict: bool = True) -> dict[str, dict]:
    """Latest record per case id; later lines supersede earlier ones.

    With strict=False a corrupt line (an interrupted append) is skipped.
    """
    path = Path(run_dir) / CASES_FILE
    if not path.exists():
        if strict:
            raise CorruptRunDir(f"{run_dir}: no {CASES_FILE}")
        return {}
    records: dict[str, dict] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                case_id = record["id"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                if strict:
                    raise CorruptRunDir(f"{path}:{lineno}: corrupt case record ({e})") from e
                logger.warning("skipping corrupt case record %s:%d", path, lineno)
                continue
            records[case_id] = record
    return records


def prepare_run_dir(config: RunConfig) -> dict[str, dict]:
    """Create or reopen a run directory and return the records already stored."""
    run_dir = config.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = render_config(config)
    snapshot_path = run_dir / CONFIG_FILE
    records = load_case_records(run_dir, strict=False)
    if snapshot_path.exists() and records:
        if snapshot_path.read_text(encoding="utf-8") != snapshot:
            raise ConfigError(
                f"{run_dir} holds records from a different config; use a new output_dir"
            )
    snapshot_path.write_text(snapshot, encoding="utf-8")
    return records


def _case_record(inputs: RunInputs, gateway: Gateway, case_id: str) -> dict:
    config = inputs.config
    record = {"id": case_id, **inputs.gold(case_id), "prompt": "", "cue": "", "completion": None}
    try:
        prompt = inputs.build(case_id)
        record.update(prompt=prompt.text, cue=prompt.cue, exemplar_ids=list(prompt.exemplar_ids))
        result = gateway.complete(
            CompletionRequest(
                prompt.text,
                config.max_output_tokens,
                config.temperature,
                config.stop,
                config.backend.model_id,
            )
        )
    except BackendExhausted as e:
        logger.error("case %s: %s", case_id, e)
        record.update(error=str(e), error_kind="backend")
        return record
    except ConfigError:
        raise
    except SemiQAError as e:
        logger.warning("case %s: %s", case_id, e)
        record.update(error=str(e), error_kind=type(e).__name__)
        return record
    if result.finish_reason == "length":
        logger.warning("case %s: completion hit max_output_tokens", case_id)
    record.update(
        completion=result.text,
        finish_reason=result.finish_reason,
        cached=result.cached,
        latency_ms=result.latency_ms,
    )
    return record


def _outcomes(inputs: RunInputs, records: list[dict]):
    out = []
    for record in records:
        completion = record.get("completion")
        if completion is not None:
            completion = with_cue(record.get("cue", ""), completion)
        if inputs.config.task == Task.SARA:
            out.append(
                SaraOutcome(
                    record["id"],
                    record["gold"],
                    completion,
                    record.get("prompt", ""),
                    record.get("error"),
                )
            )
            continue
        if record["id"] not in inputs.finqa_pairs:
            raise CorruptRunDir(f"case {record['id']!r} is not in {inputs.config.corpus}")
        report, question = inputs.finqa_pairs[record["id"]]
        prompt, error = record.get("prompt", ""), record.get("error")
        out.append(FinQAOutcome(question, report, completion, prompt, error))
    return out


def score_records(inputs: RunInputs, records: list[dict]) -> EvalReport:
    config = inputs.config
    outcomes = _outcomes(inputs, records)
    if config.task == Task.SARA:
        return score_sara(outcomes, config.entailment_cues, config.contradiction_cues)
    return score_finqa(outcomes, config.rel_tol, config.program_rel_tol)


def write_report(run_dir: Path, report: EvalReport) -> Path:
    path = Path(run_dir) / REPORT_FILE
    path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


@dataclass(frozen=True)
class RunResult:
    run_dir: Path
    report: EvalReport
    backend_calls: int
    backend_failures: int


def cmd_run(config: RunConfig, quiet: bool = False, gateway: Gateway | None = None) -> RunResult:
    """Prompt the model for every selected case, then score and write report.json.

    Cases with a stored record are skipped, except those that failed on the
    backend, so an interrupted run resumes where it stopped.
    """
    inputs = RunInputs.load(config)
    selected = select_ids(config, inputs.case_ids())
    if not selected:
        raise ConfigError("no cases selected")
    stored = prepare_run_dir(config)
    pending = [
        case_id
        for case_id in selected
        if case_id not in stored or stored[case_id].get("error_kind") == "backend"
    ]
    logger.info("%d cases selected, %d to run", len(selected), len(pending))

    own_gateway = gateway is None
    if own_gateway:
        gateway = Gateway(config.backend)
    write_lock = threading.Lock()
    try:
        with (
            ThreadPoolExecutor(max_workers=config.backend.max_parallel) as pool,
            open(config.cases_path, "a", encoding="utf-8") as out,
            tqdm(total=len(pending), desc=f"{config.task} cases", unit="case", disable=quiet) as bar,
        ):
            futures = {pool.submit(_case_record, inputs, gateway, case_id): case_id for case_id in pending}
            for future in as_completed(futures):
                record = future.result()
                with write_lock:
                    out.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
                    out.flush()
                stored[record["id"]] = record
                bar.update(1)
    finally:
        if own_gateway:
            gateway.close()

    records = [stored[case_id] for case_id in selected]
    failures = sum(1 for r in records if r.get("error_kind") == "backend")
    report = score_records(inputs, records)
    write_report(config.output_dir, report)
    return RunResult(config.output_dir, report, gateway.calls, failures)


def cmd_eval(run_dir: Path) -> EvalReport:
    """Re-score the stored records of a run directory without calling the backend."""
    run_dir = Path(run_dir)
    snapshot = run_dir / CONFIG_FILE
    if not snapshot.exists():
        raise CorruptRunDir(f"{run_dir}: no {CONFIG_FILE}, not a run directory")
    config = load_run_config(snapshot)
    records = load_case_records(run_dir)
    if not records:
        raise CorruptRunDir(f"{run_dir}: no case records")
    for case_id, record in records.items():
        if config.task == Task.SARA and "gold" not in record:
            raise CorruptRunDir(f"{run_dir}: record {case_id!r} has no gold label")
    inputs = RunInputs.load(config)
    return score_records(inputs, [records[i] for i in sorted(records)])


def backend_error_exit(result: RunResult) -> int:
    """Exit code for a finished run: 2 when any case exhausted the backend."""
    return BackendError.exit_code if result.backend_failures else 0
