"""FinQA reports: ingestion, fact selection and table serialization."""

import json
import logging
import re
from collections.abc import Iterable
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

from .config import LEXICAL_K
from .errors import ConfigError, DataError
from .utils import is_number_token, read_jsonl, tokenize, write_jsonl

logger = logging.getLogger(__name__)

GOLD_FACT_RE = re.compile(r"^(text|table)_(\d+)$")


class SchemaMismatch(DataError):
    """A dataset entry or record missing a required field."""


class EmptyTable(DataError):
    """A report without any table cell."""


class MissingPrecomputed(DataError):
    """A question id absent from the precomputed retrieval file."""


class IndexOutOfBounds(DataError):
    """A fact reference outside its report."""


class FactKind(StrEnum):
    TEXT = "text"
    ROW = "row"


class FactMode(StrEnum):
    GOLD = "gold"
    PRECOMPUTED = "precomputed"
    LEXICAL = "lexical"


@dataclass(frozen=True)
class FactRef:
    kind: FactKind
    index: int

    def to_dict(self) -> dict:
        return {"kind": str(self.kind), "index": self.index}

    @classmethod
    def from_dict(cls, data: dict) -> "FactRef":
        return cls(FactKind(data["kind"]), int(data["index"]))


@dataclass(frozen=True)
class FinReport:
    id: str
    pre_text: tuple[str, ...]
    post_text: tuple[str, ...]
    table: tuple[tuple[str, ...], ...]

    @property
    def sentences(self) -> tuple[str, ...]:
        return self.pre_text + self.post_text

    def fact_text(self, fact: FactRef) -> str:
        check_fact(self, fact)
        if fact.kind == FactKind.TEXT:
            return self.sentences[fact.index]
        return " ".join(self.table[fact.index])


@dataclass(frozen=True)
class FinQuestion:
    report_id: str
    question: str
    gold_program: str
    gold_answer: str
    gold_facts: tuple[FactRef, ...] = ()


Pair = tuple[FinReport, FinQuestion]


def check_fact(report: FinReport, fact: FactRef):
    if fact.kind == FactKind.TEXT:
        if not 0 <= fact.index < len(report.sentences):
            raise IndexOutOfBounds(
                f"{report.id}: text fact {fact.index} out of range ({len(report.sentences)} sentences)"
            )
    elif not 1 <= fact.index < len(report.table):
        raise IndexOutOfBounds(
            f"{report.id}: row fact {fact.index} out of range (rows 1..{len(report.table) - 1})"
        )


def pad_table(table: list[list]) -> tuple[tuple[str, ...], ...]:
    """Pad short rows with empty cells so the table is rectangular."""
    width = max((len(row) for row in table), default=0)
    return tuple(tuple(str(c) for c in row) + ("",) * (width - len(row)) for row in table)


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise SchemaMismatch(f"{where}: missing field {key!r}")
    return entry[key]


def _gold_facts(gold_inds, report: FinReport, where: str) -> tuple[FactRef, ...]:
    facts = []
    for key in gold_inds or {}:
        match = GOLD_FACT_RE.match(key)
        if not match:
            raise SchemaMismatch(f"{where}: unrecognized gold fact {key!r}")
        kind, index = match.group(1), int(match.group(2))
        if kind == "table" and index == 0:
            logger.warning("%s: gold fact table_0 is the header row, skipping", where)
            continue
        fact = FactRef(FactKind.TEXT if kind == "text" else FactKind.ROW, index)
        try:
            check_fact(report, fact)
        except IndexOutOfBounds as e:
            raise SchemaMismatch(f"{where}: {e}") from e
        facts.append(fact)
    return tuple(facts)


def _gold_answer(qa: dict) -> str:
    answer = qa.get("answer")
    if answer not in (None, ""):
        return str(answer)
    if "exe_ans" in qa:
        return str(qa["exe_ans"])
    return ""


def parse_entry(entry: dict, index: int) -> list[Pair]:
    """Pairs for one raw FinQA entry (single "qa" block or numbered "qa_0", "qa_1", ...)."""
    where = f"entry {index}"
    report_id = str(_require(entry, "id", where))
    where = f"entry {index} ({report_id})"
    table = pad_table(_require(entry, "table", where))
    if not any(cell.strip() for row in table for cell in row):
        raise EmptyTable(f"{where}: empty table")
    report = FinReport(
        report_id,
        tuple(_require(entry, "pre_text", where)),
        tuple(_require(entry, "post_text", where)),
        table,
    )

    if "qa" in entry:
        blocks = [(report_id, entry["qa"])]
    else:
        blocks = [(f"{report_id}#{i}", entry[f"qa_{i}"]) for i in range(len(entry)) if f"qa_{i}" in entry]
    if not blocks:
        raise SchemaMismatch(f"{where}: missing field 'qa'")

    pairs = []
    for qid, qa in blocks:
        if qid != report_id:
            report = FinReport(qid, report.pre_text, report.post_text, report.table)
        question = FinQuestion(
            report_id=qid,
            question=_require(qa, "question", where),
            gold_program=_require(qa, "program", where),
            gold_answer=_gold_answer(qa),
            gold_facts=_gold_facts(qa.get("gold_inds"), report, where),
        )
        pairs.append((report, question))
    return pairs


def ingest_finqa(path: Path) -> list[Pair]:
    """Read the public FinQA JSON array layout."""
    try:
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path}: not valid JSON ({e})") from e
    if not isinstance(entries, list):
        raise SchemaMismatch(f"{path}: expected a JSON array of entries")

    pairs: list[Pair] = []
    seen = set()
    for index, entry in enumerate(entries):
        for report, question in parse_entry(entry, index):
            if report.id in seen:
                raise SchemaMismatch(f"entry {index}: duplicate id {report.id!r}")
            seen.add(report.id)
            pairs.append((report, question))
    logger.info("ingested %d questions from %s", len(pairs), path)
    return pairs


def to_record(report: FinReport, question: FinQuestion) -> dict:
    return {
        "id": report.id,
        "pre_text": list(report.pre_text),
        "post_text": list(report.post_text),
        "table": [list(row) for row in report.table],
        "question": question.question,
        "program": question.gold_program,
        "answer": question.gold_answer,
        "gold_facts": [f.to_dict() for f in question.gold_facts],
    }


def from_record(record: dict, where: str) -> Pair:
    try:
        report = FinReport(
            record["id"],
            tuple(record["pre_text"]),
            tuple(record["post_text"]),
            pad_table(record["table"]),
        )
        question = FinQuestion(
            report.id,
            record["question"],
            record["program"],
            record["answer"],
            tuple(FactRef.from_dict(f) for f in record.get("gold_facts", [])),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaMismatch(f"{where}: bad record ({e})") from e
    for fact in question.gold_facts:
        check_fact(report, fact)
    return report, question


def save_corpus(path: Path, pairs: Iterable[Pair]) -> int:
    return write_jsonl(path, (to_record(r, q) for r, q in pairs))


def load_corpus(path: Path) -> list[Pair]:
    """Load the internal JSONL corpus, or a raw FinQA .json array."""
    path = Path(path)
    if path.suffix == ".json":
        return ingest_finqa(path)
    try:
        return [from_record(record, f"{path}:{lineno}") for lineno, record in read_jsonl(path)]
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path}: invalid JSON line ({e})") from e


def load_precomputed(path: Path) -> dict[str, tuple[FactRef, ...]]:
    """Side file of externally retrieved facts: {"qid": ..., "facts": [{"kind", "index"}]}."""
    out = {}
    try:
        for lineno, record in read_jsonl(path):
            try:
                out[str(record["qid"])] = tuple(FactRef.from_dict(f) for f in record["facts"])
            except (KeyError, ValueError, TypeError) as e:
                raise SchemaMismatch(f"{path}:{lineno}: bad record ({e})") from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"{path}: invalid JSON line ({e})") from e
    return out


def _overlap(question_tokens: set[str], text: str) -> int:
    shared = question_tokens & set(tokenize(text))
    return sum(2 if is_number_token(t) else 1 for t in shared)


def lexical_facts(report: FinReport, question: str, k: int = LEXICAL_K) -> list[FactRef]:
    """Top-k facts by token overlap with the question; numbers count double.

    Ties keep candidate order: sentences by index, then table rows by index.
    Always returns min(k, number of facts), even when nothing overlaps.
    """
    if k < 1:
        raise ConfigError(f"lexical retrieval needs k >= 1, got {k}")
    q = set(tokenize(question))
    candidates = [FactRef(FactKind.TEXT, i) for i in range(len(report.sentences))]
    candidates += [FactRef(FactKind.ROW, i) for i in range(1, len(report.table))]
    scored = [(_overlap(q, report.fact_text(f)), f) for f in candidates]
    ranked = sorted(scored, key=lambda item: -item[0])
    return [f for _, f in ranked[:k]]


def retrieve_facts(
    report: FinReport,
    question: FinQuestion,
    mode: FactMode,
    k: int = LEXICAL_K,
    precomputed: dict[str, tuple[FactRef, ...]] | None = None,
) -> list[FactRef]:
    mode = FactMode(mode)
    if mode == FactMode.GOLD:
        return list(question.gold_facts)
    if mode == FactMode.PRECOMPUTED:
        if precomputed is None:
            raise ConfigError("precomputed fact mode requires [data] precomputed")
        if question.report_id not in precomputed:
            raise MissingPrecomputed(f"{question.report_id} is not in the precomputed retrieval file")
        return list(precomputed[question.report_id])
    return lexical_facts(report, question.question, k)


def serialize_table(table) -> str:
    """One line per row, cells joined by " | "."""
    return "\n".join(" | ".join(row) for row in table)


def render_facts(report: FinReport, facts: list[FactRef]) -> str:
    """Text facts in index order, then the header plus the selected table rows."""
    for fact in facts:
        check_fact(report, fact)
    texts = sorted({f.index for f in facts if f.kind == FactKind.TEXT})
    rows = sorted({f.index for f in facts if f.kind == FactKind.ROW})
    blocks = []
    if texts:
        blocks.append("\n".join(report.sentences[i] for i in texts))
    if rows:
        blocks.append(serialize_table([report.table[0]] + [report.table[i] for i in rows]))
    return "\n\n".join(blocks)
