"""Scoring: SARA verdict accuracy, FinQA program/answer accuracy, 90% confidence margins."""

import csv
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from pathlib import Path

from .config import (
    ANSWER_REL_TOL,
    CONTRADICTION_CUES,
    ENTAILMENT_CUES,
    PROGRAM_REL_TOL,
    Z_90,
)
from .errors import DataError
from .finqa import FinQuestion, FinReport
from .program import compare_programs
from .prompting import NoAnswerFound, NoVerdictFound, extract_finqa_answer, extract_sara_verdict

logger = logging.getLogger(__name__)

ANNOTATION_COLUMNS = [
    "case_id",
    "gold",
    "predicted",
    "verdict",
    "failure_reason",
    "prompt",
    "completion",
    "category",
    "notes",
]

BOOLEAN_WORDS = {"yes": True, "true": True, "no": False, "false": False}

# Accounting negatives: "(5.2)%" and "(5.2%)" read as -5.2%
_ANSWER_NUMBER_RE = re.compile(
    r"(-)?\s*(\()?\s*[$€£]?\s*(\d[\d,]*(?:\.\d+)?|\.\d+)\s*(%)?\s*(?(2)\))\s*(%)?"
)


class FileWriteError(DataError):
    pass


class CaseVerdict(StrEnum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    EXTRACTION_FAILED = "extraction_failed"


@dataclass(frozen=True)
class EvalRecord:
    case_id: str
    gold: str
    predicted: str
    raw_completion: str
    verdict: CaseVerdict
    failure_reason: str | None = None
    prompt: str = ""
    program: str | None = None
    program_correct: bool | None = None
    answer_correct: bool | None = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["verdict"] = str(self.verdict)
        return data


@dataclass(frozen=True)
class EvalReport:
    task: str
    n: int
    accuracy: float
    program_accuracy: float | None = None
    answer_accuracy: float | None = None
    ci90: dict[str, float] = field(default_factory=dict)
    records: tuple[EvalRecord, ...] = ()

    def summary(self) -> dict:
        return {
            "task": self.task,
            "n": self.n,
            "accuracy": self.accuracy,
            "program_accuracy": self.program_accuracy,
            "answer_accuracy": self.answer_accuracy,
            "ci90": dict(sorted(self.ci90.items())),
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "records": [r.to_dict() for r in self.records]}


@dataclass(frozen=True)
class SaraOutcome:
    """One SARA case as the pipeline saw it."""

    case_id: str
    gold: str
    completion: str | None
    prompt: str = ""
    error: str | None = None


@dataclass(frozen=True)
class FinQAOutcome:
    question: FinQuestion
    report: FinReport
    completion: str | None
    prompt: str = ""
    error: str | None = None


def ci90(p_hat: float, n: int) -> float:
    """Normal-approximation 90% margin: z * sqrt(p(1-p)/n)."""
    if not 0 <= p_hat <= 1:
        raise ValueError(f"p_hat must be in [0, 1], got {p_hat}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Z_90 * math.sqrt(p_hat * (1 - p_hat) / n)


def infer_sample_size(p_hat: float, margin: float) -> float:
    """The n for which ci90(p_hat, n) equals margin."""
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    return Z_90**2 * p_hat * (1 - p_hat) / margin**2


def _parse_answer(text: str) -> tuple[float, bool, int] | None:
    """(value, had percent sign, decimal places) of the first number in text."""
    match = _ANSWER_NUMBER_RE.search(text.replace("−", "-"))
    if not match:
        return None
    minus, paren, digits, inner_pct, outer_pct = match.groups()
    digits = digits.replace(",", "")
    value = float(digits)
    if minus or paren:
        value = -value
    decimals = len(digits.split(".", 1)[1]) if "." in digits else 0
    return value, bool(inner_pct or outer_pct), decimals


def _scales(value: float, percent: bool, decimals: int) -> list[tuple[float, int]]:
    if percent:
        return [(value, decimals), (value / 100, decimals + 2)]
    return [(value, decimals)]


def _numbers_match(a: float, a_dec: int, b: float, b_dec: int, rel_tol: float) -> bool:
    places = min(a_dec, b_dec)
    if round(a, places) == round(b, places):
        return True
    scale = max(abs(a), abs(b))
    return scale > 0 and abs(a - b) / scale <= rel_tol


def answers_match(candidate: str, gold: str, rel_tol: float = ANSWER_REL_TOL) -> bool:
    """Compare answers forgiving units, prefixes, suffixes, precision and percent scale."""
    cand_word = candidate.strip().strip(".").casefold()
    gold_word = gold.strip().strip(".").casefold()
    if cand_word in BOOLEAN_WORDS or gold_word in BOOLEAN_WORDS:
        return (
            cand_word in BOOLEAN_WORDS
            and gold_word in BOOLEAN_WORDS
            and BOOLEAN_WORDS[cand_word] == BOOLEAN_WORDS[gold_word]
        )

    parsed_cand = _parse_answer(candidate)
    parsed_gold = _parse_answer(gold)
    if parsed_cand is None or parsed_gold is None:
        return False
    if parsed_cand[1] == parsed_gold[1]:
        # Same scale on both sides: compare the printed values
        return _numbers_match(parsed_cand[0], parsed_cand[2], parsed_gold[0], parsed_gold[2], rel_tol)
    return any(
        _numbers_match(a, a_dec, b, b_dec, rel_tol)
        for a, a_dec in _scales(*parsed_cand)
        for b, b_dec in _scales(*parsed_gold)
    )


def _fraction(flags: list[bool]) -> float:
    return sum(flags) / len(flags)


def _margins(n: int, **accuracies: float | None) -> dict[str, float]:
    return {name: ci90(value, n) for name, value in accuracies.items() if value is not None}


def score_sara(
    cases: list[SaraOutcome],
    entailment_cues=ENTAILMENT_CUES,
    contradiction_cues=CONTRADICTION_CUES,
) -> EvalReport:
    """Binary verdict accuracy; extraction failures count as incorrect."""
    if not cases:
        raise DataError("nothing to score")
    records = []
    for case in cases:
        if case.error is not None or case.completion is None:
            records.append(
                EvalRecord(
                    case.case_id,
                    case.gold,
                    "",
                    case.completion or "",
                    CaseVerdict.INCORRECT,
                    case.error or "no completion",
                    case.prompt,
                )
            )
            continue
        try:
            predicted = str(
                extract_sara_verdict(case.completion, entailment_cues, contradiction_cues)
            )
        except NoVerdictFound as e:
            records.append(
                EvalRecord(
                    case.case_id,
                    case.gold,
                    "",
                    case.completion,
                    CaseVerdict.EXTRACTION_FAILED,
                    str(e),
                    case.prompt,
                )
            )
            continue
        correct = predicted.casefold() == case.gold.casefold()
        records.append(
            EvalRecord(
                case.case_id,
                case.gold,
                predicted,
                case.completion,
                CaseVerdict.CORRECT if correct else CaseVerdict.INCORRECT,
                None if correct else f"predicted {predicted}, gold {case.gold}",
                case.prompt,
            )
        )

    records.sort(key=lambda r: r.case_id)
    accuracy = _fraction([r.verdict == CaseVerdict.CORRECT for r in records])
    return EvalReport(
        "sara",
        len(records),
        accuracy,
        ci90=_margins(len(records), accuracy=accuracy),
        records=tuple(records),
    )


def _score_finqa_case(case: FinQAOutcome, rel_tol: float, program_rel_tol: float) -> EvalRecord:
    question = case.question
    case_id = question.report_id
    if case.error is not None or case.completion is None:
        return EvalRecord(
            case_id,
            question.gold_answer,
            "",
            case.completion or "",
            CaseVerdict.INCORRECT,
            case.error or "no completion",
            case.prompt,
            program_correct=False,
            answer_correct=False,
        )
    try:
        answer, program = extract_finqa_answer(case.completion)
    except NoAnswerFound as e:
        return EvalRecord(
            case_id,
            question.gold_answer,
            "",
            case.completion,
            CaseVerdict.EXTRACTION_FAILED,
            str(e),
            case.prompt,
            program_correct=False,
            answer_correct=False,
        )

    reasons = []
    if program is None:
        program_correct = False
        reasons.append("program: none in completion")
    else:
        program_correct, reason = compare_programs(
            program, question.gold_program, case.report, program_rel_tol
        )
        if reason:
            reasons.append(f"program: {reason}")

    # Answer accuracy is over the stated answer only, never the program value
    answer_correct = answer is not None and answers_match(answer, question.gold_answer, rel_tol)
    if answer is None:
        reasons.append("answer: none in completion")
    elif not answer_correct:
        reasons.append(f"answer: {answer!r} does not match {question.gold_answer!r}")

    return EvalRecord(
        case_id,
        question.gold_answer,
        answer or "",
        case.completion,
        CaseVerdict.CORRECT if program_correct else CaseVerdict.INCORRECT,
        "; ".join(reasons) or None,
        case.prompt,
        program=program,
        program_correct=program_correct,
        answer_correct=answer_correct,
    )


def score_finqa(
    cases: list[FinQAOutcome],
    rel_tol: float = ANSWER_REL_TOL,
    program_rel_tol: float = PROGRAM_REL_TOL,
) -> EvalReport:
    """Program accuracy (the headline accuracy) and answer accuracy."""
    if not cases:
        raise DataError("nothing to score")
    records = sorted(
        (_score_finqa_case(case, rel_tol, program_rel_tol) for case in cases),
        key=lambda r: r.case_id,
    )
    program_accuracy = _fraction([bool(r.program_correct) for r in records])
    answer_accuracy = _fraction([bool(r.answer_correct) for r in records])
    n = len(records)
    return EvalReport(
        "finqa",
        n,
        program_accuracy,
        program_accuracy,
        answer_accuracy,
        _margins(
            n,
            accuracy=program_accuracy,
            program_accuracy=program_accuracy,
            answer_accuracy=answer_accuracy,
        ),
        tuple(records),
    )


def dump_for_annotation(report: EvalReport, path: Path) -> int:
    """Write every non-correct case to a CSV with empty category/notes columns."""
    path = Path(path)
    rows = [r for r in report.records if r.verdict != CaseVerdict.CORRECT]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=ANNOTATION_COLUMNS)
            writer.writeheader()
            for record in rows:
                writer.writerow(
                    {
                        "case_id": record.case_id,
                        "gold": record.gold,
                        "predicted": record.predicted,
                        "verdict": str(record.verdict),
                        "failure_reason": record.failure_reason or "",
                        "prompt": record.prompt,
                        "completion": record.raw_completion,
                        "category": "",
                        "notes": "",
                    }
                )
    except OSError as e:
        raise FileWriteError(f"cannot write {path}: {e}") from e
    logger.info("wrote %d annotation rows to %s", len(rows), path)
    return len(rows)


def _cell(value: float | None, margin: float | None) -> str:
    if value is None:
        return "-"
    return f"{100 * value:.2f} ± {100 * (margin or 0.0):.2f}"


def format_report_table(reports: list[tuple[str, EvalReport]]) -> str:
    """Console table of (label, report) rows with "value ± margin" cells in percent."""
    header = ("run", "task", "n", "accuracy", "program acc.", "answer acc.")
    rows = [
        (
            label,
            report.task,
            str(report.n),
            _cell(report.accuracy, report.ci90.get("accuracy")),
            _cell(report.program_accuracy, report.ci90.get("program_accuracy")),
            _cell(report.answer_accuracy, report.ci90.get("answer_accuracy")),
        )
        for label, report in reports
    ]
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
