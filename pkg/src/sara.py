"""SARA dataset import: statute files and Prolog case files to normalized corpora."""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .statute import STATUTE_FILE_RE, parse_statute, statute_records
from .utils import collapse_whitespace, read_jsonl, section_sort_key, write_jsonl

logger = logging.getLogger(__name__)

EXPECTED_LAYOUT = """expected layout:
    <raw_dir>/statutes/section<N>[.txt]   statute text, one file per section
    <raw_dir>/cases/<id>.pl               case files with "% Text" and "% Question" blocks"""

GOLD_LABELS = ("Entailment", "Contradiction")
LABEL_RE = re.compile(r"\s+(Entailment|Contradiction)\.?\s*$")
AMOUNT_RE = re.compile(r"\s+(\$\s?\d[\d,]*(?:\.\d+)?)\.?\s*$")
BLOCK_RE = re.compile(r"^%\s*(Text|Question|Facts|Test)\s*$")


class MissingGoldLabel(DataError):
    pass


class UnparseableCase(DataError):
    pass


@dataclass(frozen=True)
class SaraCase:
    id: str
    text: str
    question: str
    gold: str

    def to_record(self) -> dict:
        return {"id": self.id, "text": self.text, "question": self.question, "gold": self.gold}


def _comment_blocks(source: str) -> dict[str, str]:
    """Text of the "% Text", "% Question", ... comment blocks of a case file."""
    blocks: dict[str, list[str]] = {}
    current = None
    for line in source.splitlines():
        stripped = line.strip()
        if match := BLOCK_RE.match(stripped):
            current = match.group(1)
            blocks[current] = []
        elif current and stripped.startswith("%"):
            blocks[current].append(stripped.lstrip("%").strip())
        elif not stripped:
            current = None
    return {name: collapse_whitespace(" ".join(lines)) for name, lines in blocks.items()}


def parse_case(source: str, case_id: str) -> SaraCase:
    """Case statement and gold label from one Prolog case file.

    The question block ends with the gold label. A dollar amount instead of a
    label is a tax-amount case, rewritten as a statement whose gold label is
    Entailment.
    """
    blocks = _comment_blocks(source)
    text = blocks.get("Text", "")
    question = blocks.get("Question", "")
    if not text or not question:
        missing = "Text" if not text else "Question"
        raise UnparseableCase(f"case {case_id}: no '% {missing}' block")

    if match := LABEL_RE.search(question):
        return SaraCase(case_id, text, question[: match.start()].strip(), match.group(1))
    if match := AMOUNT_RE.search(question):
        statement = question[: match.start()].strip()
        amount = match.group(1).replace(" ", "")
        return SaraCase(case_id, text, f"{statement} The amount is {amount}.", "Entailment")
    raise MissingGoldLabel(f"case {case_id}: question does not end with a gold label: {question!r}")


def import_sara(raw_dir: Path, out_dir: Path) -> tuple[int, int]:
    """Normalize a raw SARA tree into statutes/, statutes.jsonl and cases.jsonl.

    Returns (statute count, case count).
    """
    raw_dir, out_dir = Path(raw_dir), Path(out_dir)
    statute_dir, case_dir = raw_dir / "statutes", raw_dir / "cases"
    statute_files = (
        sorted(p for p in statute_dir.iterdir() if p.is_file() and STATUTE_FILE_RE.match(p.name))
        if statute_dir.is_dir()
        else []
    )
    case_files = sorted(case_dir.glob("*.pl")) if case_dir.is_dir() else []
    if not statute_files or not case_files:
        raise DataError(f"no SARA statutes or cases under {raw_dir}\n{EXPECTED_LAYOUT}")

    statutes = []
    out_statutes = out_dir / "statutes"
    out_statutes.mkdir(parents=True, exist_ok=True)
    for path in statute_files:
        number = STATUTE_FILE_RE.match(path.name).group(1)
        raw = path.read_text(encoding="utf-8")
        statutes.append(parse_statute(raw, number))
        (out_statutes / f"section{number}.txt").write_text(raw, encoding="utf-8")
    statutes.sort(key=lambda s: section_sort_key(s.section_number))
    write_jsonl(
        out_dir / "statutes.jsonl",
        (record for statute in statutes for record in statute_records(statute)),
    )

    cases = [parse_case(path.read_text(encoding="utf-8"), path.stem) for path in case_files]
    write_jsonl(out_dir / "cases.jsonl", (case.to_record() for case in cases))
    logger.info("imported %d statutes and %d cases from %s", len(statutes), len(cases), raw_dir)
    return len(statutes), len(cases)


def load_sara_cases(path: Path) -> list[SaraCase]:
    cases = []
    seen = set()
    try:
        records = list(read_jsonl(path))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON line ({e})") from e
    except FileNotFoundError as e:
        raise DataError(f"cases file not found: {path}") from e
    for lineno, record in records:
        try:
            case = SaraCase(
                str(record["id"]), record["text"], record["question"], record["gold"]
            )
        except KeyError as e:
            raise DataError(f"{path}:{lineno}: case record missing {e}") from e
        if case.gold not in GOLD_LABELS:
            raise MissingGoldLabel(f"{path}:{lineno}: gold label {case.gold!r} is not one of {GOLD_LABELS}")
        if case.id in seen:
            raise DataError(f"{path}:{lineno}: duplicate case id {case.id!r}")
        seen.add(case.id)
        cases.append(case)
    return cases
