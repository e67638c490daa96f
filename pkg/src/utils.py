"""String normalization, numbering and JSON Lines helpers."""

import json
import re
import sys
import unicodedata
from collections.abc import Iterable, Iterator
from pathlib import Path

from windpyutils.generic import int_2_roman, roman_2_int

_ROMAN_RE = re.compile(r"^m{0,3}(cm|cd|d?c{0,3})(xc|xl|l?x{0,3})(ix|iv|v?i{0,3})$")

# Numbers with thousands separators ("1,250") or plain decimals ("45.50")
NUMBER_RE = re.compile(r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?")


def normalize_text(text: str) -> str:
    """Normalize text for exact-but-forgiving matching.

    Case-folds, strips accents and punctuation, collapses whitespace.

    Examples:
        "Net Sales:" -> "net sales"
        "Cost of  sales (a)" -> "cost of sales a"
    """
    if not text:
        return ""
    text = text.casefold()
    # Normalize unicode (é -> e)
    text = unicodedata.normalize("NFKD", text)
    text = "".join(c for c in text if not unicodedata.combining(c))
    # Keep only alphanumeric and spaces
    text = re.sub(r"[^\w\s]", " ", text)
    # Collapse whitespace
    text = " ".join(text.split())
    return text


def collapse_whitespace(text: str) -> str:
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    """Case-folded word and number tokens; thousands separators are dropped."""
    text = NUMBER_RE.sub(lambda m: m.group(0).replace(",", ""), text.casefold())
    return re.findall(r"\d+(?:\.\d+)?|[^\W\d_]+", text)


def is_number_token(token: str) -> bool:
    return bool(re.fullmatch(r"\d+(?:\.\d+)?", token))


def is_roman(token: str) -> bool:
    """True for a nonempty lowercase roman numeral ("iv", "xii")."""
    return bool(token) and bool(_ROMAN_RE.match(token))


def int_to_roman(value: int) -> str:
    """Lowercase roman numeral, as statute clauses are enumerated."""
    if value < 1:
        raise ValueError(f"roman numerals start at 1, got {value}")
    return int_2_roman(value).lower()


def roman_to_int(token: str) -> int:
    if not is_roman(token):
        raise ValueError(f"not a roman numeral: {token!r}")
    return roman_2_int(token.upper())


def section_sort_key(section_number: str) -> tuple[int, str]:
    """Natural ordering for section numbers: 2 < 68A < 151 < 7703."""
    match = re.match(r"(\d+)(.*)$", section_number)
    if not match:
        return (sys.maxsize, section_number)
    return (int(match.group(1)), match.group(2))


def read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, record) for each nonblank line of a JSON Lines file."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if line:
                yield lineno, json.loads(line)


def write_jsonl(path: Path, records: Iterable[dict]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
