"""Statute parsing: subsection hierarchy and sentence-to-subsection assignment.

A statute section is read block by block. Enumerator markers such as "(a)",
"(1)", "(A)", "(i)" and "(I)" move the current position in the hierarchy, and
every sentence is assigned to the most specific subsection open at that point.

Hierarchy levels by depth:
    1 subsection     (a)
    2 paragraph      (1)
    3 subparagraph   (A)
    4 clause         (i)
    5 subclause      (I)
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .utils import collapse_whitespace, int_to_roman, is_roman, roman_to_int, section_sort_key

logger = logging.getLogger(__name__)

LEVEL_KINDS = ("subsection", "paragraph", "subparagraph", "clause", "subclause")
MAX_DEPTH = len(LEVEL_KINDS)
FIRST_ENUMERATOR = {1: "a", 2: "1", 3: "A", 4: "i", 5: "I"}

# Protected from sentence splitting
ABBREVIATIONS = ("U.S.", "U.S.C.", "Sec.", "sec.", "e.g.", "i.e.", "No.", "Pub.", "Stat.", "Inc.")
TRAILING_CONJUNCTIONS = {"and", "or", "and/or"}
HEADING_MAX_WORDS = 12

SECTION_NUMBER_RE = re.compile(r"^\d+[A-Z]?$")
PATH_RE = re.compile(
    r"^(?:s|§\s*|(?i:section)\s+)?(\d+[A-Z]?)((?:\([A-Za-z0-9]{1,4}\))*)$"
)
MARKER_RE = re.compile(r"\(([a-z]{1,4}|[0-9]{1,3}|[A-Z]{1,4})\)(?=[\s(]|$)")
TITLE_RE = re.compile(r"§\s*(\d+[A-Z]?)\.?\s*(.*)", re.DOTALL)
BOUNDARY_RE = re.compile(r"[.;](?=\s|$)")
STATUTE_FILE_RE = re.compile(r"^section(\d+[A-Z]?)(?:\.txt)?$")


class InvalidSectionPath(DataError):
    """A section path string or component that violates the hierarchy rules."""


class MalformedEnumerator(DataError):
    """An enumerator whose level cannot follow the current path."""


class EmptyInput(DataError):
    """Statute text with nothing to parse."""


class UnknownPath(DataError):
    """A path that is not part of the parsed statute."""


def _is_letter_run(token: str) -> bool:
    """Single letter or a repeated letter ("a", "aa"), any case."""
    return bool(re.fullmatch(r"([a-z])\1{0,2}", token.lower()))


def component_matches(token: str, depth: int) -> bool:
    """Whether an enumerator token can appear at the given depth."""
    if depth == 1:
        return token.islower() and _is_letter_run(token)
    if depth == 2:
        return token.isdigit()
    if depth == 3:
        return token.isupper() and _is_letter_run(token)
    if depth == 4:
        return token.islower() and is_roman(token)
    if depth == 5:
        return token.isupper() and is_roman(token.lower())
    return False


def successor(token: str, depth: int) -> str:
    """The enumerator that follows `token` among its siblings."""
    if depth == 2:
        return str(int(token) + 1)
    if depth in (4, 5):
        nxt = int_to_roman(roman_to_int(token.lower()) + 1)
        return nxt.upper() if depth == 5 else nxt
    letter = token[0].lower()
    if letter == "z":
        nxt = "a" * (len(token) + 1)
    else:
        nxt = chr(ord(letter) + 1) * len(token)
    return nxt.upper() if depth == 3 else nxt


@dataclass(frozen=True)
class SectionPath:
    """Canonical identifier of a statute subsection, e.g. s7703(a)(1).

    An empty section number marks an unbound relative reference ("subsection
    (a)" in running text); the parser never produces one.
    """

    section_number: str
    components: tuple[str, ...] = ()

    def __post_init__(self):
        if self.section_number and not SECTION_NUMBER_RE.match(self.section_number):
            raise InvalidSectionPath(f"invalid section number: {self.section_number!r}")
        if not self.section_number and not self.components:
            raise InvalidSectionPath("empty section path")
        if len(self.components) > MAX_DEPTH:
            raise InvalidSectionPath(f"path deeper than {MAX_DEPTH} levels: {self.components}")

    @classmethod
    def parse(cls, text: str) -> "SectionPath":
        """Parse "s7703(a)(1)", "7703(a)(1)", "§ 7703(a)(1)" or "section 7703(a)(1)"."""
        match = PATH_RE.match(text.strip())
        if not match:
            raise InvalidSectionPath(f"not a section path: {text!r}")
        components = tuple(re.findall(r"\(([A-Za-z0-9]+)\)", match.group(2)))
        if len(components) > MAX_DEPTH:
            raise InvalidSectionPath(f"path deeper than {MAX_DEPTH} levels: {text!r}")
        for depth, component in enumerate(components, 1):
            if not component_matches(component, depth):
                raise InvalidSectionPath(
                    f"({component}) is not a valid {LEVEL_KINDS[depth - 1]} enumerator in {text!r}"
                )
        return cls(match.group(1), components)

    def __str__(self) -> str:
        return f"s{self.section_number}" + "".join(f"({c})" for c in self.components)

    @property
    def depth(self) -> int:
        return len(self.components)

    @property
    def root(self) -> "SectionPath":
        return SectionPath(self.section_number)

    @property
    def parent(self) -> "SectionPath | None":
        if not self.components:
            return None
        return SectionPath(self.section_number, self.components[:-1])

    def truncate(self, depth: int) -> "SectionPath":
        return SectionPath(self.section_number, self.components[:depth])

    def child(self, component: str) -> "SectionPath":
        return SectionPath(self.section_number, self.components + (component,))

    def is_prefix_of(self, other: "SectionPath") -> bool:
        return (
            self.section_number == other.section_number
            and other.components[: len(self.components)] == self.components
        )

    def sort_key(self) -> tuple:
        return (section_sort_key(self.section_number), self.components)


def ancestors(path: SectionPath) -> list[SectionPath]:
    """Proper prefixes of `path`, shallow to deep: s7703(a)(1) -> [s7703, s7703(a)]."""
    return [path.truncate(depth) for depth in range(path.depth)]


@dataclass(frozen=True)
class StatuteSentence:
    text: str
    assigned_path: SectionPath
    ordinal: int
    source_span: tuple[int, int]
    is_heading: bool = False


@dataclass(frozen=True)
class ParsedStatute:
    root: SectionPath
    paths: frozenset[SectionPath]
    headings: dict[SectionPath, str] = field(compare=False)
    sentences: tuple[StatuteSentence, ...]

    @property
    def section_number(self) -> str:
        return self.root.section_number

    def sorted_paths(self) -> list[SectionPath]:
        return sorted(self.paths, key=SectionPath.sort_key)


@dataclass
class _Event:
    kind: str  # title | marker | heading | sentence
    text: str
    start: int
    end: int
    inline: bool = False


def _blocks(raw: str, split_on_markers: bool = True) -> list[tuple[int, int]]:
    """Character ranges of paragraphs.

    A block ends at a blank line or, when `split_on_markers` is set, at a line
    break followed by an enumerator marker.
    """
    blocks: list[tuple[int, int]] = []
    start: int | None = None
    end = 0
    offset = 0
    for line in raw.splitlines(keepends=True):
        content = line.strip()
        if not content:
            if start is not None:
                blocks.append((start, end))
                start = None
        else:
            leading = offset + len(line) - len(line.lstrip())
            if start is not None and split_on_markers and MARKER_RE.match(line.lstrip()):
                blocks.append((start, end))
                start = None
            if start is None:
                start = leading
            end = offset + len(line.rstrip())
        offset += len(line)
    if start is not None:
        blocks.append((start, end))
    return blocks


def _ends_with_abbreviation(text: str) -> bool:
    for abbreviation in ABBREVIATIONS:
        if text.endswith(abbreviation):
            before = len(text) - len(abbreviation) - 1
            if before < 0 or not text[before].isalnum():
                return True
    return False


def _next_boundary(raw: str, pos: int, end: int) -> int | None:
    """Offset just past the next ". " or "; " boundary before `end`."""
    for match in BOUNDARY_RE.finditer(raw, pos, end):
        stop = match.end()
        if raw[match.start()] == "." and _ends_with_abbreviation(raw[pos:stop]):
            continue
        return stop
    return None


def _sentence_end(raw: str, pos: int, end: int) -> int:
    stop = _next_boundary(raw, pos, end)
    if stop is None:
        return end
    if raw[stop:end].strip().lower() in TRAILING_CONJUNCTIONS:
        return end
    return stop


def _skip_space(raw: str, pos: int, end: int) -> int:
    while pos < end and raw[pos].isspace():
        pos += 1
    return pos


def _heading_end(raw: str, pos: int, end: int) -> int | None:
    """End offset of a heading starting at `pos`, or None.

    A heading is a short capitalized fragment that ends at a period with more
    text after it on the same line, or at the end of the line.
    """
    line_end = raw.find("\n", pos, end)
    if line_end == -1:
        line_end = end
    line = raw[pos:line_end].rstrip()
    if not line or not line[0].isupper():
        return None
    stop = _next_boundary(raw, pos, pos + len(line))
    if stop is not None and raw[stop : pos + len(line)].strip():
        if raw[stop - 1] != ".":
            return None
        candidate = raw[pos:stop]
    else:
        candidate = line
    if len(candidate.split()) >= HEADING_MAX_WORDS:
        return None
    if candidate[-1] in ",;:-—(" or ";" in candidate:
        return None
    return pos + len(candidate)


def _scan(raw: str) -> list[_Event]:
    events: list[_Event] = []
    for index, (start, end) in enumerate(_blocks(raw)):
        if index == 0 and raw[start] == "§":
            events.append(_Event("title", raw[start:end], start, end))
            continue
        pos = start
        while True:
            pos = _skip_space(raw, pos, end)
            if pos >= end:
                break
            saw_marker = False
            while match := MARKER_RE.match(raw, pos, end):
                events.append(_Event("marker", match.group(1), match.start(), match.end(), pos != start))
                pos = _skip_space(raw, match.end(), end)
                saw_marker = True
            if pos >= end:
                break
            if saw_marker:
                heading_end = _heading_end(raw, pos, end)
                if heading_end is not None:
                    events.append(_Event("heading", raw[pos:heading_end], pos, heading_end))
                    pos = heading_end
                    continue
            stop = _sentence_end(raw, pos, end)
            events.append(_Event("sentence", raw[pos:stop], pos, stop))
            pos = stop
    return events


def _continues(token: str, depth: int, components: tuple[str, ...]) -> bool:
    """Whether `token` at `depth` is the expected next sibling (or first child)."""
    if depth <= len(components):
        return token == successor(components[depth - 1], depth)
    return token == FIRST_ENUMERATOR[depth]


def _candidate_depths(token: str, components: tuple[str, ...]) -> list[int]:
    return [
        depth
        for depth in range(1, MAX_DEPTH + 1)
        if depth <= len(components) + 1 and component_matches(token, depth)
    ]


def _resolve_depth(token: str, components: tuple[str, ...], next_token: str | None) -> int | None:
    """Pick the depth of an enumerator, resolving letter/roman ambiguity.

    Prefers the reading that continues a sibling sequence; when both readings
    continue one, the next marker decides; otherwise the roman reading wins.
    Returns None when no depth can follow the current path.
    """
    legal = _candidate_depths(token, components)
    if len(legal) <= 1:
        return legal[0] if legal else None
    continuing = [d for d in legal if _continues(token, d, components)]
    if len(continuing) == 1:
        return continuing[0]
    pool = continuing or legal
    if next_token is not None:
        confirmed = []
        for depth in pool:
            after = components[: depth - 1] + (token,)
            if any(_continues(next_token, d, after) for d in _candidate_depths(next_token, after)):
                confirmed.append(depth)
        if len(confirmed) == 1:
            return confirmed[0]
    roman = [d for d in pool if d in (4, 5)]
    return roman[0] if roman else min(pool)


def parse_statute(raw_text: str, section_number: str) -> ParsedStatute:
    """Parse raw statute text and assign every sentence to a section path."""
    if not raw_text or not raw_text.strip():
        raise EmptyInput(f"statute section {section_number} is empty")

    root = SectionPath(section_number)
    events = _scan(raw_text)
    markers = [i for i, e in enumerate(events) if e.kind == "marker"]
    next_marker = {i: (events[j].text if j else None) for i, j in zip(markers, markers[1:] + [0])}

    current = root
    paths = {root}
    headings: dict[SectionPath, str] = {}
    sentences: list[StatuteSentence] = []
    carried: _Event | None = None

    def emit(text: str, span: tuple[int, int], is_heading: bool = False):
        text = collapse_whitespace(text)
        if text:
            sentences.append(StatuteSentence(text, current, len(sentences), span, is_heading))

    for i, event in enumerate(events):
        if event.kind == "marker":
            depth = _resolve_depth(event.text, current.components, next_marker[i])
            if depth is None:
                if event.inline:
                    # Not a real marker: keep it as the start of the next sentence
                    carried = event
                    continue
                raise MalformedEnumerator(
                    f"enumerator ({event.text}) at offset {event.start} cannot follow {current}"
                )
            current = SectionPath(section_number, current.components[: depth - 1] + (event.text,))
            paths.add(current)
            paths.update(ancestors(current))
        elif event.kind == "title":
            title = TITLE_RE.match(collapse_whitespace(event.text))
            if title and title.group(1) != section_number:
                logger.warning(
                    "section %s: title names section %s", section_number, title.group(1)
                )
            if title and title.group(2):
                headings[root] = title.group(2)
            emit(event.text, (event.start, event.end), is_heading=True)
        else:
            text, start = event.text, event.start
            if carried is not None:
                text = f"({carried.text}) {text}"
                start = carried.start
                carried = None
            if event.kind == "heading":
                headings[current] = collapse_whitespace(event.text)
            emit(text, (start, event.end), is_heading=event.kind == "heading")

    return ParsedStatute(root, frozenset(paths), headings, tuple(sentences))


def subtree(statute: ParsedStatute, path: SectionPath) -> list[StatuteSentence]:
    """Sentences assigned to `path` or any of its descendants, in source order."""
    if path not in statute.paths:
        raise UnknownPath(f"{path} is not a subsection of {statute.root}")
    return [s for s in statute.sentences if path.is_prefix_of(s.assigned_path)]


def split_sentences(text: str) -> list[str]:
    """Plain sentence splitter: blank lines, ". " and "; " boundaries only."""
    out = []
    for start, end in _blocks(text, split_on_markers=False):
        pos = start
        while (pos := _skip_space(text, pos, end)) < end:
            stop = _sentence_end(text, pos, end)
            out.append(collapse_whitespace(text[pos:stop]))
            pos = stop
    return out


def render_statute(statute: ParsedStatute) -> str:
    """Render a parsed statute back to indented text, one sentence per paragraph."""
    lines = []
    current = statute.root
    for sentence in statute.sentences:
        path = sentence.assigned_path
        prefix = ""
        if path != current:
            shared = 0
            while (
                shared < min(path.depth, current.depth)
                and path.components[shared] == current.components[shared]
            ):
                shared += 1
            shared = min(shared, path.depth - 1)
            prefix = "".join(f"({c})" for c in path.components[shared:])
            current = path
        indent = "    " * max(path.depth - 1, 0)
        lines.append(f"{indent}{prefix} {sentence.text}" if prefix else indent + sentence.text)
    return "\n\n".join(lines) + "\n"


def statute_records(statute: ParsedStatute) -> list[dict]:
    """JSON Lines records, one per sentence."""
    return [
        {
            "section": statute.section_number,
            "path": str(s.assigned_path),
            "ordinal": s.ordinal,
            "text": s.text,
        }
        for s in statute.sentences
    ]


def load_statute_corpus(statute_dir: Path) -> dict[str, ParsedStatute]:
    """Parse every `section<N>.txt` (or extensionless `section<N>`) file in a directory."""
    if not statute_dir.is_dir():
        raise DataError(f"statute directory not found: {statute_dir}")
    corpus: dict[str, ParsedStatute] = {}
    for path in sorted(statute_dir.iterdir()):
        match = STATUTE_FILE_RE.match(path.name)
        if not match or not path.is_file():
            continue
        number = match.group(1)
        corpus[number] = parse_statute(path.read_text(encoding="utf-8"), number)
        logger.debug("parsed section %s: %d sentences", number, len(corpus[number].sentences))
    if not corpus:
        raise DataError(f"no section<N>.txt files in {statute_dir}")
    return dict(sorted(corpus.items(), key=lambda item: section_sort_key(item[0])))
