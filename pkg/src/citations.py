"""Citation extraction: references to sections and subsections in free text.

Every pattern lives in PATTERNS below. Cue words ("section", "subsection",
"under", "and") match case-insensitively; enumerators match case-sensitively
because their case encodes the hierarchy level.
"""

import logging
import re
from dataclasses import dataclass

from .errors import DataError
from .statute import LEVEL_KINDS, SectionPath, StatuteSentence, component_matches

logger = logging.getLogger(__name__)

_NUM = r"\d+[A-Z]?"
_ENUM = r"\([A-Za-z0-9]{1,4}\)"
_CHAIN = rf"(?:{_ENUM})+"
_SEP = r"(?:\s*,\s*(?:(?i:and|or)\s+)?|\s+(?i:and|or)\s+)"
_CUE = r"(?i:subsections?|paragraphs?|subparagraphs?|clauses?|subclauses?)"
_SECTION_ITEM = rf"{_NUM}(?:{_CHAIN})?"

PATTERNS = {
    # subsections (a) and (b) of section 7703
    "enumerated_of_section": re.compile(
        rf"\b(?P<cue>{_CUE})\s+(?P<items>{_CHAIN}(?:{_SEP}{_CHAIN})*)"
        rf"\s+(?i:of)\s+(?:(?i:section)\s+|§\s*)(?P<section>{_NUM})(?P<prefix>{_CHAIN})?"
    ),
    # sections 151 and 152, §§ 151, 152
    "section_list": re.compile(
        rf"(?:\b(?i:sections)\s+|§§\s*)(?P<items>{_SECTION_ITEM}(?:{_SEP}{_SECTION_ITEM})*)"
    ),
    # section 7703(b)(3), § 7703(b)
    "section": re.compile(rf"(?:\b(?i:section)\s+|§\s*)(?P<items>{_SECTION_ITEM})"),
    # under 7703(a)(1)
    "bare_under": re.compile(rf"\b(?i:under)\s+(?P<items>{_NUM}{_CHAIN})"),
    # subsection (a), paragraphs (1) and (2)
    "relative": re.compile(rf"\b(?P<cue>{_CUE})\s+(?P<items>{_CHAIN}(?:{_SEP}{_CHAIN})*)"),
}

_CHAIN_RE = re.compile(_CHAIN)
_SECTION_ITEM_RE = re.compile(rf"(?P<section>{_NUM})(?P<chain>{_CHAIN})?")
_COMPONENT_RE = re.compile(r"\(([A-Za-z0-9]+)\)")

CUE_LEVELS = {kind: depth for depth, kind in enumerate(LEVEL_KINDS, 1)}


class UnresolvableRelative(DataError):
    """A relative citation that cannot be bound to a path."""


@dataclass(frozen=True)
class Citation:
    path: SectionPath
    span: tuple[int, int]
    relative: bool = False
    level: int = 0  # depth named by the cue word of a relative citation


def _cue_level(cue: str) -> int:
    return CUE_LEVELS[cue.lower().rstrip("s")]


def _components(chain: str) -> tuple[str, ...]:
    return tuple(_COMPONENT_RE.findall(chain))


def _valid_components(components: tuple[str, ...]) -> bool:
    if len(components) > len(LEVEL_KINDS):
        return False
    return all(component_matches(c, depth) for depth, c in enumerate(components, 1))


def _match_citations(name: str, match: re.Match) -> list[Citation]:
    items_start = match.start("items")
    items = match.group("items")

    if name == "enumerated_of_section":
        prefix = _components(match.group("prefix") or "")
        level = _cue_level(match.group("cue"))
        out = []
        for item in _CHAIN_RE.finditer(items):
            components = prefix + _components(item.group(0))
            if len(prefix) + 1 != level or not _valid_components(components):
                return []
            span = (items_start + item.start(), items_start + item.end())
            out.append(Citation(SectionPath(match.group("section"), components), span))
        return out

    if name == "relative":
        level = _cue_level(match.group("cue"))
        return [
            Citation(
                SectionPath("", _components(item.group(0))),
                (items_start + item.start(), items_start + item.end()),
                relative=True,
                level=level,
            )
            for item in _CHAIN_RE.finditer(items)
            if len(_components(item.group(0))) <= len(LEVEL_KINDS)
        ]

    out = []
    for item in _SECTION_ITEM_RE.finditer(items):
        components = _components(item.group("chain") or "")
        # Keep the enumerators that fit the hierarchy: "section 7703(B)" cites s7703
        while components and not _valid_components(components):
            components = components[:-1]
        if name == "bare_under" and not components:
            continue
        length = len(item.group("section")) + sum(len(c) + 2 for c in components)
        span = (items_start + item.start(), items_start + item.start() + length)
        out.append(Citation(SectionPath(item.group("section"), components), span))
    return out


def extract_citations(text: str) -> list[Citation]:
    """Find section citations in source order, deduplicated by path.

    Overlapping matches resolve to the earliest start, then the longest match.
    """
    candidates = []
    for name, pattern in PATTERNS.items():
        for match in pattern.finditer(text):
            citations = _match_citations(name, match)
            if citations:
                candidates.append((match.start(), -match.end(), name, citations))
    candidates.sort(key=lambda c: (c[0], c[1]))

    out: list[Citation] = []
    seen = set()
    covered_until = -1
    for start, neg_end, _name, citations in candidates:
        if start < covered_until:
            continue
        covered_until = -neg_end
        for citation in citations:
            key = (citation.path, citation.level)
            if key not in seen:
                seen.add(key)
                out.append(citation)
    return out


def resolve_relative(citation: Citation, context_path: SectionPath) -> SectionPath:
    """Bind a relative citation to the section of the sentence containing it.

    "paragraph (2)" read inside s7703(a)(1) -> s7703(a)(2).
    """
    if not citation.relative:
        return citation.path
    level = citation.level
    if level < 1:
        raise UnresolvableRelative(f"relative citation without a cue word at {citation.span}")
    if level - 1 > context_path.depth:
        raise UnresolvableRelative(
            f"{LEVEL_KINDS[level - 1]} reference inside {context_path} has no enclosing "
            f"{LEVEL_KINDS[level - 2]}"
        )
    components = context_path.components[: level - 1] + citation.path.components
    if not _valid_components(components):
        raise UnresolvableRelative(
            f"{LEVEL_KINDS[level - 1]} {''.join(f'({c})' for c in citation.path.components)} "
            f"does not fit under {context_path}"
        )
    return SectionPath(context_path.section_number, components)


def scan_references(sentences: list[StatuteSentence]) -> list[Citation]:
    """Citations found inside statute sentences, relative ones resolved.

    Section titles ("§7703. Determination of marital status") are skipped.
    Unresolvable relative citations are logged and dropped.
    """
    out: list[Citation] = []
    seen = set()
    for sentence in sentences:
        if sentence.is_heading and sentence.assigned_path.depth == 0:
            continue
        for citation in extract_citations(sentence.text):
            try:
                path = resolve_relative(citation, sentence.assigned_path)
            except UnresolvableRelative as e:
                logger.warning("dropping reference in %s: %s", sentence.assigned_path, e)
                continue
            if path in seen:
                continue
            seen.add(path)
            out.append(Citation(path, citation.span, citation.relative, citation.level))
    return out


def render_citations(citations: list[Citation]) -> str:
    """Render citations as text that extract_citations reads back to the same paths."""
    parts = []
    for citation in citations:
        chain = "".join(f"({c})" for c in citation.path.components)
        if citation.relative and not citation.path.section_number:
            parts.append(f"{LEVEL_KINDS[citation.level - 1]} {chain}")
        else:
            parts.append(f"section {citation.path.section_number}{chain}")
    return "; ".join(parts)
