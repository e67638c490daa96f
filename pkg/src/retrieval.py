"""Statute retrieval strategies over a parsed corpus.

mentioned-only   spine (ancestors) of the queried path plus its subtree
entire-section   mentioned-only of the query's subsection (depth 1)
references       mentioned-only plus one hop of cross-references
"""

import logging
from dataclasses import dataclass
from enum import StrEnum

from .citations import Citation, scan_references
from .errors import DataError
from .llm import count_tokens_approx
from .statute import ParsedStatute, SectionPath, StatuteSentence, UnknownPath, ancestors, subtree
from .utils import section_sort_key

logger = logging.getLogger(__name__)


class RetrievalStrategy(StrEnum):
    MENTIONED_ONLY = "mentioned-only"
    ENTIRE_SECTION = "entire-section"
    REFERENCES = "references"


class UnknownSection(DataError):
    """A query for a section that is not in the corpus."""


class NoCitationsFound(DataError):
    """A question without any section citation to seed retrieval."""


Corpus = dict[str, ParsedStatute]
Provenance = tuple[SectionPath, str]  # tag: queried | spine | subtree | referenced | missing


@dataclass(frozen=True)
class RetrievedContext:
    sentences: tuple[StatuteSentence, ...]
    provenance: tuple[Provenance, ...]
    char_count: int
    approx_tokens: int

    @property
    def text(self) -> str:
        return render_context(self.sentences)

    def paths(self) -> set[SectionPath]:
        return {s.assigned_path for s in self.sentences}


def _sentence_key(sentence: StatuteSentence) -> tuple:
    return (section_sort_key(sentence.assigned_path.section_number), sentence.ordinal)


def render_context(sentences) -> str:
    """One line per sentence: "<path>: <text>"."""
    return "\n".join(f"{s.assigned_path}: {s.text}" for s in sentences)


def _build(sentences, provenance) -> RetrievedContext:
    unique = {}
    for sentence in sentences:
        unique.setdefault((sentence.assigned_path.section_number, sentence.ordinal), sentence)
    ordered = tuple(sorted(unique.values(), key=_sentence_key))
    tags = tuple(dict.fromkeys(provenance))
    text = render_context(ordered)
    return RetrievedContext(ordered, tags, len(text), count_tokens_approx(text))


def _statute(corpus: Corpus, query: SectionPath) -> ParsedStatute:
    statute = corpus.get(query.section_number)
    if statute is None:
        raise UnknownSection(f"section {query.section_number} is not in the statute corpus")
    if query not in statute.paths:
        raise UnknownPath(f"{query} is not a subsection of {statute.root}")
    return statute


def _mentioned(statute: ParsedStatute, query: SectionPath, tag: str | None = None):
    spine = ancestors(query)
    spine_set = set(spine)
    sentences = [s for s in statute.sentences if s.assigned_path in spine_set]
    sentences += subtree(statute, query)
    below = [p for p in statute.sorted_paths() if query.is_prefix_of(p) and p != query]
    if tag is not None:
        return sentences, [(query, tag)]
    provenance = [(query, "queried")]
    provenance += [(p, "spine") for p in spine]
    provenance += [(p, "subtree") for p in below]
    return sentences, provenance


def retrieve_mentioned_only(corpus: Corpus, query: SectionPath) -> RetrievedContext:
    """Sentences of the query's ancestors plus every sentence in its subtree."""
    statute = _statute(corpus, query)
    return _build(*_mentioned(statute, query))


def retrieve_entire_section(corpus: Corpus, query: SectionPath) -> RetrievedContext:
    """Mentioned-only retrieval of the depth-1 subsection containing the query."""
    statute = _statute(corpus, query)
    return _build(*_mentioned(statute, query.truncate(1)))


def _fallback(corpus: Corpus, path: SectionPath) -> tuple[SectionPath | None, list[Provenance]]:
    """Deepest existing ancestor of `path`, or None when its section is absent."""
    statute = corpus.get(path.section_number)
    if statute is None:
        logger.warning("section %s is not in the statute corpus", path.section_number)
        return None, [(path, "missing")]
    if path in statute.paths:
        return path, []
    for depth in range(path.depth - 1, -1, -1):
        ancestor = path.truncate(depth)
        if ancestor in statute.paths:
            logger.warning("%s not found, using %s", path, ancestor)
            return ancestor, [(path, "missing")]
    return statute.root, [(path, "missing")]


def retrieve_references(corpus: Corpus, query: SectionPath) -> RetrievedContext:
    """Mentioned-only retrieval plus one hop of the references found in it.

    References are not followed recursively. A whole-section query is not
    expanded, so all strategies agree on it.
    """
    statute = _statute(corpus, query)
    sentences, provenance = _mentioned(statute, query)
    if query.depth > 0:
        for citation in scan_references(sentences):
            if citation.path.is_prefix_of(query):
                continue  # already on the spine
            target, missing = _fallback(corpus, citation.path)
            provenance += missing
            if target is None or target.is_prefix_of(query):
                continue
            more, _ = _mentioned(corpus[target.section_number], target, "referenced")
            sentences += more
            provenance.append((target, "referenced"))
    return _build(sentences, provenance)


STRATEGIES = {
    RetrievalStrategy.MENTIONED_ONLY: retrieve_mentioned_only,
    RetrievalStrategy.ENTIRE_SECTION: retrieve_entire_section,
    RetrievalStrategy.REFERENCES: retrieve_references,
}


def retrieve(corpus: Corpus, citations: list[Citation], strategy: RetrievalStrategy) -> RetrievedContext:
    """Union of the per-query retrieval over every cited path.

    Relative citations cannot be bound outside a statute and are skipped.
    Cited sections or paths missing from the corpus are recorded in the
    provenance with the "missing" tag.
    """
    queries = list(dict.fromkeys(c.path for c in citations if not c.relative))
    if not queries:
        raise NoCitationsFound("no section citations to retrieve")

    operation = STRATEGIES[RetrievalStrategy(strategy)]
    sentences: list[StatuteSentence] = []
    provenance: list[Provenance] = []
    for query in queries:
        target, missing = _fallback(corpus, query)
        provenance += missing
        if target is None:
            continue
        context = operation(corpus, target)
        sentences += context.sentences
        provenance += context.provenance
    return _build(sentences, provenance)
