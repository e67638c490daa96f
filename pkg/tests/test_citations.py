import logging

import pytest

from src.citations import (
    Citation,
    UnresolvableRelative,
    extract_citations,
    render_citations,
    resolve_relative,
    scan_references,
)
from src.statute import SectionPath, StatuteSentence, subtree

P = SectionPath.parse


def paths(citations):
    return [str(c.path) for c in citations]


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("Section 7703(b)(3) applies to Alice maintaining her household for 2018.", ["s7703(b)(3)"]),
        ("Alice and Bob were married in 2015.", []),
        ("sections 151 and 152", ["s151", "s152"]),
        ("Sections 151, 152, and 7703 apply.", ["s151", "s152", "s7703"]),
        ("§§ 151 and 152(d)", ["s151", "s152(d)"]),
        ("subsections (a) and (b) of section 7703", ["s7703(a)", "s7703(b)"]),
        ("paragraph (2) of section 152(d)", ["s152(d)(2)"]),
        ("Bob is a dependent under 152(d)(2)(H) for 2017.", ["s152(d)(2)(H)"]),
        ("Alice earned $2000 under 2017 rules.", []),
        ("§ 7703(a)(2) and § 151(c)", ["s7703(a)(2)", "s151(c)"]),
        ("§7703(b)", ["s7703(b)"]),
        ("SECTION 151 applies.", ["s151"]),
        ("Section 151(c) and then section 151(c) again.", ["s151(c)"]),
        ("Section 63(c)(5) limits the standard deduction.", ["s63(c)(5)"]),
        ("The section does not apply.", []),
        ("Section 2(a)(1)(B) applies to Alice for the year 2017.", ["s2(a)(1)(B)"]),
        ("Under section 68A, nothing happens.", ["s68A"]),
        ("section 7703(b)(1), section 7703(b)(2)", ["s7703(b)(1)", "s7703(b)(2)"]),
        ("Alice paid section 8 housing costs of $3000.", ["s8"]),
        ("The amount under section 1(a)(1)(A) is computed first.", ["s1(a)(1)(A)"]),
    ],
)
def test_extract_absolute_citations(text, expected):
    assert paths(c for c in extract_citations(text) if not c.relative) == expected


def test_span_covers_citation():
    text = "Section 7703(b)(3) applies to Alice."
    (citation,) = extract_citations(text)
    start, end = citation.span
    assert text[start:end] == "7703(b)(3)"
    assert citation.relative is False


def test_relative_citations():
    citations = extract_citations("an individual described in paragraphs (1) and (2)")
    assert [c.path.components for c in citations] == [("1",), ("2",)]
    assert all(c.relative and c.level == 2 and c.path.section_number == "" for c in citations)


def test_relative_and_absolute_mixed():
    text = "married (within the meaning of subsection (a)) and a child under section 152(f)(1)"
    citations = extract_citations(text)
    assert [(c.relative, c.level) for c in citations] == [(True, 1), (False, 0)]
    assert str(citations[1].path) == "s152(f)(1)"


def test_spans_are_sorted_and_disjoint():
    text = "subsections (a) and (b) of section 7703, sections 151 and 152, and paragraph (2)"
    citations = extract_citations(text)
    spans = [c.span for c in citations]
    assert spans == sorted(spans)
    for (_, end), (start, _) in zip(spans, spans[1:]):
        assert end <= start


def test_enumerator_case_is_significant():
    (citation,) = extract_citations("as described in subparagraph (B)")
    assert citation.level == 3 and citation.path.components == ("B",)
    assert extract_citations("section 7703(B)") == [Citation(P("s7703"), (8, 12))]


@pytest.mark.parametrize(
    ("text", "context", "expected"),
    [
        ("subsection (a)", "s7703(b)(1)", "s7703(a)"),
        ("paragraph (2)", "s7703(a)(1)", "s7703(a)(2)"),
        ("subparagraph (B)", "s152(d)(2)(A)", "s152(d)(2)(B)"),
        ("paragraph (1)(A)", "s152(c)(2)", "s152(c)(1)(A)"),
        ("clause (ii)", "s152(c)(3)(A)(i)", "s152(c)(3)(A)(ii)"),
    ],
)
def test_resolve_relative(text, context, expected):
    (citation,) = extract_citations(text)
    assert str(resolve_relative(citation, P(context))) == expected


@pytest.mark.parametrize(
    ("text", "context"),
    [
        ("subparagraph (B)", "s7703(a)"),
        ("subsection (A)", "s7703(b)"),
        ("paragraph (c)", "s7703(a)"),
    ],
)
def test_resolve_relative_errors(text, context):
    (citation,) = extract_citations(text)
    with pytest.raises(UnresolvableRelative):
        resolve_relative(citation, P(context))


def test_resolve_absolute_is_identity():
    (citation,) = extract_citations("section 151(c)")
    assert resolve_relative(citation, P("s7703(a)")) == P("s151(c)")


def test_scan_references_in_7703b(s7703):
    found = paths(scan_references(subtree(s7703, P("s7703(b)"))))
    assert found == ["s7703(a)", "s152(f)(1)", "s151", "s152(e)"]


def test_scan_references_none(s7703):
    assert scan_references(subtree(s7703, P("s7703(a)(1)"))) == []


def test_scan_references_drops_unresolvable(caplog):
    sentence = StatuteSentence("see subparagraph (B)", P("s1"), 0, (0, 20))
    with caplog.at_level(logging.WARNING):
        assert scan_references([sentence]) == []
    assert "dropping reference" in caplog.text


def test_render_then_extract_is_idempotent():
    text = "subsections (a) and (b) of section 7703, sections 151 and 152(d)(2)(H), under 152(f)(1)"
    citations = extract_citations(text)
    again = extract_citations(render_citations(citations))
    assert {c.path for c in again} == {c.path for c in citations}


def test_scan_references_skips_section_title(s7703):
    title = s7703.sentences[0]
    assert title.is_heading and title.assigned_path == P("s7703")
    assert extract_citations(title.text)
    assert scan_references([title]) == []
