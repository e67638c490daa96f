import json

import pytest

from src.errors import DataError
from src.sara import (
    MissingGoldLabel,
    UnparseableCase,
    import_sara,
    load_sara_cases,
    parse_case,
)
from src.statute import load_statute_corpus

CASE = """% Text
% Alice and Bob have been married since Feb 3rd, 2017.

% Question
% Alice and Bob can file a joint return for 2017. {label}

% Facts
:- [statutes/prolog/init].
"""


def test_import_fixture_tree(tmp_path, fixtures_dir):
    out = tmp_path / "sara"
    assert import_sara(fixtures_dir / "sara_raw", out) == (2, 4)

    written = [json.loads(line) for line in (out / "cases.jsonl").read_text().splitlines()]
    expected = [
        json.loads(line) for line in (fixtures_dir / "sara" / "cases.jsonl").read_text().splitlines()
    ]
    assert written == expected

    assert sorted(p.name for p in (out / "statutes").iterdir()) == [
        "section151.txt",
        "section7703.txt",
    ]
    sections = [json.loads(line)["section"] for line in (out / "statutes.jsonl").read_text().splitlines()]
    assert sections[0] == "151" and sections[-1] == "7703"
    # The normalized statutes parse again
    assert set(load_statute_corpus(out / "statutes")) == {"151", "7703"}


def test_tax_case_becomes_statement(fixtures_dir):
    source = (fixtures_dir / "sara_raw" / "cases" / "tax_case_1.pl").read_text()
    case = parse_case(source, "tax_case_1")
    assert case.question.endswith("for 2017? The amount is $2,000.")
    assert case.gold == "Entailment"


@pytest.mark.parametrize("label", ["Entailment", "Contradiction", "Contradiction."])
def test_parse_label(label):
    case = parse_case(CASE.format(label=label), "joint")
    assert case.gold == label.rstrip(".")
    assert case.question == "Alice and Bob can file a joint return for 2017."
    assert case.text == "Alice and Bob have been married since Feb 3rd, 2017."


def test_missing_label():
    with pytest.raises(MissingGoldLabel, match="joint"):
        parse_case(CASE.format(label=""), "joint")


def test_missing_block():
    with pytest.raises(UnparseableCase, match="Question"):
        parse_case("% Text\n% Alice was born in 1990.\n", "born")


def test_empty_tree(tmp_path):
    with pytest.raises(DataError, match="expected layout"):
        import_sara(tmp_path, tmp_path / "out")


def test_load_cases(fixtures_dir, tmp_path):
    cases = load_sara_cases(fixtures_dir / "sara" / "cases.jsonl")
    assert [c.id for c in cases] == ["s152_c_1_pos", "s7703_a_1_pos", "s7703_a_2_neg", "tax_case_1"]

    record = {"id": "x", "text": "t", "question": "q", "gold": "Entailment"}
    path = tmp_path / "cases.jsonl"
    path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(DataError, match="duplicate"):
        load_sara_cases(path)
    path.write_text(json.dumps(dict(record, gold="Maybe")) + "\n", encoding="utf-8")
    with pytest.raises(MissingGoldLabel):
        load_sara_cases(path)
    with pytest.raises(DataError, match="not found"):
        load_sara_cases(tmp_path / "missing.jsonl")
