"""Shared fixtures for the semiqa test suite."""

from pathlib import Path

import pytest

from src.config import STATUTE_DIR
from src.finqa import ingest_finqa
from src.statute import load_statute_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus():
    """The bundled statute corpus (sections 151, 152 and 7703)."""
    return load_statute_corpus(STATUTE_DIR)


@pytest.fixture(scope="session")
def s7703(corpus):
    return corpus["7703"]


@pytest.fixture(scope="session")
def finqa_fixture() -> Path:
    return FIXTURES / "finqa" / "finqa_mini.json"


@pytest.fixture(scope="session")
def finqa_pairs(finqa_fixture):
    return {q.report_id: (r, q) for r, q in ingest_finqa(finqa_fixture)}
