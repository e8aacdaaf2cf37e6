"""Shared paths and loaded resources for the test suite."""

from pathlib import Path

import pytest

from fluencybench.backends import FixtureBackend
from fluencybench.corpus import (
    load_association_norms,
    load_embeddings,
    load_fluency_dataset,
    load_frequency_table,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def freq_table():
    return load_frequency_table(FIXTURES / "freq.csv")


@pytest.fixture(scope="session")
def usf_norms():
    return load_association_norms(FIXTURES / "usf.csv")


@pytest.fixture(scope="session")
def embedding_table():
    return load_embeddings(FIXTURES / "embeddings.txt")


@pytest.fixture(scope="session")
def e2e_lists():
    return load_fluency_dataset(FIXTURES / "e2e_dataset.csv")


@pytest.fixture(scope="session")
def noun_set() -> frozenset:
    words = (FIXTURES / "nouns.txt").read_text().split("\n")
    return frozenset(w.strip() for w in words if w.strip() and not w.startswith("#"))


@pytest.fixture(scope="session")
def stopword_set() -> frozenset:
    words = (FIXTURES / "stopwords.txt").read_text().split("\n")
    return frozenset(w.strip() for w in words if w.strip() and not w.startswith("#"))


@pytest.fixture()
def mlm_backend():
    return FixtureBackend(FIXTURES / "mlm_fixture.json")
