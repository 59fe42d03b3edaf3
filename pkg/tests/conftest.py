import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent

from prefsteer.decoder import DecodeConfig
from prefsteer.harness import SyntheticScorer
from prefsteer.rewards import PreferenceSpec
from prefsteer.backends import NGramBackend, TableBackend
from prefsteer.selftest import golden_case, sweep_case


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO / "fixtures"


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    return REPO / "configs"


@pytest.fixture(scope="session")
def conflict(fixtures_dir):
    """(golden dict, backend, prefs, cfg) for the conflicting-preference fixture."""
    return golden_case(fixtures_dir)


@pytest.fixture(scope="session")
def sweep_fixture(fixtures_dir):
    """(backend, prefs, scorers, cfg) for the steerability fixture."""
    return sweep_case(fixtures_dir)


@pytest.fixture(scope="session")
def ngram_backend(fixtures_dir):
    return NGramBackend.from_files(
        fixtures_dir / "corpus_base.txt",
        {
            "likes_a": fixtures_dir / "corpus_likes_a.txt",
            "likes_b": fixtures_dir / "corpus_likes_b.txt",
        },
    )
