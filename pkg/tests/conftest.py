from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

from overhear.gamedata import Corpus, load_corpus

sys.path.insert(0, str(Path(__file__).parent))

DEMO_DIR = resources.files("overhear.data.demo")


@pytest.fixture(scope="session")
def corpus() -> Corpus:
    return load_corpus(str(DEMO_DIR.joinpath("sample_corpus.json")))


@pytest.fixture(scope="session")
def demo_paths() -> dict[str, str]:
    return {
        "corpus": str(DEMO_DIR.joinpath("sample_corpus.json")),
        "intervals": str(DEMO_DIR.joinpath("demo_intervals.jsonl")),
        "script": str(DEMO_DIR.joinpath("demo_script.jsonl")),
        "gold": str(DEMO_DIR.joinpath("demo_gold.jsonl")),
    }
