from __future__ import annotations

import json
from pathlib import Path

import pytest

from rulechat.core import read_utterances_jsonl

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def suite40():
    """The 40 hand-labeled dialog turns used across classifier tests."""
    return list(read_utterances_jsonl(FIXTURES / "suite40.jsonl"))


@pytest.fixture(scope="session")
def demo_catalog() -> dict[str, dict]:
    from importlib import resources

    doc = json.loads(
        resources.files("rulechat.data").joinpath("demo_rules.json").read_text()
    )
    return {r["rule_id"]: r for r in doc["rules"]}


@pytest.fixture(scope="session")
def random_trees():
    from _helpers import random_tree

    return [random_tree(seed) for seed in range(20)]
