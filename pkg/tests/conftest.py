"""Shared fixtures and builders for the test suite."""

import json
from pathlib import Path

import pytest

from squarebench.dataset import ContextPassage, GoldLabel, QueryRecord

DATA_DIR = Path(__file__).parent / "data"

PACKAGE_ROOT = Path(__file__).parent.parent / "src" / "squarebench"
MINI_DATASET = PACKAGE_ROOT / "data" / "mini10.jsonl"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def mini_dataset_path() -> Path:
    assert MINI_DATASET.exists(), f"bundled dataset missing: {MINI_DATASET}"
    return MINI_DATASET


def make_record(
    record_id: str = "r1",
    question: str = "Which country hosts the headquarters of the European Space Agency?",
    aliases=("France",),
    contexts=None,
) -> QueryRecord:
    if contexts is None:
        contexts = (
            ContextPassage(
                text="The European Space Agency has its headquarters in Paris, France.",
                title="European Space Agency",
                score=0.9,
                source_id="wiki:ESA",
            ),
            ContextPassage(
                text="ESA's main spaceport is the Guiana Space Centre in Kourou, French Guiana.",
                title="Guiana Space Centre",
                score=0.7,
                source_id="wiki:CSG",
            ),
        )
    return QueryRecord(
        id=record_id,
        question=question,
        gold=GoldLabel.alias_list(aliases),
        contexts=tuple(contexts),
    )


def load_fixture_json(name: str):
    return json.loads((DATA_DIR / name).read_text(encoding="utf-8"))
