import json
from importlib.resources import files

import pytest

from mods.corpus import DebateEntry, Document, load_dataset
from mods.llm import ScriptedBackend

DATA = files("mods") / "data"
DATASET_PATH = str(DATA / "fixture_dataset.json")
SCRIPT_PATH = str(DATA / "fixture_script.json")


def make_entry(stances, paragraphs=None, query="Is it good?", m=3):
    docs = []
    for i, s in enumerate(stances, start=1):
        paras = paragraphs[i - 1] if paragraphs else (f"doc {i} says {s} about the question.", f"more from doc {i}.")
        docs.append(Document(i, s, tuple(paras)))
    return DebateEntry(query, tuple(docs), m)


@pytest.fixture(scope="session")
def fixture_entries():
    return load_dataset(DATASET_PATH)


@pytest.fixture(scope="session")
def law_entry(fixture_entries):
    return fixture_entries[0]


@pytest.fixture(scope="session")
def fire_entry(fixture_entries):
    return fixture_entries[1]


@pytest.fixture(scope="session")
def script_data():
    return json.loads((DATA / "fixture_script.json").read_text(encoding="utf-8"))


@pytest.fixture
def backend(script_data):
    return ScriptedBackend(script_data)
