import math

import numpy as np
import pytest

from statecoach.backends import ScriptedBackend
from statecoach.errors import EmptyTextError
from statecoach.memory import (
    DEFAULT_CONSOLIDATE_EVERY,
    DEFAULT_CONTEXT_N,
    DEFAULT_DIST_THRES,
    DEFAULT_K,
    LTM,
    STM,
    MemoryStore,
)


class VectorBackend:
    """Maps known texts to fixed unit vectors so distances are exact."""

    def __init__(self, table):
        self.table = table
        self.summaries = []

    def embed(self, text):
        return np.asarray(self.table.get(text, [0.0, 0.0, 1.0]), dtype=float)

    def summarize(self, texts):
        self.summaries.append(list(texts))
        return "summary: " + " / ".join(texts)


E1 = [1.0, 0.0, 0.0]
E2 = [0.0, 1.0, 0.0]
NEG1 = [-1.0, 0.0, 0.0]


def test_defaults():
    assert (DEFAULT_K, DEFAULT_DIST_THRES) == (1, 1.5)
    assert (DEFAULT_CONTEXT_N, DEFAULT_CONSOLIDATE_EVERY) == (30, 12)


def test_add_then_self_retrieve_distance_zero():
    store = MemoryStore(VectorBackend({"hello": E1}))
    store.add(STM, "hello", 1, "s")
    out = store.retrieve("hello", session="s")
    assert [e.text for e in out["relevant"]] == ["hello"]


def test_distinct_texts_get_distinct_ids():
    store = MemoryStore(VectorBackend({"one": E1, "two": E2}))
    id1 = store.add(STM, "one", 1, "s")
    id2 = store.add(STM, "two", 1, "s")
    assert id1 != id2


def test_add_empty_text_raises():
    store = MemoryStore(VectorBackend({}))
    with pytest.raises(EmptyTextError):
        store.add(STM, "   ", 1, "s")


def test_add_unknown_tier_raises():
    store = MemoryStore(VectorBackend({"x": E1}))
    with pytest.raises(ValueError):
        store.add("MTM", "x", 1, "s")


def test_empty_store_retrieval():
    out = MemoryStore(VectorBackend({"q": E1})).retrieve("q")
    assert out == {"relevant": [], "context": []}


def test_orthogonal_within_threshold_antipodal_outside():
    store = MemoryStore(VectorBackend({"ortho": E2, "anti": NEG1, "q": E1}))
    store.add(STM, "ortho", 1, "s")
    store.add(STM, "anti", 2, "s")
    out = store.retrieve("q", k=2, session="s")
    assert [e.text for e in out["relevant"]] == ["ortho"]
    assert math.isclose(
        float(np.linalg.norm(np.array(E2) - np.array(E1))), math.sqrt(2)
    )
    assert float(np.linalg.norm(np.array(NEG1) - np.array(E1))) == 2.0


def test_relevant_sorted_by_distance_then_age():
    table = {"a": E1, "b": E1, "q": E1}
    store = MemoryStore(VectorBackend(table))
    store.add(STM, "b", 5, "s")
    store.add(STM, "a", 2, "s")
    out = store.retrieve("q", k=2, session="s")
    assert [e.text for e in out["relevant"]] == ["a", "b"]


def test_context_window_is_chronological_tail():
    table = {f"t{i}": E1 for i in range(5)}
    table["q"] = E2
    store = MemoryStore(VectorBackend(table))
    for i in range(5):
        store.add(STM, f"t{i}", i, "s")
    out = store.retrieve("q", context_n=3, session="s")
    assert [e.text for e in out["context"]] == ["t2", "t3", "t4"]


def test_stm_is_session_private_ltm_is_shared():
    store = MemoryStore(VectorBackend({"mine": E1, "theirs": E1, "shared": E1, "q": E1}))
    store.add(STM, "mine", 1, "s1")
    store.add(STM, "theirs", 1, "s2")
    store.add(LTM, "shared", 1, "s2")
    out = store.retrieve("q", k=5, session="s1")
    texts = {e.text for e in out["relevant"]}
    assert texts == {"mine", "shared"}
    assert {e.text for e in out["context"]} == {"mine", "shared"}


def test_consolidation_threshold_and_periodicity():
    table = {f"turn {i}": E1 for i in range(30)}
    backend = VectorBackend(table)
    store = MemoryStore(backend)
    for i in range(1, 12):
        store.add(STM, f"turn {i}", i, "s")
    assert store.consolidate("s") is None  # turn 11: threshold not crossed
    store.add(STM, "turn 12", 12, "s")
    first = store.consolidate("s")
    assert first is not None and first.tier == LTM
    assert backend.summaries[0] == [f"turn {i}" for i in range(1, 13)]
    for i in range(13, 24):
        store.add(STM, f"turn {i}", i, "s")
    assert store.consolidate("s") is None
    store.add(STM, "turn 24", 24, "s")
    second = store.consolidate("s")
    assert second is not None
    assert backend.summaries[1] == [f"turn {i}" for i in range(13, 25)]


def test_consolidation_summary_lands_in_ltm_and_is_retrievable():
    table = {"note": E1, "q": E1, "summary: note": E1}
    store = MemoryStore(VectorBackend(table))
    store.add(STM, "note", 12, "s")
    entry = store.consolidate("s")
    assert entry.text == "summary: note"
    out = store.retrieve("q", k=5, session="other")
    assert [e.text for e in out["relevant"]] == ["summary: note"]


def test_save_load_round_trip(tmp_path):
    store = MemoryStore(VectorBackend({"a": E1, "b": E2}))
    store.add(STM, "a", 1, "s")
    store.add(LTM, "b", 2, "s")
    path = tmp_path / "mem.jsonl"
    store.save(path)
    fresh = MemoryStore(VectorBackend({"a": E1}))
    fresh.load(path)
    assert [e.text for e in fresh.entries] == ["a", "b"]
    assert fresh.entries[1].tier == LTM
    assert np.allclose(fresh.entries[0].embedding, E1)


def test_retrieve_with_real_backend_is_deterministic():
    backend = ScriptedBackend()
    store = MemoryStore(backend)
    store.add(STM, "I worry about my evenings.", 1, "s")
    a = store.retrieve("worry evenings", session="s")
    b = store.retrieve("worry evenings", session="s")
    assert [e.id for e in a["relevant"]] == [e.id for e in b["relevant"]]
