"""Two-tier semantic memory with embedding retrieval.

Short-term entries are session-local working context; long-term entries are
cross-session summaries produced by periodic consolidation.  Retrieval
returns two lists: the nearest entries under a distance threshold (relevance)
and a recency window of the most recent entries (context).  Distances are
Euclidean between unit-normalized embeddings, so orthogonal texts sit at
sqrt(2) and opposites at 2; the default threshold 1.5 admits the former and
rejects the latter.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyTextError

STM = "STM"
LTM = "LTM"

DEFAULT_K = 1
DEFAULT_DIST_THRES = 1.5
DEFAULT_CONTEXT_N = 30
DEFAULT_CONSOLIDATE_EVERY = 12


@dataclass
class MemoryEntry:
    id: str
    tier: str
    text: str
    embedding: np.ndarray
    turn_created: int
    session_id: str
    seq: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tier": self.tier,
            "text": self.text,
            "embedding": [float(x) for x in self.embedding],
            "turn_created": self.turn_created,
            "session_id": self.session_id,
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MemoryEntry":
        return cls(
            id=d["id"],
            tier=d["tier"],
            text=d["text"],
            embedding=np.asarray(d["embedding"], dtype=float),
            turn_created=d["turn_created"],
            session_id=d["session_id"],
            seq=d.get("seq", 0),
        )


def _entry_id(tier: str, text: str, turn: int, session: str) -> str:
    raw = f"{tier}|{session}|{turn}|{text}".encode("utf-8")
    return hashlib.md5(raw).hexdigest()[:16]


class MemoryStore:
    """Linear-scan memory store; fine for the few thousand entries a run produces."""

    def __init__(self, backend):
        self.backend = backend
        self.entries: list[MemoryEntry] = []
        self._last_consolidated: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, tier: str, text: str, turn: int, session: str) -> str:
        """Embed and store a text; the id is a stable hash of the inputs."""
        if tier not in (STM, LTM):
            raise ValueError(f"unknown memory tier {tier!r}")
        if not text or not text.strip():
            raise EmptyTextError("cannot store empty text")
        entry = MemoryEntry(
            id=_entry_id(tier, text, turn, session),
            tier=tier,
            text=text,
            embedding=self.backend.embed(text),
            turn_created=turn,
            session_id=session,
            seq=len(self.entries),
        )
        self.entries.append(entry)
        return entry.id

    def retrieve(
        self,
        query_text: str,
        k: int = DEFAULT_K,
        dist_thres: float = DEFAULT_DIST_THRES,
        context_n: int = DEFAULT_CONTEXT_N,
        session: str | None = None,
    ) -> dict[str, list[MemoryEntry]]:
        """Nearest entries within the threshold plus a recency window.

        When ``session`` is given, other sessions' short-term entries are
        invisible; long-term entries are always shared.  The relevant list is
        sorted by ascending distance with ties going to older entries; the
        context list holds the most recent entries in chronological order.
        """
        if k < 0 or context_n < 0:
            raise ValueError("k and context_n must be non-negative")
        visible = [
            e
            for e in self.entries
            if e.tier == LTM or session is None or e.session_id == session
        ]
        relevant: list[MemoryEntry] = []
        if k > 0 and visible and query_text.strip():
            q = self.backend.embed(query_text)
            scored = [
                (float(np.linalg.norm(e.embedding - q)), e.turn_created, e.seq, e)
                for e in visible
            ]
            scored.sort(key=lambda t: (t[0], t[1], t[2]))
            relevant = [e for d, _, _, e in scored[:k] if d <= dist_thres]
        recent = sorted(visible, key=lambda e: (e.turn_created, e.seq))
        context = recent[-context_n:] if context_n > 0 else []
        return {"relevant": relevant, "context": context}

    def consolidate(
        self, session: str, every_n_turns: int = DEFAULT_CONSOLIDATE_EVERY
    ) -> MemoryEntry | None:
        """Fold the latest block of short-term entries into one long-term summary.

        Fires when the session's highest stored turn reaches the next multiple
        of ``every_n_turns`` since the previous consolidation; otherwise no-op.
        """
        if every_n_turns <= 0:
            raise ValueError("every_n_turns must be positive")
        stm = [e for e in self.entries if e.tier == STM and e.session_id == session]
        if not stm:
            return None
        turn_count = max(e.turn_created for e in stm)
        last = self._last_consolidated.get(session, 0)
        if turn_count < last + every_n_turns:
            return None
        block = [e for e in stm if last < e.turn_created <= turn_count]
        summary = self.backend.summarize([e.text for e in block])
        self._last_consolidated[session] = turn_count
        entry_id = self.add(LTM, summary, turn_count, session)
        return next(e for e in reversed(self.entries) if e.id == entry_id)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")

    def load(self, path: str | Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self.entries.append(MemoryEntry.from_dict(json.loads(line)))
