"""Ranked candidate lists shared by every scorer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class RankedList:
    """Ordered (candidate id, score) pairs: scores non-increasing, unique ids,
    ties broken by ascending id."""

    entries: tuple[tuple[str, float], ...]

    @classmethod
    def from_scores(cls, pairs: Iterable[tuple[str, float]]) -> "RankedList":
        pairs = list(pairs)
        ids = [cid for cid, _ in pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate candidate id in ranking")
        ordered = sorted(pairs, key=lambda item: (-item[1], item[0]))
        return cls(entries=tuple(ordered))

    def ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.entries)

    def top(self) -> str | None:
        return self.entries[0][0] if self.entries else None

    def truncated(self, k: int) -> "RankedList":
        return RankedList(entries=self.entries[:k])

    def __len__(self) -> int:
        return len(self.entries)
