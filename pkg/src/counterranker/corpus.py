"""Argument data model, JSONL corpus loading, splitting, and candidate pools."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable


class CorpusError(ValueError):
    """Malformed corpus file or broken referential invariant."""


class Stance(str, Enum):
    pro = "pro"
    con = "con"

    def opposite(self) -> "Stance":
        return Stance.con if self is Stance.pro else Stance.pro


class Setting(str, Enum):
    """Candidate-filtering setting controlling which arguments may be retrieved."""

    sdoc = "sdoc"  # same debate, opposing side only
    sda = "sda"  # same debate, any other argument
    epc = "epc"  # entire portal, counters only
    epa = "epa"  # entire portal, all arguments


@dataclass(frozen=True)
class Argument:
    """One argumentative unit: a conclusion plus supporting premise text.

    ``counter_id`` links a point to its one correct counter-argument, which
    must live in the same debate on the opposite side.
    """

    id: str
    debate_id: str
    theme: str
    topic: str
    stance: Stance
    conclusion: str
    premise: str
    counter_id: str | None = None

    def full_text(self) -> str:
        return self.conclusion + " " + self.premise


@dataclass(frozen=True)
class Debate:
    debate_id: str
    theme: str
    topic: str
    argument_ids: tuple[str, ...]


class Corpus:
    """Immutable, order-preserving collection of arguments.

    Debates are derived by grouping arguments on ``debate_id``; construction
    validates id uniqueness, non-empty texts, debate metadata consistency and
    counter links (same debate, opposite stance).
    """

    def __init__(self, arguments: Iterable[Argument]):
        self.arguments: tuple[Argument, ...] = tuple(arguments)
        self._by_id: dict[str, Argument] = {}
        for arg in self.arguments:
            if arg.id in self._by_id:
                raise CorpusError(f"duplicate argument id: {arg.id!r}")
            if not arg.conclusion.strip() or not arg.premise.strip():
                raise CorpusError(f"argument {arg.id!r}: empty conclusion or premise")
            self._by_id[arg.id] = arg

        members: dict[str, list[str]] = {}
        meta: dict[str, tuple[str, str]] = {}
        for arg in self.arguments:
            members.setdefault(arg.debate_id, []).append(arg.id)
            key = (arg.theme, arg.topic)
            if meta.setdefault(arg.debate_id, key) != key:
                raise CorpusError(
                    f"debate {arg.debate_id!r}: inconsistent theme/topic metadata"
                )
        self.debates: dict[str, Debate] = {
            did: Debate(did, meta[did][0], meta[did][1], tuple(ids))
            for did, ids in members.items()
        }

        for arg in self.arguments:
            if arg.counter_id is None:
                continue
            counter = self._by_id.get(arg.counter_id)
            if counter is None:
                raise CorpusError(
                    f"argument {arg.id!r}: dangling counter_id {arg.counter_id!r}"
                )
            if counter.debate_id != arg.debate_id:
                raise CorpusError(
                    f"argument {arg.id!r}: counter {counter.id!r} is in another debate"
                )
            if counter.stance == arg.stance:
                raise CorpusError(
                    f"argument {arg.id!r}: counter {counter.id!r} has the same stance"
                )

    def __len__(self) -> int:
        return len(self.arguments)

    def __contains__(self, argument_id: str) -> bool:
        return argument_id in self._by_id

    def argument(self, argument_id: str) -> Argument:
        return self._by_id[argument_id]

    def counter_ids(self) -> frozenset[str]:
        """Ids of arguments referenced as someone's counter."""
        return frozenset(
            a.counter_id for a in self.arguments if a.counter_id is not None
        )

    def points_with_counter(self) -> tuple[Argument, ...]:
        return tuple(a for a in self.arguments if a.counter_id is not None)


_RECORD_KEYS = {
    "id",
    "debate_id",
    "theme",
    "topic",
    "stance",
    "conclusion",
    "premise",
    "counter_id",
}


def _parse_record(obj: object, line_no: int) -> Argument:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: record is not a JSON object")
    keys = set(obj)
    if keys != _RECORD_KEYS:
        missing = sorted(_RECORD_KEYS - keys)
        extra = sorted(keys - _RECORD_KEYS)
        raise CorpusError(
            f"line {line_no}: bad keys (missing {missing}, unexpected {extra})"
        )
    for key in ("id", "debate_id", "theme", "topic", "conclusion", "premise"):
        if not isinstance(obj[key], str):
            raise CorpusError(f"line {line_no}: field {key!r} must be a string")
    if obj["stance"] not in ("pro", "con"):
        raise CorpusError(f"line {line_no}: stance must be 'pro' or 'con'")
    counter = obj["counter_id"]
    if counter is not None and not isinstance(counter, str):
        raise CorpusError(f"line {line_no}: counter_id must be a string or null")
    return Argument(
        id=obj["id"],
        debate_id=obj["debate_id"],
        theme=obj["theme"],
        topic=obj["topic"],
        stance=Stance(obj["stance"]),
        conclusion=obj["conclusion"],
        premise=obj["premise"],
        counter_id=counter,
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus from JSONL (one argument object per line, UTF-8)."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    arguments: list[Argument] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            arguments.append(_parse_record(obj, line_no))
    if not arguments:
        raise CorpusError(f"empty corpus: {path}")
    return Corpus(arguments)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out in the JSONL interchange format."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for arg in corpus.arguments:
            record = {
                "id": arg.id,
                "debate_id": arg.debate_id,
                "theme": arg.theme,
                "topic": arg.topic,
                "stance": arg.stance.value,
                "conclusion": arg.conclusion,
                "premise": arg.premise,
                "counter_id": arg.counter_id,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def split_corpus(corpus: Corpus) -> tuple[Corpus, Corpus, Corpus]:
    """Split into train/validation/test by theme, 60/20/20 over debates.

    Within each theme the first ceil(0.6 D) debates (corpus order) go to
    train, the next ceil(0.2 D) to validation, the remainder to test.
    Debates are never split across partitions.
    """
    theme_debates: dict[str, list[str]] = {}
    for arg in corpus.arguments:
        debates = theme_debates.setdefault(arg.theme, [])
        if arg.debate_id not in debates:
            debates.append(arg.debate_id)

    train_ids: set[str] = set()
    val_ids: set[str] = set()
    test_ids: set[str] = set()
    for debates in theme_debates.values():
        d = len(debates)
        # integer ceilings: ceil(0.6 d) and ceil(0.2 d) without float drift
        n_train = -((-3 * d) // 5)
        n_val = -((-d) // 5)
        train_ids.update(debates[:n_train])
        val_ids.update(debates[n_train : n_train + n_val])
        test_ids.update(debates[n_train + n_val :])

    def pick(ids: set[str]) -> Corpus:
        return Corpus(a for a in corpus.arguments if a.debate_id in ids)

    return pick(train_ids), pick(val_ids), pick(test_ids)


def candidate_pool(
    corpus: Corpus, point: Argument, setting: Setting
) -> list[Argument]:
    """Candidates eligible as counters for ``point`` under ``setting``.

    The point itself is always excluded; order is corpus order.
    """
    if point.id not in corpus or corpus.argument(point.id) != point:
        raise CorpusError(f"point {point.id!r} not in corpus")
    if setting is Setting.sdoc:
        return [
            a
            for a in corpus.arguments
            if a.debate_id == point.debate_id
            and a.stance != point.stance
            and a.id != point.id
        ]
    if setting is Setting.sda:
        return [
            a
            for a in corpus.arguments
            if a.debate_id == point.debate_id and a.id != point.id
        ]
    if setting is Setting.epc:
        counters = corpus.counter_ids()
        return [a for a in corpus.arguments if a.id in counters and a.id != point.id]
    return [a for a in corpus.arguments if a.id != point.id]
