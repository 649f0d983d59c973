"""The 20-dimensional point/candidate feature vector and z-score standardization.

Five metric groups, each aggregated four ways (min, max, product, sum) over
the conclusion-side and premise-side metric values:

    x1-x4    term-frequency Manhattan similarity
    x5-x8    embedding Earth-Mover similarity
    x9-x12   term-frequency cosine similarity
    x13-x16  BM25 score (point part as query, candidate as document)
    x17-x20  document-embedding cosine (precomputed "doc:<id>" vectors)

The ordering is frozen; tests pin it with a golden vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Argument, Corpus, Setting, candidate_pool
from .simdis import (
    AGG_ORDER,
    Bm25Stats,
    aggregate,
    bm25_score,
    build_bm25_stats,
    cosine_tf_sim,
    emb_cosine,
    manhattan_sim,
    wmd_sim,
)
from .textrep import EmbeddingStore, VectorBag, doc_embedding_bag, term_frequency, tokenize

N_FEATURES = 20
DOC_KEY_PREFIX = "doc:"

METRIC_GROUPS = ("tf_manhattan", "emb_earthmover", "tf_cosine", "bm25", "doc_cosine")
FEATURE_NAMES = tuple(
    f"{group}_{agg.value}" for group in METRIC_GROUPS for agg in AGG_ORDER
)

FEATURE_CACHE_MAGIC = b"FEAT"
FEATURE_CACHE_VERSION = 1


class FeatureError(ValueError):
    """Missing context (for example a document embedding) during extraction."""


class TextCache:
    """Memoized tokenizations, tf vectors, and embedding bags per argument part."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self._tokens: dict[tuple[str, str], list[str]] = {}
        self._tf: dict[tuple[str, str], dict[str, float]] = {}
        self._bags: dict[tuple[str, str], VectorBag] = {}

    @staticmethod
    def _text(arg: Argument, part: str) -> str:
        if part == "cl":
            return arg.conclusion
        if part == "pr":
            return arg.premise
        return arg.full_text()

    def tokens(self, arg: Argument, part: str) -> list[str]:
        key = (arg.id, part)
        if key not in self._tokens:
            self._tokens[key] = tokenize(self._text(arg, part))
        return self._tokens[key]

    def tf(self, arg: Argument, part: str) -> dict[str, float]:
        key = (arg.id, part)
        if key not in self._tf:
            tokens = self.tokens(arg, part)
            self._tf[key] = term_frequency(tokens) if tokens else {}
        return self._tf[key]

    def bag(self, arg: Argument, part: str) -> VectorBag:
        key = (arg.id, part)
        if key not in self._bags:
            self._bags[key] = doc_embedding_bag(self.tokens(arg, part), self.store)
        return self._bags[key]


@dataclass
class FeatureContext:
    """Everything extract_features needs: vectors, collection stats, caches."""

    store: EmbeddingStore
    bm25: Bm25Stats
    cache: TextCache | None = None

    def __post_init__(self) -> None:
        if self.cache is None:
            self.cache = TextCache(self.store)


def _doc_vector(store: EmbeddingStore, arg: Argument) -> np.ndarray:
    key = DOC_KEY_PREFIX + arg.id
    if key not in store:
        raise FeatureError(f"missing document embedding {key!r}")
    return store.get(key)


def extract_features(
    point: Argument, candidate: Argument, ctx: FeatureContext
) -> np.ndarray:
    """Feature vector for a (point, candidate) pair; see module docstring.

    The point is decomposed into conclusion and premise; the candidate is
    never decomposed. The document-embedding group compares whole-argument
    vectors, so both sides of its aggregation are the same cosine.
    """
    cache = ctx.cache
    assert cache is not None
    cand_tokens = cache.tokens(candidate, "full")
    cand_tf = cache.tf(candidate, "full")
    cand_bag = cache.bag(candidate, "full")

    pairs: list[tuple[float, float]] = []
    pairs.append(
        (
            manhattan_sim(cache.tf(point, "cl"), cand_tf),
            manhattan_sim(cache.tf(point, "pr"), cand_tf),
        )
    )
    pairs.append(
        (
            wmd_sim(cache.bag(point, "cl"), cand_bag),
            wmd_sim(cache.bag(point, "pr"), cand_bag),
        )
    )
    pairs.append(
        (
            cosine_tf_sim(cache.tf(point, "cl"), cand_tf),
            cosine_tf_sim(cache.tf(point, "pr"), cand_tf),
        )
    )
    pairs.append(
        (
            bm25_score(cache.tokens(point, "cl"), cand_tokens, ctx.bm25),
            bm25_score(cache.tokens(point, "pr"), cand_tokens, ctx.bm25),
        )
    )
    doc_cos = emb_cosine(_doc_vector(ctx.store, point), _doc_vector(ctx.store, candidate))
    pairs.append((doc_cos, doc_cos))

    values = np.empty(N_FEATURES, dtype=np.float64)
    i = 0
    for val_cl, val_pr in pairs:
        for agg in AGG_ORDER:
            values[i] = aggregate(val_cl, val_pr, agg)
            i += 1
    if not np.isfinite(values).all():
        raise FeatureError("non-finite feature value")
    return values


class FeaturePipeline:
    """Builds per-point feature contexts for one corpus and setting.

    BM25 statistics come from the candidate collection of the active
    setting: the whole corpus for epa, counters for epc, and the point's
    debate (or its opposing side) for sda/sdoc. Stats are cached per
    collection; text caches are shared across points.
    """

    def __init__(self, corpus: Corpus, setting: Setting, store: EmbeddingStore):
        self.corpus = corpus
        self.setting = setting
        self.store = store
        self.cache = TextCache(store)
        self._stats: dict[str, Bm25Stats] = {}

    def _stats_key(self, point: Argument) -> str:
        if self.setting is Setting.sdoc:
            return f"debate:{point.debate_id}:{point.stance.value}"
        if self.setting is Setting.sda:
            return f"debate:{point.debate_id}"
        return self.setting.value

    def _collection(self, point: Argument) -> list[Argument]:
        if self.setting is Setting.sdoc:
            return [
                a
                for a in self.corpus.arguments
                if a.debate_id == point.debate_id and a.stance != point.stance
            ]
        if self.setting is Setting.sda:
            return [a for a in self.corpus.arguments if a.debate_id == point.debate_id]
        if self.setting is Setting.epc:
            counters = self.corpus.counter_ids()
            return [a for a in self.corpus.arguments if a.id in counters]
        return list(self.corpus.arguments)

    def context_for(self, point: Argument) -> FeatureContext:
        key = self._stats_key(point)
        if key not in self._stats:
            docs = [self.cache.tokens(a, "full") for a in self._collection(point)]
            self._stats[key] = build_bm25_stats(docs)
        return FeatureContext(self.store, self._stats[key], self.cache)

    def pool(self, point: Argument) -> list[Argument]:
        return candidate_pool(self.corpus, point, self.setting)


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-scoring parameters fit on training features."""

    mean: np.ndarray
    std: np.ndarray


def fit_standardizer(train_features: Sequence[np.ndarray] | np.ndarray) -> Standardizer:
    """Mean and population standard deviation per dimension.

    Near-constant dimensions (std < 1e-12) are clamped to 1 so the transform
    stays finite.
    """
    matrix = np.asarray(train_features, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("fit_standardizer requires at least 2 feature vectors")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(mean=mean, std=std)


def apply_standardizer(s: Standardizer, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - s.mean) / s.std


def invert_standardizer(s: Standardizer, z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) * s.std + s.mean


def standardizer_to_dict(s: Standardizer) -> dict:
    return {"version": 1, "mean": s.mean.tolist(), "std": s.std.tolist()}


def standardizer_from_dict(obj: dict) -> Standardizer:
    return Standardizer(
        mean=np.asarray(obj["mean"], dtype=np.float64),
        std=np.asarray(obj["std"], dtype=np.float64),
    )


@dataclass(frozen=True)
class FeatureRow:
    point_id: str
    candidate_id: str
    label: int
    features: np.ndarray


def save_feature_cache(rows: Iterable[FeatureRow], path: str | Path) -> None:
    """Binary feature cache: header FEAT, then one record per pair."""
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(FEATURE_CACHE_MAGIC)
        handle.write(struct.pack("<II", FEATURE_CACHE_VERSION, N_FEATURES))
        for row in rows:
            for ident in (row.point_id, row.candidate_id):
                raw = ident.encode("utf-8")
                handle.write(struct.pack("<H", len(raw)))
                handle.write(raw)
            handle.write(struct.pack("<B", row.label))
            handle.write(np.asarray(row.features, dtype="<f8").tobytes())


def load_feature_cache(path: str | Path) -> list[FeatureRow]:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != FEATURE_CACHE_MAGIC:
        raise FeatureError("bad magic: not a feature cache")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != FEATURE_CACHE_VERSION or dim != N_FEATURES:
        raise FeatureError(f"unsupported feature cache (version {version}, dim {dim})")
    offset = 12
    rows: list[FeatureRow] = []
    vec_bytes = dim * 8
    while offset < len(data):
        ids = []
        for _ in range(2):
            if offset + 2 > len(data):
                raise FeatureError("truncated feature cache")
            (length,) = struct.unpack_from("<H", data, offset)
            offset += 2
            if offset + length > len(data):
                raise FeatureError("truncated feature cache")
            ids.append(data[offset : offset + length].decode("utf-8"))
            offset += length
        if offset + 1 + vec_bytes > len(data):
            raise FeatureError("truncated feature cache")
        label = data[offset]
        offset += 1
        vec = np.frombuffer(data[offset : offset + vec_bytes], dtype="<f8").copy()
        offset += vec_bytes
        rows.append(FeatureRow(ids[0], ids[1], int(label), vec))
    return rows
