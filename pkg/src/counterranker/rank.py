"""Embedding cache, exact top-K retrieval, and retrieve-and-rerank inference."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Argument
from .neural import NeuralModel, Variant, checkpoint_bytes, checkpoint_fingerprint
from .ranking import RankedList
from .textrep import tokenize

CACHE_MAGIC = b"ECAC"
CACHE_VERSION = 1


class CacheError(ValueError):
    """Cache file format problems or a model/cache fingerprint mismatch."""


@dataclass(frozen=True, eq=False)
class EmbeddingCache:
    """Per-candidate base and retrieval embeddings plus the producing model's
    checkpoint fingerprint."""

    ids: tuple[str, ...]
    base: np.ndarray  # (n, d_model) encoder outputs
    retrieval: np.ndarray  # (n, d_model) retrieval-head outputs
    fingerprint: str

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {cid: i for i, cid in enumerate(self.ids)}
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, candidate_id: str) -> bool:
        return candidate_id in self._index  # type: ignore[attr-defined]

    def row(self, candidate_id: str) -> int:
        return self._index[candidate_id]  # type: ignore[attr-defined]

    def base_embedding(self, candidate_id: str) -> np.ndarray:
        return self.base[self.row(candidate_id)]


def build_embedding_cache(model: NeuralModel, pool: Sequence[Argument]) -> EmbeddingCache:
    """Encode every pool candidate once; entries equal fresh encodings bit for bit."""
    if not model.variant.has_retrieval_path:
        raise CacheError(
            f"variant {model.variant.value} has no retrieval path to cache"
        )
    ids = []
    base_rows = []
    ret_rows = []
    for arg in pool:
        tokens = tokenize(arg.full_text())
        ids.append(arg.id)
        base_rows.append(model.encode_candidate_base(tokens))
        ret_rows.append(model.candidate_retrieval_embedding(tokens))
    fingerprint = checkpoint_fingerprint(checkpoint_bytes(model))
    return EmbeddingCache(
        ids=tuple(ids),
        base=np.stack(base_rows) if base_rows else np.zeros((0, 0)),
        retrieval=np.stack(ret_rows) if ret_rows else np.zeros((0, 0)),
        fingerprint=fingerprint,
    )


def retrieve_topk(
    cache: EmbeddingCache,
    point_embedding: np.ndarray,
    k: int,
    candidate_ids: Iterable[str] | None = None,
) -> RankedList:
    """Exact top-K by dot product against cached retrieval embeddings.

    ``candidate_ids`` restricts scoring to a subset (the caller's candidate
    pool); K larger than the pool returns the whole pool.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if candidate_ids is None:
        rows = np.arange(len(cache))
        ids = cache.ids
    else:
        ids = tuple(candidate_ids)
        rows = np.array([cache.row(cid) for cid in ids], dtype=np.int64)
    if rows.size == 0:
        return RankedList(entries=())
    scores = cache.retrieval[rows] @ np.asarray(point_embedding, dtype=np.float64)
    ranked = RankedList.from_scores(zip(ids, scores.tolist()))
    return ranked.truncated(k)


def rerank(
    model: NeuralModel,
    point: Argument,
    shortlist: Sequence[Argument],
    cache: EmbeddingCache | None = None,
) -> RankedList:
    """Reorder a shortlist by classification probability (descending).

    With a cache, candidate base embeddings are reused instead of re-encoded;
    the cross variant always re-encodes the joined pair.
    """
    if not model.variant.has_classification_path:
        raise CacheError(
            f"variant {model.variant.value} has no classification path for reranking"
        )
    point_tokens = tokenize(point.full_text())
    scores: list[tuple[str, float]] = []
    if model.variant is Variant.cross:
        for cand in shortlist:
            scores.append(
                (cand.id, model.cross_prob(point_tokens, tokenize(cand.full_text())))
            )
    else:
        u = model.encode_point_base(point_tokens)
        for cand in shortlist:
            if cache is not None and cand.id in cache:
                v = cache.base_embedding(cand.id)
            else:
                v = model.encode_candidate_base(tokenize(cand.full_text()))
            scores.append((cand.id, model.classification_prob(u, v)))
    return RankedList.from_scores(scores)


def retrieve_and_rerank(
    model: NeuralModel,
    cache: EmbeddingCache,
    point: Argument,
    pool: Sequence[Argument],
    k: int,
) -> RankedList:
    """Shortlist K candidates with the retrieval head, reorder with the
    classification head. Result length is min(K, |pool|)."""
    point_emb = model.point_retrieval_embedding(tokenize(point.full_text()))
    by_id: Mapping[str, Argument] = {a.id: a for a in pool}
    shortlist = retrieve_topk(cache, point_emb, k, candidate_ids=by_id.keys())
    return rerank(model, point, [by_id[cid] for cid in shortlist.ids()], cache)


# ---------------------------------------------------------------------------
# cache file format


def save_embedding_cache(cache: EmbeddingCache, path: str | Path) -> None:
    """Binary cache: magic ECAC, version, d_model, count, records, fingerprint."""
    path = Path(path)
    d_model = cache.base.shape[1] if len(cache) else 0
    with path.open("wb") as handle:
        handle.write(CACHE_MAGIC)
        handle.write(struct.pack("<IIQ", CACHE_VERSION, d_model, len(cache)))
        for i, cid in enumerate(cache.ids):
            raw = cid.encode("utf-8")
            handle.write(struct.pack("<H", len(raw)))
            handle.write(raw)
            handle.write(np.asarray(cache.base[i], dtype="<f8").tobytes())
            handle.write(np.asarray(cache.retrieval[i], dtype="<f8").tobytes())
        fp_raw = cache.fingerprint.encode("utf-8")
        handle.write(struct.pack("<H", len(fp_raw)))
        handle.write(fp_raw)


def load_embedding_cache(
    path: str | Path, expected_fingerprint: str | None = None
) -> EmbeddingCache:
    """Read a cache file; rejects a stale cache when the expected checkpoint
    fingerprint does not match the stored one."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 20 or data[:4] != CACHE_MAGIC:
        raise CacheError("bad magic: not an embedding cache")
    version, d_model, count = struct.unpack_from("<IIQ", data, 4)
    if version != CACHE_VERSION:
        raise CacheError(f"unsupported cache version {version}")
    offset = 20
    ids = []
    base_rows = []
    ret_rows = []
    vec_bytes = d_model * 8
    for _ in range(count):
        if offset + 2 > len(data):
            raise CacheError("truncated cache")
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + length + 2 * vec_bytes > len(data):
            raise CacheError("truncated cache")
        ids.append(data[offset : offset + length].decode("utf-8"))
        offset += length
        base_rows.append(np.frombuffer(data[offset : offset + vec_bytes], dtype="<f8"))
        offset += vec_bytes
        ret_rows.append(np.frombuffer(data[offset : offset + vec_bytes], dtype="<f8"))
        offset += vec_bytes
    if offset + 2 > len(data):
        raise CacheError("truncated cache")
    (fp_len,) = struct.unpack_from("<H", data, offset)
    offset += 2
    fingerprint = data[offset : offset + fp_len].decode("utf-8")
    offset += fp_len
    if offset != len(data):
        raise CacheError("trailing bytes after cache fingerprint")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise CacheError("stale cache: fingerprint does not match the checkpoint")
    n = len(ids)
    return EmbeddingCache(
        ids=tuple(ids),
        base=np.stack(base_rows) if n else np.zeros((0, d_model)),
        retrieval=np.stack(ret_rows) if n else np.zeros((0, d_model)),
        fingerprint=fingerprint,
    )
