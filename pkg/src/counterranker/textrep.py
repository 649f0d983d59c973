"""Tokenization, term-frequency vectors, and the file-backed embedding store."""

from __future__ import annotations

import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

# Maximal runs of Unicode letters/digits; underscore and punctuation split.
_TOKEN_RE = re.compile(r"[^\W_]+")

STORE_MAGIC = b"EMBS"
STORE_VERSION = 1


class StoreFormatError(ValueError):
    """Bad magic/version, truncation, or duplicate keys in a store file."""


def tokenize(text: str) -> list[str]:
    """Lowercased maximal letter/digit runs, in order. Punctuation is dropped."""
    return _TOKEN_RE.findall(text.lower())


def term_frequency(tokens: Sequence[str]) -> dict[str, float]:
    """L1-normalized term frequencies. Raises on an empty token sequence."""
    if not tokens:
        raise ValueError("term_frequency: empty token sequence")
    total = len(tokens)
    return {tok: count / total for tok, count in Counter(tokens).items()}


class EmbeddingStore:
    """Immutable map from key (token or document id) to a fixed-dim vector.

    Vectors are float32, matching the on-disk record format bit for bit.
    """

    def __init__(self, dim: int, entries: Mapping[str, np.ndarray]):
        if dim <= 0:
            raise ValueError("store dim must be positive")
        self.dim = int(dim)
        self._entries: dict[str, np.ndarray] = {}
        for key, vec in entries.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise ValueError(
                    f"vector for key {key!r} has shape {arr.shape}, expected ({self.dim},)"
                )
            arr.setflags(write=False)
            self._entries[key] = arr

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> np.ndarray:
        return self._entries[key]

    def keys(self):
        return self._entries.keys()


def save_embedding_store(store: EmbeddingStore, path: str | Path) -> None:
    """Write the little-endian binary store format (magic EMBS, version 1)."""
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(STORE_MAGIC)
        handle.write(struct.pack("<IIQ", STORE_VERSION, store.dim, len(store)))
        for key in store.keys():
            raw = key.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"key too long: {key[:32]!r}...")
            handle.write(struct.pack("<H", len(raw)))
            handle.write(raw)
            handle.write(store.get(key).tobytes())


def load_embedding_store(path: str | Path) -> EmbeddingStore:
    """Read the binary store format written by :func:`save_embedding_store`."""
    path = Path(path)
    if not path.exists():
        raise StoreFormatError(f"store file not found: {path}")
    data = path.read_bytes()
    if len(data) < 20 or data[:4] != STORE_MAGIC:
        raise StoreFormatError("bad magic: not an embedding store")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != STORE_VERSION:
        raise StoreFormatError(f"unsupported store version {version}")
    offset = 20
    entries: dict[str, np.ndarray] = {}
    vec_bytes = dim * 4
    for _ in range(count):
        if offset + 2 > len(data):
            raise StoreFormatError("truncated store")
        (key_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + key_len + vec_bytes > len(data):
            raise StoreFormatError("truncated store")
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        if key in entries:
            raise StoreFormatError(f"duplicate key in store: {key!r}")
        vec = np.frombuffer(data[offset : offset + vec_bytes], dtype="<f4").copy()
        offset += vec_bytes
        entries[key] = vec
    if offset != len(data):
        raise StoreFormatError("trailing bytes after last record")
    return EmbeddingStore(dim, entries)


def load_word_vectors_text(path: str | Path) -> EmbeddingStore:
    """Ingest the conventional text format: ``token v1 v2 ... vdim`` per line."""
    path = Path(path)
    if not path.exists():
        raise StoreFormatError(f"word-vector file not found: {path}")
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                if not line.strip():
                    continue
                raise StoreFormatError(f"line {line_no}: malformed word-vector line")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise StoreFormatError(
                    f"line {line_no}: expected {dim} values, found {len(values)}"
                )
            if token in entries:
                raise StoreFormatError(f"line {line_no}: duplicate token {token!r}")
            try:
                entries[token] = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise StoreFormatError(
                    f"line {line_no}: non-numeric vector component"
                ) from exc
    if dim is None:
        raise StoreFormatError(f"empty word-vector file: {path}")
    return EmbeddingStore(dim, entries)


@dataclass(frozen=True)
class VectorBag:
    """Weighted bag of vectors; weights sum to 1 unless the bag is empty."""

    vectors: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)

    def is_empty(self) -> bool:
        return self.weights.size == 0

    def __len__(self) -> int:
        return int(self.weights.size)


_EMPTY_BAG = VectorBag(np.zeros((0, 0)), np.zeros(0))


def doc_embedding_bag(tokens: Sequence[str], store: EmbeddingStore) -> VectorBag:
    """One entry per distinct in-vocabulary token, tf-weighted and renormalized.

    Out-of-vocabulary tokens are dropped; an empty bag is a legal degenerate
    value handled by the metric layer.
    """
    counts = Counter(tokens)
    kept = [(tok, n) for tok, n in counts.items() if tok in store]
    if not kept:
        return _EMPTY_BAG
    total = sum(n for _, n in kept)
    vectors = np.stack([store.get(tok) for tok, _ in kept]).astype(np.float64)
    weights = np.array([n / total for _, n in kept], dtype=np.float64)
    return VectorBag(vectors, weights)
