"""Writer for the engine's binary embedding-store format, plus readers for
the text word-vector convention and the corpus JSONL interchange format.

Binary layout (little-endian): magic ``EMBS``, u32 version=1, u32 dim,
u64 count, then per record [u16 key byte length, key UTF-8, dim x f32].
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

MAGIC = b"EMBS"
VERSION = 1


class ExportError(ValueError):
    """Malformed inputs or inconsistent vectors during export."""


def write_store(
    entries: Iterable[tuple[str, np.ndarray]], dim: int, path: str | Path
) -> int:
    """Stream (key, vector) pairs into the binary store; returns the count."""
    entries = list(entries)
    seen: set[str] = set()
    for key, vec in entries:
        if key in seen:
            raise ExportError(f"duplicate key: {key!r}")
        seen.add(key)
        if np.asarray(vec).shape != (dim,):
            raise ExportError(
                f"vector for {key!r} has shape {np.asarray(vec).shape}, expected ({dim},)"
            )
    path = Path(path)
    with path.open("wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<IIQ", VERSION, dim, len(entries)))
        for key, vec in entries:
            raw = key.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ExportError(f"key too long: {key[:32]!r}...")
            handle.write(struct.pack("<H", len(raw)))
            handle.write(raw)
            handle.write(np.asarray(vec, dtype="<f4").tobytes())
    return len(entries)


def read_word_vectors_text(path: str | Path) -> Iterator[tuple[str, np.ndarray]]:
    """Parse ``token v1 v2 ... vdim`` lines, one vector per line."""
    path = Path(path)
    if not path.exists():
        raise ExportError(f"input file not found: {path}")
    dim: int | None = None
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                raise ExportError(f"line {line_no}: malformed word-vector line")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ExportError(
                    f"line {line_no}: expected {dim} values, found {len(values)}"
                )
            if token in seen:
                raise ExportError(f"line {line_no}: duplicate token {token!r}")
            seen.add(token)
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise ExportError(f"line {line_no}: non-numeric component") from exc
            yield token, vec
    if dim is None:
        raise ExportError(f"empty word-vector file: {path}")


def read_corpus_texts(path: str | Path) -> list[tuple[str, str]]:
    """(argument id, full text) pairs from the corpus JSONL format."""
    path = Path(path)
    if not path.exists():
        raise ExportError(f"corpus file not found: {path}")
    out: list[tuple[str, str]] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            try:
                ident = record["id"]
                text = record["conclusion"] + " " + record["premise"]
            except (KeyError, TypeError) as exc:
                raise ExportError(f"line {line_no}: missing argument text") from exc
            if not str(record["conclusion"]).strip() or not str(record["premise"]).strip():
                raise ExportError(f"line {line_no}: missing argument text")
            out.append((str(ident), text))
    if not out:
        raise ExportError(f"empty corpus: {path}")
    return out
