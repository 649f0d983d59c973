"""Export embedding-store files for the counter-argument retrieval engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import resolve_encoder
from .store import ExportError, read_corpus_texts, read_word_vectors_text, write_store

__version__ = "0.1.0"

WORD_VECTORS = "word_vectors"
DOCUMENT_VECTORS = "document_vectors"
DOC_KEY_PREFIX = "doc:"


@dataclass(frozen=True)
class ExportManifest:
    """What to export: inputs, output store path, mode, encoder, dimension.

    ``dim`` is inferred when left at 0 (from the first text vector, or from
    the encoder's output width).
    """

    input_path: str
    output_path: str
    mode: str = WORD_VECTORS
    encoder: str = "hash:64"
    corpus_path: str | None = None
    dim: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (WORD_VECTORS, DOCUMENT_VECTORS):
            raise ExportError(f"unknown mode: {self.mode!r}")


def convert_word_vectors(manifest: ExportManifest) -> int:
    """Text word vectors -> binary store; returns the entry count."""
    entries = list(read_word_vectors_text(manifest.input_path))
    dim = entries[0][1].size
    if manifest.dim and manifest.dim != dim:
        raise ExportError(
            f"manifest dim {manifest.dim} does not match input dim {dim}"
        )
    return write_store(entries, dim, manifest.output_path)


def export_document_vectors(manifest: ExportManifest) -> int:
    """One vector per corpus argument id, stored under ``doc:<id>``."""
    corpus_path = manifest.corpus_path or manifest.input_path
    texts = read_corpus_texts(corpus_path)
    encode, dim = resolve_encoder(manifest.encoder)
    if manifest.dim and manifest.dim != dim:
        raise ExportError(
            f"manifest dim {manifest.dim} does not match encoder dim {dim}"
        )
    vectors = encode([text for _, text in texts])
    if vectors.shape != (len(texts), dim):
        raise ExportError(
            f"encoder produced shape {vectors.shape}, expected ({len(texts)}, {dim})"
        )
    entries = [
        (DOC_KEY_PREFIX + ident, np.asarray(vectors[i], dtype=np.float32))
        for i, (ident, _) in enumerate(texts)
    ]
    return write_store(entries, dim, manifest.output_path)


def run_export(manifest: ExportManifest) -> int:
    if manifest.mode == WORD_VECTORS:
        return convert_word_vectors(manifest)
    return export_document_vectors(manifest)
