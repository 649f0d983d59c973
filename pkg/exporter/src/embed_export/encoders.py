"""Document encoders for the export pipeline.

``hash:<dim>`` is a dependency-free deterministic fallback: tokens are
feature-hashed into signed buckets and the count vector is L2-normalized.
``st:<model>`` loads a sentence-transformers model when one is available
locally; load failures surface as ExportError.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, Sequence

import numpy as np

from .store import ExportError

_TOKEN_RE = re.compile(r"[^\W_]+")

Encoder = Callable[[Sequence[str]], np.ndarray]


def _hash_encoder(dim: int) -> Encoder:
    def bucket(token: str) -> tuple[int, float]:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        idx = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return idx, sign

    def encode(texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), dim), dtype=np.float32)
        for row, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                idx, sign = bucket(token)
                out[row, idx] += sign
            norm = float(np.linalg.norm(out[row]))
            if norm > 0:
                out[row] /= norm
        return out

    return encode


def _sentence_transformer_encoder(model_name: str) -> tuple[Encoder, int]:
    try:
        from sentence_transformers import SentenceTransformer

        model = SentenceTransformer(model_name)
    except Exception as exc:  # import error, missing weights, offline hub
        raise ExportError(f"encoder load failure: {model_name} ({exc})") from exc

    def encode(texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float32,
        )

    dim = int(model.get_sentence_embedding_dimension())
    return encode, dim


def resolve_encoder(encoder_id: str) -> tuple[Encoder, int]:
    """Encoder callable and its output dimension from an identifier string."""
    if encoder_id.startswith("hash:"):
        try:
            dim = int(encoder_id.split(":", 1)[1])
        except ValueError as exc:
            raise ExportError(f"bad hash encoder id: {encoder_id!r}") from exc
        if dim < 1:
            raise ExportError(f"bad hash encoder id: {encoder_id!r}")
        return _hash_encoder(dim), dim
    if encoder_id.startswith("st:"):
        return _sentence_transformer_encoder(encoder_id.split(":", 1)[1])
    raise ExportError(f"unknown encoder id: {encoder_id!r} (use hash:<dim> or st:<model>)")
