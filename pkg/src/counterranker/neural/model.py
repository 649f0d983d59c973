"""Trainable scorers: a small mean-pool encoder plus retrieval and
classification heads, assembled into the bi / cross / unipolar / bipolar
variants. All math is plain numpy; gradients live in ``training``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

UNK_TOKEN = "<unk>"
SEP_TOKEN = "<sep>"
UNK_INDEX = 0
SEP_INDEX = 1

CHECKPOINT_VERSION = 1


class Variant(str, Enum):
    bi = "bi"
    cross = "cross"
    unipolar_ret = "unipolar-ret"
    unipolar_cls = "unipolar-cls"
    bipolar = "bipolar"
    bipolar_no_absdiff = "bipolar-no-absdiff"
    bipolar_no_joint = "bipolar-no-joint"

    @property
    def has_retrieval_path(self) -> bool:
        return self in (
            Variant.bi,
            Variant.unipolar_ret,
            Variant.bipolar,
            Variant.bipolar_no_absdiff,
            Variant.bipolar_no_joint,
        )

    @property
    def has_classification_path(self) -> bool:
        return self in (
            Variant.cross,
            Variant.unipolar_cls,
            Variant.bipolar,
            Variant.bipolar_no_absdiff,
            Variant.bipolar_no_joint,
        )

    @property
    def trains_pairwise(self) -> bool:
        """Triplet-trained variants; the rest consume labeled pairs."""
        return self in (
            Variant.bi,
            Variant.unipolar_ret,
            Variant.bipolar,
            Variant.bipolar_no_absdiff,
        )

    @property
    def uses_absdiff(self) -> bool:
        return self in (Variant.unipolar_cls, Variant.bipolar, Variant.bipolar_no_joint)


def build_vocab(texts: Sequence[str], tokenizer) -> dict[str, int]:
    """Token -> index map with reserved UNK and SEP rows at 0 and 1."""
    seen: set[str] = set()
    for text in texts:
        seen.update(tokenizer(text))
    vocab = {UNK_TOKEN: UNK_INDEX, SEP_TOKEN: SEP_INDEX}
    for token in sorted(seen):
        if token not in vocab:
            vocab[token] = len(vocab)
    return vocab


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[-1], shape[0]
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, scale, size=shape)


@dataclass
class TinyEncoder:
    """Mean-pooled token embeddings, a linear projection, and tanh."""

    vocab: dict[str, int]
    emb: np.ndarray  # (V, d_emb)
    w_proj: np.ndarray  # (d_model, d_emb)
    b_proj: np.ndarray  # (d_model,)

    @classmethod
    def init(
        cls, vocab: dict[str, int], d_emb: int, d_model: int, rng: np.random.Generator
    ) -> "TinyEncoder":
        emb = rng.normal(0.0, 0.1, size=(len(vocab), d_emb))
        return cls(
            vocab=vocab,
            emb=emb,
            w_proj=_glorot(rng, (d_model, d_emb)),
            b_proj=np.zeros(d_model),
        )

    @property
    def d_model(self) -> int:
        return self.w_proj.shape[0]

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array(
            [self.vocab.get(tok, UNK_INDEX) for tok in tokens], dtype=np.int64
        )


def encode(enc: TinyEncoder, tokens: Sequence[str]) -> np.ndarray:
    """tanh(W mean_i Emb[t_i] + b); raises on empty input."""
    if len(tokens) == 0:
        raise ValueError("encode: empty text")
    ids = enc.token_ids(tokens)
    pooled = enc.emb[ids].mean(axis=0)
    return np.tanh(enc.w_proj @ pooled + enc.b_proj)


def encode_ids(enc: TinyEncoder, ids: np.ndarray) -> np.ndarray:
    if ids.size == 0:
        raise ValueError("encode: empty text")
    pooled = enc.emb[ids].mean(axis=0)
    return np.tanh(enc.w_proj @ pooled + enc.b_proj)


@dataclass
class RetrievalHead:
    w: np.ndarray  # (d_model, d_model)
    b: np.ndarray  # (d_model,)

    @classmethod
    def init(cls, d_model: int, rng: np.random.Generator) -> "RetrievalHead":
        return cls(w=_glorot(rng, (d_model, d_model)), b=np.zeros(d_model))

    def project(self, z: np.ndarray) -> np.ndarray:
        return self.w @ z + self.b


def retrieval_score(head: RetrievalHead, u: np.ndarray, v: np.ndarray) -> float:
    """dot(W u + b, W v + b) on base embeddings."""
    return float(head.project(u) @ head.project(v))


def layer_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    mu = x.mean()
    var = x.var()
    return gamma * (x - mu) / np.sqrt(var + eps) + beta


@dataclass
class ClassificationHead:
    """layer-norm over the fused vector, then a 2-way linear + softmax."""

    gamma: np.ndarray  # (fusion_dim,)
    beta: np.ndarray  # (fusion_dim,)
    w: np.ndarray  # (2, fusion_dim)
    b: np.ndarray  # (2,)

    @classmethod
    def init(
        cls, d_model: int, rng: np.random.Generator, absdiff: bool = True
    ) -> "ClassificationHead":
        fusion = (3 if absdiff else 2) * d_model
        return cls(
            gamma=np.ones(fusion),
            beta=np.zeros(fusion),
            w=_glorot(rng, (2, fusion)),
            b=np.zeros(2),
        )

    @property
    def fusion_dim(self) -> int:
        return self.gamma.size

    def fuse(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.fusion_dim == 3 * u.size:
            return np.concatenate([u, v, np.abs(u - v)])
        return np.concatenate([u, v])


def _softmax2(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    expv = np.exp(shifted)
    return expv / expv.sum()


def classification_prob(head: ClassificationHead, u: np.ndarray, v: np.ndarray) -> float:
    """Positive-class probability from softmax(linear(layer_norm(fusion)))."""
    normed = layer_norm(head.fuse(u, v), head.gamma, head.beta)
    return float(_softmax2(head.w @ normed + head.b)[1])


@dataclass
class CrossHead:
    """2-way linear + softmax on the embedding of the joined sequence."""

    w: np.ndarray  # (2, d_model)
    b: np.ndarray  # (2,)

    @classmethod
    def init(cls, d_model: int, rng: np.random.Generator) -> "CrossHead":
        return cls(w=_glorot(rng, (2, d_model)), b=np.zeros(2))


@dataclass
class NeuralModel:
    """One scorer variant with its encoder(s) and head(s).

    ``bipolar-no-joint`` is a bundle: retrieval ops delegate to a separately
    trained unipolar-ret model, classification ops to a unipolar-cls model.
    """

    variant: Variant
    encoder: TinyEncoder | None = None
    encoder_c: TinyEncoder | None = None  # candidate-side encoder (bi only)
    ret_head: RetrievalHead | None = None
    cls_head: ClassificationHead | None = None
    cross_head: CrossHead | None = None
    ret_part: "NeuralModel | None" = None  # bipolar-no-joint bundle
    cls_part: "NeuralModel | None" = None

    # --- encoding -----------------------------------------------------

    def _point_encoder(self) -> TinyEncoder:
        if self.variant is Variant.bipolar_no_joint:
            raise ValueError("bundle variant: pick a path first")
        assert self.encoder is not None
        return self.encoder

    def _candidate_encoder(self) -> TinyEncoder:
        if self.variant is Variant.bi:
            assert self.encoder_c is not None
            return self.encoder_c
        return self._point_encoder()

    def encode_point_base(self, tokens: Sequence[str]) -> np.ndarray:
        if self.variant is Variant.bipolar_no_joint:
            assert self.cls_part is not None
            return self.cls_part.encode_point_base(tokens)
        return encode(self._point_encoder(), tokens)

    def encode_candidate_base(self, tokens: Sequence[str]) -> np.ndarray:
        if self.variant is Variant.bipolar_no_joint:
            assert self.cls_part is not None
            return self.cls_part.encode_candidate_base(tokens)
        return encode(self._candidate_encoder(), tokens)

    def point_retrieval_embedding(self, tokens: Sequence[str]) -> np.ndarray:
        if not self.variant.has_retrieval_path:
            raise ValueError(f"variant {self.variant.value} has no retrieval path")
        if self.variant is Variant.bipolar_no_joint:
            assert self.ret_part is not None
            return self.ret_part.point_retrieval_embedding(tokens)
        z = encode(self._point_encoder(), tokens)
        return self.ret_head.project(z) if self.ret_head is not None else z

    def candidate_retrieval_embedding(self, tokens: Sequence[str]) -> np.ndarray:
        if not self.variant.has_retrieval_path:
            raise ValueError(f"variant {self.variant.value} has no retrieval path")
        if self.variant is Variant.bipolar_no_joint:
            assert self.ret_part is not None
            return self.ret_part.candidate_retrieval_embedding(tokens)
        z = encode(self._candidate_encoder(), tokens)
        return self.ret_head.project(z) if self.ret_head is not None else z

    # --- scoring ------------------------------------------------------

    def classification_prob(self, u: np.ndarray, v: np.ndarray) -> float:
        if not self.variant.has_classification_path or self.variant is Variant.cross:
            raise ValueError(f"variant {self.variant.value} has no pair classification head")
        if self.variant is Variant.bipolar_no_joint:
            assert self.cls_part is not None
            return self.cls_part.classification_prob(u, v)
        assert self.cls_head is not None
        return classification_prob(self.cls_head, u, v)

    def cross_prob(self, point_tokens: Sequence[str], cand_tokens: Sequence[str]) -> float:
        if self.variant is not Variant.cross:
            raise ValueError("cross_prob requires the cross variant")
        enc = self._point_encoder()
        ids = np.concatenate(
            [enc.token_ids(point_tokens), [SEP_INDEX], enc.token_ids(cand_tokens)]
        ).astype(np.int64)
        z = encode_ids(enc, ids)
        assert self.cross_head is not None
        return float(_softmax2(self.cross_head.w @ z + self.cross_head.b)[1])

    def pair_score(self, point_tokens: Sequence[str], cand_tokens: Sequence[str]) -> float:
        """Classification score for a pair, whatever the variant's head is."""
        if self.variant is Variant.cross:
            return self.cross_prob(point_tokens, cand_tokens)
        u = self.encode_point_base(point_tokens)
        v = self.encode_candidate_base(cand_tokens)
        return self.classification_prob(u, v)

    # --- parameters ---------------------------------------------------

    def named_params(self) -> dict[str, np.ndarray]:
        if self.variant is Variant.bipolar_no_joint:
            assert self.ret_part is not None and self.cls_part is not None
            params = {f"ret.{k}": v for k, v in self.ret_part.named_params().items()}
            params.update(
                {f"cls.{k}": v for k, v in self.cls_part.named_params().items()}
            )
            return params
        params: dict[str, np.ndarray] = {}
        assert self.encoder is not None
        params["emb"] = self.encoder.emb
        params["proj_w"] = self.encoder.w_proj
        params["proj_b"] = self.encoder.b_proj
        if self.encoder_c is not None:
            params["emb_c"] = self.encoder_c.emb
            params["proj_w_c"] = self.encoder_c.w_proj
            params["proj_b_c"] = self.encoder_c.b_proj
        if self.ret_head is not None:
            params["ret_w"] = self.ret_head.w
            params["ret_b"] = self.ret_head.b
        if self.cls_head is not None:
            params["cls_gamma"] = self.cls_head.gamma
            params["cls_beta"] = self.cls_head.beta
            params["cls_w"] = self.cls_head.w
            params["cls_b"] = self.cls_head.b
        if self.cross_head is not None:
            params["cross_w"] = self.cross_head.w
            params["cross_b"] = self.cross_head.b
        return params


def init_model(
    variant: Variant,
    vocab: dict[str, int],
    d_emb: int,
    d_model: int,
    rng: np.random.Generator,
) -> NeuralModel:
    if variant is Variant.bipolar_no_joint:
        raise ValueError("bipolar-no-joint is assembled from two trained parts")
    model = NeuralModel(variant=variant)
    model.encoder = TinyEncoder.init(vocab, d_emb, d_model, rng)
    if variant is Variant.bi:
        model.encoder_c = TinyEncoder.init(vocab, d_emb, d_model, rng)
    if variant in (Variant.unipolar_ret, Variant.bipolar, Variant.bipolar_no_absdiff):
        model.ret_head = RetrievalHead.init(d_model, rng)
    if variant in (Variant.unipolar_cls, Variant.bipolar, Variant.bipolar_no_absdiff):
        model.cls_head = ClassificationHead.init(
            d_model, rng, absdiff=variant is not Variant.bipolar_no_absdiff
        )
    if variant is Variant.cross:
        model.cross_head = CrossHead.init(d_model, rng)
    return model


# ---------------------------------------------------------------------------
# checkpoints


def _model_to_dict(model: NeuralModel) -> dict:
    if model.variant is Variant.bipolar_no_joint:
        assert model.ret_part is not None and model.cls_part is not None
        return {
            "format": "counterranker-checkpoint",
            "version": CHECKPOINT_VERSION,
            "variant": model.variant.value,
            "ret": _model_to_dict(model.ret_part),
            "cls": _model_to_dict(model.cls_part),
        }
    assert model.encoder is not None
    params = {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        for name, arr in model.named_params().items()
    }
    return {
        "format": "counterranker-checkpoint",
        "version": CHECKPOINT_VERSION,
        "variant": model.variant.value,
        "d_emb": model.encoder.emb.shape[1],
        "d_model": model.encoder.d_model,
        "vocab": [
            tok for tok, _ in sorted(model.encoder.vocab.items(), key=lambda kv: kv[1])
        ],
        "params": params,
    }


def checkpoint_bytes(model: NeuralModel) -> bytes:
    return json.dumps(_model_to_dict(model), sort_keys=True).encode("utf-8")


def save_checkpoint(model: NeuralModel, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def checkpoint_fingerprint(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _param(obj: dict, name: str) -> np.ndarray:
    entry = obj["params"][name]
    return np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])


def _model_from_dict(obj: dict) -> NeuralModel:
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {obj.get('version')}")
    variant = Variant(obj["variant"])
    if variant is Variant.bipolar_no_joint:
        return NeuralModel(
            variant=variant,
            ret_part=_model_from_dict(obj["ret"]),
            cls_part=_model_from_dict(obj["cls"]),
        )
    vocab = {tok: i for i, tok in enumerate(obj["vocab"])}
    model = NeuralModel(variant=variant)
    model.encoder = TinyEncoder(
        vocab=vocab,
        emb=_param(obj, "emb"),
        w_proj=_param(obj, "proj_w"),
        b_proj=_param(obj, "proj_b"),
    )
    names = set(obj["params"])
    if "emb_c" in names:
        model.encoder_c = TinyEncoder(
            vocab=vocab,
            emb=_param(obj, "emb_c"),
            w_proj=_param(obj, "proj_w_c"),
            b_proj=_param(obj, "proj_b_c"),
        )
    if "ret_w" in names:
        model.ret_head = RetrievalHead(w=_param(obj, "ret_w"), b=_param(obj, "ret_b"))
    if "cls_w" in names:
        model.cls_head = ClassificationHead(
            gamma=_param(obj, "cls_gamma"),
            beta=_param(obj, "cls_beta"),
            w=_param(obj, "cls_w"),
            b=_param(obj, "cls_b"),
        )
    if "cross_w" in names:
        model.cross_head = CrossHead(w=_param(obj, "cross_w"), b=_param(obj, "cross_b"))
    return model


def load_checkpoint(path: str | Path) -> NeuralModel:
    return _model_from_dict(json.loads(Path(path).read_bytes()))
