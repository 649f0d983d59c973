"""Losses, analytic gradients, negative sampling, and the Adam training loop.

Every gradient is hand-derived; ``gradcheck`` verifies them against central
finite differences. Training is single-threaded and bit-deterministic under
the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ..corpus import Argument, Corpus, Setting, candidate_pool
from ..textrep import tokenize
from .model import (
    ClassificationHead,
    NeuralModel,
    SEP_INDEX,
    TinyEncoder,
    Variant,
    build_vocab,
    init_model,
)

LOSS_EPS = 1e-12
LN_EPS = 1e-5

RANDOM_SAMPLING = "random"
HARD_SAMPLING = "increasing-hard"

EUCLIDEAN_OBJECTIVE = "euclidean"
DOT_OBJECTIVE = "dot"

# published fine-tuning value for a full-size pretrained encoder; the tiny
# trainable encoder defaults to 1e-3 instead
BERT_SCALE_LEARNING_RATE = 3e-6


class TrainingDiverged(RuntimeError):
    """Raised when the epoch loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 4
    learning_rate: float = 1e-3
    margin: float = 1.0
    distance_norm: int = 2
    sampling: str = RANDOM_SAMPLING
    increase_rate: float = 0.02
    d_emb: int = 64
    d_model: int = 64
    setting: Setting = Setting.epa
    seed: int = 0
    # triplet objective: "euclidean" follows the published training recipe;
    # "dot" unifies training with the dot-product retrieval scoring
    retrieval_objective: str = EUCLIDEAN_OBJECTIVE

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if not (0.0 < self.increase_rate <= 1.0):
            raise ValueError("increase_rate must be in (0, 1]")
        if self.distance_norm != 2:
            raise ValueError("only the Euclidean distance norm (p=2) is supported")
        if self.sampling == "increasing_hard":  # underscore spelling accepted
            object.__setattr__(self, "sampling", HARD_SAMPLING)
        if self.sampling not in (RANDOM_SAMPLING, HARD_SAMPLING):
            raise ValueError(f"unknown sampling strategy: {self.sampling!r}")
        if self.retrieval_objective not in (EUCLIDEAN_OBJECTIVE, DOT_OBJECTIVE):
            raise ValueError(
                f"unknown retrieval objective: {self.retrieval_objective!r}"
            )


@dataclass
class TrainResult:
    model: NeuralModel
    losses: tuple[float, ...]


# ---------------------------------------------------------------------------
# losses


def triplet_loss(d_pos: float, d_neg: float, margin: float = 1.0) -> float:
    """Hinge max(d_pos - d_neg + margin, 0) on non-negative distances."""
    return max(d_pos - d_neg + margin, 0.0)


def cross_entropy(y_hat: float, y: int) -> float:
    """Binary cross-entropy with the prediction clamped to [1e-12, 1-1e-12]."""
    p = min(max(y_hat, LOSS_EPS), 1.0 - LOSS_EPS)
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


def joint_loss(
    model: NeuralModel,
    point_tokens: Sequence[str],
    pos_tokens: Sequence[str],
    neg_tokens: Sequence[str],
    margin: float = 1.0,
) -> float:
    """Triplet loss on retrieval embeddings plus both pair cross-entropies."""
    rp = model.point_retrieval_embedding(point_tokens)
    r_pos = model.candidate_retrieval_embedding(pos_tokens)
    r_neg = model.candidate_retrieval_embedding(neg_tokens)
    d_pos = float(np.linalg.norm(rp - r_pos))
    d_neg = float(np.linalg.norm(rp - r_neg))
    u = model.encode_point_base(point_tokens)
    ce_pos = cross_entropy(
        model.classification_prob(u, model.encode_candidate_base(pos_tokens)), 1
    )
    ce_neg = cross_entropy(
        model.classification_prob(u, model.encode_candidate_base(neg_tokens)), 0
    )
    return triplet_loss(d_pos, d_neg, margin) + ce_pos + ce_neg


# ---------------------------------------------------------------------------
# forward caches and backward passes


def _enc_forward(enc: TinyEncoder, ids: np.ndarray):
    if ids.size == 0:
        raise ValueError("encode: empty text")
    pooled = enc.emb[ids].mean(axis=0)
    z = np.tanh(enc.w_proj @ pooled + enc.b_proj)
    return ids, pooled, z


def _enc_backward(
    enc: TinyEncoder,
    cache,
    dz: np.ndarray,
    grads: Mapping[str, np.ndarray],
    names: tuple[str, str, str] = ("emb", "proj_w", "proj_b"),
) -> None:
    ids, pooled, z = cache
    da = dz * (1.0 - z * z)
    grads[names[1]] += np.outer(da, pooled)
    grads[names[2]] += da
    dpooled = enc.w_proj.T @ da
    np.add.at(grads[names[0]], ids, dpooled / ids.size)


_ENC_NAMES = ("emb", "proj_w", "proj_b")
_ENC_C_NAMES = ("emb_c", "proj_w_c", "proj_b_c")


def _softmax2(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    expv = np.exp(shifted)
    return expv / expv.sum()


@dataclass
class _ClsCache:
    u: np.ndarray
    v: np.ndarray
    xhat: np.ndarray
    sigma: float
    out: np.ndarray
    prob: np.ndarray  # softmax over 2 classes


def _cls_forward(head: ClassificationHead, u: np.ndarray, v: np.ndarray) -> _ClsCache:
    x = head.fuse(u, v)
    mu = x.mean()
    sigma = math.sqrt(x.var() + LN_EPS)
    xhat = (x - mu) / sigma
    out = head.gamma * xhat + head.beta
    prob = _softmax2(head.w @ out + head.b)
    return _ClsCache(u=u, v=v, xhat=xhat, sigma=sigma, out=out, prob=prob)


def _cls_backward(
    head: ClassificationHead,
    cache: _ClsCache,
    dlogits: np.ndarray,
    grads: Mapping[str, np.ndarray],
    prefix: str = "",
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (du, dv) for the fused inputs."""
    grads[prefix + "cls_w"] += np.outer(dlogits, cache.out)
    grads[prefix + "cls_b"] += dlogits
    dout = head.w.T @ dlogits
    grads[prefix + "cls_gamma"] += dout * cache.xhat
    grads[prefix + "cls_beta"] += dout
    dxhat = dout * head.gamma
    dim = cache.xhat.size
    dx = (dim * dxhat - dxhat.sum() - cache.xhat * (dxhat * cache.xhat).sum()) / (
        dim * cache.sigma
    )
    d = cache.u.size
    du = dx[:d].copy()
    dv = dx[d : 2 * d].copy()
    if dim == 3 * d:
        sign = np.sign(cache.u - cache.v)
        du += sign * dx[2 * d :]
        dv -= sign * dx[2 * d :]
    return du, dv


def _triplet_grads(
    rp: np.ndarray,
    r_pos: np.ndarray,
    r_neg: np.ndarray,
    margin: float,
    objective: str = EUCLIDEAN_OBJECTIVE,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and gradients w.r.t. the three retrieval embeddings.

    Under the dot objective the "distance" is the negated dot product, so
    the hinge pushes dot(p, pos) above dot(p, neg) by the margin.
    """
    g_rp = np.zeros_like(rp)
    g_pos = np.zeros_like(rp)
    g_neg = np.zeros_like(rp)
    if objective == DOT_OBJECTIVE:
        d_pos = -float(rp @ r_pos)
        d_neg = -float(rp @ r_neg)
        loss = triplet_loss(d_pos, d_neg, margin)
        if loss > 0.0:
            g_rp += r_neg - r_pos
            g_pos -= rp
            g_neg += rp
        return loss, g_rp, g_pos, g_neg
    diff_pos = rp - r_pos
    diff_neg = rp - r_neg
    d_pos = float(np.linalg.norm(diff_pos))
    d_neg = float(np.linalg.norm(diff_neg))
    loss = triplet_loss(d_pos, d_neg, margin)
    if loss > 0.0:
        if d_pos > 0.0:
            unit = diff_pos / d_pos
            g_rp += unit
            g_pos -= unit
        if d_neg > 0.0:
            unit = diff_neg / d_neg
            g_rp -= unit
            g_neg += unit
    return loss, g_rp, g_pos, g_neg


def zero_grads(model: NeuralModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in model.named_params().items()}


def _ret_project_backward(
    model: NeuralModel,
    z: np.ndarray,
    g_r: np.ndarray,
    grads: Mapping[str, np.ndarray],
    prefix: str = "",
) -> np.ndarray:
    """Backward through the retrieval head (identity for the bi variant)."""
    if model.ret_head is None:
        return g_r
    grads[prefix + "ret_w"] += np.outer(g_r, z)
    grads[prefix + "ret_b"] += g_r
    return model.ret_head.w.T @ g_r


def sample_loss_and_grads(
    model: NeuralModel,
    sample: tuple[np.ndarray, np.ndarray, np.ndarray],
    margin: float,
    grads: dict[str, np.ndarray] | None,
    objective: str = EUCLIDEAN_OBJECTIVE,
) -> float:
    """Loss of one (point, positive, negative) sample; accumulates gradients
    into ``grads`` when given. Pointwise variants consume the triple as one
    positive and one negative labeled pair.
    """
    p_ids, pos_ids, neg_ids = sample
    variant = model.variant

    if variant is Variant.bipolar_no_joint:
        assert model.ret_part is not None and model.cls_part is not None
        if grads is None:
            ret_loss = sample_loss_and_grads(model.ret_part, sample, margin, None, objective)
            cls_loss = sample_loss_and_grads(model.cls_part, sample, margin, None, objective)
            return ret_loss + cls_loss
        ret_grads = {
            name[len("ret.") :]: arr for name, arr in grads.items() if name.startswith("ret.")
        }
        cls_grads = {
            name[len("cls.") :]: arr for name, arr in grads.items() if name.startswith("cls.")
        }
        ret_loss = sample_loss_and_grads(model.ret_part, sample, margin, ret_grads, objective)
        cls_loss = sample_loss_and_grads(model.cls_part, sample, margin, cls_grads, objective)
        return ret_loss + cls_loss

    if variant is Variant.cross:
        assert model.encoder is not None and model.cross_head is not None
        enc = model.encoder
        total = 0.0
        for cand_ids, label in ((pos_ids, 1), (neg_ids, 0)):
            joined = np.concatenate([p_ids, [SEP_INDEX], cand_ids]).astype(np.int64)
            cache = _enc_forward(enc, joined)
            z = cache[2]
            prob = _softmax2(model.cross_head.w @ z + model.cross_head.b)
            total += cross_entropy(float(prob[1]), label)
            if grads is not None:
                dlogits = prob - np.array([1.0 - label, float(label)])
                grads["cross_w"] += np.outer(dlogits, z)
                grads["cross_b"] += dlogits
                dz = model.cross_head.w.T @ dlogits
                _enc_backward(enc, cache, dz, grads)
        return total

    assert model.encoder is not None
    enc_p = model.encoder
    enc_c = model.encoder_c if variant is Variant.bi else model.encoder
    assert enc_c is not None

    cache_p = _enc_forward(enc_p, p_ids)
    cache_pos = _enc_forward(enc_c, pos_ids)
    cache_neg = _enc_forward(enc_c, neg_ids)
    zp, z_pos, z_neg = cache_p[2], cache_pos[2], cache_neg[2]
    cand_names = _ENC_C_NAMES if variant is Variant.bi else _ENC_NAMES

    dzp = np.zeros_like(zp)
    dz_pos = np.zeros_like(z_pos)
    dz_neg = np.zeros_like(z_neg)
    total = 0.0

    if variant.has_retrieval_path:
        if model.ret_head is not None:
            rp = model.ret_head.project(zp)
            r_pos = model.ret_head.project(z_pos)
            r_neg = model.ret_head.project(z_neg)
        else:
            rp, r_pos, r_neg = zp, z_pos, z_neg
        loss_tl, g_rp, g_rpos, g_rneg = _triplet_grads(rp, r_pos, r_neg, margin, objective)
        total += loss_tl
        if grads is not None:
            dzp += _ret_project_backward(model, zp, g_rp, grads)
            dz_pos += _ret_project_backward(model, z_pos, g_rpos, grads)
            dz_neg += _ret_project_backward(model, z_neg, g_rneg, grads)

    if variant.has_classification_path:
        assert model.cls_head is not None
        for cache_c, dz_c, label in ((cache_pos, dz_pos, 1), (cache_neg, dz_neg, 0)):
            cls_cache = _cls_forward(model.cls_head, zp, cache_c[2])
            total += cross_entropy(float(cls_cache.prob[1]), label)
            if grads is not None:
                dlogits = cls_cache.prob - np.array([1.0 - label, float(label)])
                du, dv = _cls_backward(model.cls_head, cls_cache, dlogits, grads)
                dzp += du
                dz_c += dv

    if grads is not None:
        _enc_backward(enc_p, cache_p, dzp, grads, _ENC_NAMES)
        _enc_backward(enc_c, cache_pos, dz_pos, grads, cand_names)
        _enc_backward(enc_c, cache_neg, dz_neg, grads, cand_names)
    return total


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Standard Adam with bias correction, updating parameters in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.t = 0

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, param in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# negative sampling


def sample_negative(
    strategy: str,
    epoch: int,
    point: Argument,
    pool: Sequence[Argument],
    gold: Argument,
    embeddings: Mapping[str, np.ndarray] | None,
    rng: np.random.Generator,
    increase_rate: float = 0.02,
) -> Argument:
    """Pick a negative candidate from ``pool`` minus the gold counter.

    Under increasing-hard sampling, epoch i goes hard with probability
    min(i * increase_rate, 1): the hard pick is the candidate whose current
    retrieval embedding is nearest (Euclidean) to the gold counter's.
    """
    candidates = [a for a in pool if a.id != gold.id]
    if not candidates:
        raise ValueError(f"point {point.id!r}: no negative candidates available")
    if strategy == HARD_SAMPLING:
        q = min(epoch * increase_rate, 1.0)
        if rng.random() < q:
            if embeddings is None:
                raise ValueError("hard sampling requires current embeddings")
            gold_emb = embeddings[gold.id]
            dists = np.array(
                [np.linalg.norm(embeddings[a.id] - gold_emb) for a in candidates]
            )
            return candidates[int(np.argmin(dists))]
    elif strategy != RANDOM_SAMPLING:
        raise ValueError(f"unknown sampling strategy: {strategy!r}")
    return candidates[int(rng.integers(len(candidates)))]


# ---------------------------------------------------------------------------
# training loop


def _token_ids_by_argument(
    corpus: Corpus, encoder: TinyEncoder
) -> dict[str, np.ndarray]:
    ids = {}
    for arg in corpus.arguments:
        tokens = tokenize(arg.full_text())
        if not tokens:
            raise ValueError(f"argument {arg.id!r} has no tokens")
        ids[arg.id] = encoder.token_ids(tokens)
    return ids


def train_model(
    corpus: Corpus, variant: Variant, config: TrainConfig = TrainConfig()
) -> TrainResult:
    """Minibatch Adam over per-point samples.

    Pairwise variants minimize the triplet (or joint) loss on triples;
    pointwise variants (cross, unipolar-cls) minimize cross-entropy over the
    positive and a per-epoch resampled negative pair. ``bipolar-no-joint``
    trains unipolar-ret and unipolar-cls separately and bundles them; its
    loss trace is the elementwise sum of the two runs.
    """
    points = corpus.points_with_counter()
    if not points:
        raise ValueError("training corpus has no points with gold counters")

    if variant is Variant.bipolar_no_joint:
        ret = train_model(
            corpus, Variant.unipolar_ret, replace(config, seed=2 * config.seed + 1)
        )
        cls = train_model(
            corpus, Variant.unipolar_cls, replace(config, seed=2 * config.seed + 2)
        )
        bundle = NeuralModel(
            variant=variant, ret_part=ret.model, cls_part=cls.model
        )
        losses = tuple(a + b for a, b in zip(ret.losses, cls.losses))
        return TrainResult(model=bundle, losses=losses)

    vocab = build_vocab([a.full_text() for a in corpus.arguments], tokenize)
    rng = np.random.default_rng(config.seed)
    model = init_model(variant, vocab, config.d_emb, config.d_model, rng)
    assert model.encoder is not None
    ids_of = _token_ids_by_argument(corpus, model.encoder)
    pools = {p.id: candidate_pool(corpus, p, config.setting) for p in points}
    golds = {p.id: corpus.argument(p.counter_id) for p in points}  # type: ignore[arg-type]

    adam = Adam(model.named_params(), lr=config.learning_rate)
    losses: list[float] = []
    needs_hard = config.sampling == HARD_SAMPLING and variant.has_retrieval_path
    for epoch in range(config.epochs):
        embeddings: dict[str, np.ndarray] | None = None
        if needs_hard and min(epoch * config.increase_rate, 1.0) > 0.0:
            # exact exhaustive scan, recomputed at each epoch start
            needed: set[str] = set()
            for p in points:
                needed.update(a.id for a in pools[p.id])
                needed.add(golds[p.id].id)
            cand_enc = model.encoder_c if variant is Variant.bi else model.encoder
            assert cand_enc is not None
            embeddings = {}
            for arg_id in sorted(needed):
                z = np.tanh(
                    cand_enc.w_proj @ cand_enc.emb[ids_of[arg_id]].mean(axis=0)
                    + cand_enc.b_proj
                )
                embeddings[arg_id] = (
                    model.ret_head.project(z) if model.ret_head is not None else z
                )
        negatives = {
            p.id: sample_negative(
                config.sampling,
                epoch,
                p,
                pools[p.id],
                golds[p.id],
                embeddings,
                rng,
                config.increase_rate,
            )
            for p in points
        }
        order = rng.permutation(len(points))
        epoch_total = 0.0
        for start in range(0, len(points), config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = zero_grads(model)
            for idx in batch:
                point = points[int(idx)]
                sample = (
                    ids_of[point.id],
                    ids_of[golds[point.id].id],
                    ids_of[negatives[point.id].id],
                )
                epoch_total += sample_loss_and_grads(
                    model, sample, config.margin, grads, config.retrieval_objective
                )
            for arr in grads.values():
                arr /= batch.size
            adam.step(grads)
        epoch_loss = epoch_total / len(points)
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch} (variant {variant.value})"
            )
        losses.append(epoch_loss)
    return TrainResult(model=model, losses=tuple(losses))


def loss_trace_csv(losses: Sequence[float]) -> str:
    lines = ["epoch,loss"]
    lines.extend(f"{i},{value!r}" for i, value in enumerate(losses))
    return "\n".join(lines) + "\n"
