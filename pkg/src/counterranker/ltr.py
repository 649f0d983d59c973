"""Learned feature combiners: pointwise dataset construction, logistic
regression trained by full-batch gradient descent, and second-order
gradient-boosted regression trees on the logistic objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Argument, Corpus, Setting
from .features import (
    FeaturePipeline,
    FeatureRow,
    N_FEATURES,
    Standardizer,
    apply_standardizer,
    extract_features,
)
from .ranking import RankedList
from .textrep import EmbeddingStore


@dataclass(frozen=True)
class PointwiseDataset:
    """Labeled (point, candidate) rows; features may be raw or standardized."""

    rows: tuple[FeatureRow, ...]

    @property
    def matrix(self) -> np.ndarray:
        return np.stack([row.features for row in self.rows])

    @property
    def labels(self) -> np.ndarray:
        return np.array([row.label for row in self.rows], dtype=np.int64)

    def transform(self, standardizer: Standardizer) -> "PointwiseDataset":
        rows = tuple(
            FeatureRow(
                row.point_id,
                row.candidate_id,
                row.label,
                apply_standardizer(standardizer, row.features),
            )
            for row in self.rows
        )
        return PointwiseDataset(rows)


def build_pointwise_dataset(
    corpus: Corpus,
    setting: Setting,
    store: EmbeddingStore,
    n_neg: int = 5,
    seed: int = 0,
) -> PointwiseDataset:
    """One positive row per point with a gold counter plus ``n_neg`` negatives
    sampled uniformly without replacement from the candidate pool minus the
    gold. Deterministic under ``seed``; features are raw (standardize after
    fitting on the training rows).
    """
    if n_neg < 1:
        raise ValueError("n_neg must be >= 1")
    rng = np.random.default_rng(seed)
    pipeline = FeaturePipeline(corpus, setting, store)
    rows: list[FeatureRow] = []
    for point in corpus.points_with_counter():
        ctx = pipeline.context_for(point)
        gold = corpus.argument(point.counter_id)  # type: ignore[arg-type]
        rows.append(
            FeatureRow(point.id, gold.id, 1, extract_features(point, gold, ctx))
        )
        negatives = [a for a in pipeline.pool(point) if a.id != gold.id]
        take = min(n_neg, len(negatives))
        if take:
            for idx in rng.choice(len(negatives), size=take, replace=False):
                cand = negatives[int(idx)]
                rows.append(
                    FeatureRow(point.id, cand.id, 0, extract_features(point, cand, ctx))
                )
    return PointwiseDataset(tuple(rows))


# ---------------------------------------------------------------------------
# logistic regression


@dataclass(frozen=True)
class LogregConfig:
    l2_inverse_c: float = 50.0
    max_iter: int = 1000
    tol: float = 1e-6
    seed: int = 0  # kept for interface symmetry; the zero init is deterministic


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision(x))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def _balanced_weights(y: np.ndarray) -> np.ndarray:
    m = y.size
    pos = int(y.sum())
    neg = m - pos
    if pos == 0 or neg == 0:
        raise ValueError("training data must contain both classes")
    w = np.where(y == 1, m / (2.0 * pos), m / (2.0 * neg))
    return w.astype(np.float64)


def logreg_objective(
    weights: np.ndarray,
    bias: float,
    x: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    c: float,
) -> tuple[float, np.ndarray, float]:
    """Mean class-weighted logistic loss with L2 penalty ||w||^2 / (2C).

    Returns (loss, grad_w, grad_b). The bias is unregularized.
    """
    m = y.size
    z = x @ weights + bias
    # log(1 + exp(-t)) computed stably via logaddexp(0, -t)
    t = np.where(y == 1, z, -z)
    losses = np.logaddexp(0.0, -t)
    loss = float((sample_weight * losses).sum() / m + (weights @ weights) / (2.0 * c * m))
    p = _sigmoid(z)
    residual = sample_weight * (p - y)
    grad_w = (x.T @ residual + weights / c) / m
    grad_b = float(residual.sum() / m)
    return loss, grad_w, grad_b


def train_logreg(
    data: PointwiseDataset, config: LogregConfig = LogregConfig()
) -> LinearModel:
    """Full-batch gradient descent with backtracking (Armijo) line search.

    Stops when the gradient infinity norm drops below ``tol`` or after
    ``max_iter`` iterations.
    """
    x = data.matrix
    y = data.labels.astype(np.float64)
    sw = _balanced_weights(data.labels)
    weights = np.zeros(x.shape[1])
    bias = 0.0
    loss, grad_w, grad_b = logreg_objective(weights, bias, x, y, sw, config.l2_inverse_c)
    step = 1.0
    for _ in range(config.max_iter):
        grad_norm = max(float(np.abs(grad_w).max()), abs(grad_b))
        if grad_norm < config.tol:
            break
        sq = float(grad_w @ grad_w) + grad_b * grad_b
        step = min(step * 2.0, 1e6)  # allow growth after cautious iterations
        while step > 1e-18:
            new_w = weights - step * grad_w
            new_b = bias - step * grad_b
            new_loss, new_gw, new_gb = logreg_objective(
                new_w, new_b, x, y, sw, config.l2_inverse_c
            )
            if new_loss <= loss - 1e-4 * step * sq:
                weights, bias = new_w, new_b
                loss, grad_w, grad_b = new_loss, new_gw, new_gb
                break
            step *= 0.5
        else:
            break  # no descent step representable; gradient is numerically flat
    return LinearModel(weights=weights, bias=bias)


def predict_logreg(model: LinearModel, x: np.ndarray) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(model.predict_proba(x[None, :])[0])
    return model.predict_proba(x)


# ---------------------------------------------------------------------------
# gradient-boosted trees


@dataclass(frozen=True)
class GbdtConfig:
    max_depth: int = 8
    learning_rate: float = 0.01
    n_estimators: int = 1000
    min_child_weight: float = 5.0
    subsample: float = 0.8
    colsample_bytree: float = 0.7
    reg_lambda: float = 0.4
    scale_pos_weight: float = 0.8
    seed: int = 0


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    def is_leaf(self) -> bool:
        return self.feature is None

    def route(self, x: np.ndarray) -> float:
        node = self
        while not node.is_leaf():
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.value


@dataclass
class TreeEnsemble:
    base_score: float
    learning_rate: float
    trees: list[TreeNode] = field(default_factory=list)
    train_loss: tuple[float, ...] = ()

    def margin(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * np.array([tree.route(row) for row in x])
        return out

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(self.margin(x))


def _best_split(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    columns: np.ndarray,
    lam: float,
    min_child_weight: float,
) -> tuple[float, int, float] | None:
    """Exact greedy split: maximize the second-order gain over all thresholds.

    gain = [GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)] / 2
    """
    g_sum = g[rows].sum()
    h_sum = h[rows].sum()
    parent = g_sum * g_sum / (h_sum + lam)
    best: tuple[float, int, float] | None = None
    for col in columns:
        values = x[rows, col]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sg = np.cumsum(g[rows][order])
        sh = np.cumsum(h[rows][order])
        # split boundaries sit between consecutive distinct values
        boundary = np.nonzero(sv[:-1] < sv[1:])[0]
        if boundary.size == 0:
            continue
        gl = sg[boundary]
        hl = sh[boundary]
        gr = g_sum - gl
        hr = h_sum - hl
        valid = (hl >= min_child_weight) & (hr >= min_child_weight)
        if not valid.any():
            continue
        gains = 0.5 * (
            gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
        )
        gains[~valid] = -np.inf
        idx = int(np.argmax(gains))
        gain = float(gains[idx])
        if gain > 1e-12 and (best is None or gain > best[0]):
            cut = boundary[idx]
            threshold = 0.5 * (sv[cut] + sv[cut + 1])
            best = (gain, int(col), float(threshold))
    return best


def _grow_tree(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    columns: np.ndarray,
    depth: int,
    config: GbdtConfig,
) -> TreeNode:
    g_sum = g[rows].sum()
    h_sum = h[rows].sum()
    leaf_value = -g_sum / (h_sum + config.reg_lambda)
    if depth >= config.max_depth or rows.size < 2:
        return TreeNode(value=float(leaf_value))
    split = _best_split(x, g, h, rows, columns, config.reg_lambda, config.min_child_weight)
    if split is None:
        return TreeNode(value=float(leaf_value))
    _, feature, threshold = split
    mask = x[rows, feature] < threshold
    left = _grow_tree(x, g, h, rows[mask], columns, depth + 1, config)
    right = _grow_tree(x, g, h, rows[~mask], columns, depth + 1, config)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def train_gbdt(data: PointwiseDataset, config: GbdtConfig = GbdtConfig()) -> TreeEnsemble:
    """Newton-style boosting on the logistic loss.

    Per round a regression tree is fit to gradient/hessian statistics with
    rows and columns subsampled under the seed; positive-class gradients and
    hessians are scaled by ``scale_pos_weight``. The per-round training
    logloss trace (same weighting) is recorded on the ensemble.
    """
    x = data.matrix
    y = data.labels.astype(np.float64)
    m, n_features = x.shape
    pos = float(y.sum())
    neg = float(m - pos)
    if pos == 0 or neg == 0:
        raise ValueError("training data must contain both classes")
    base = math.log(pos / neg)
    ensemble = TreeEnsemble(base_score=base, learning_rate=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    margins = np.full(m, base)
    weight = np.where(y == 1, config.scale_pos_weight, 1.0)
    trace: list[float] = []
    n_rows = max(1, round(config.subsample * m))
    n_cols = max(1, round(config.colsample_bytree * n_features))
    for _ in range(config.n_estimators):
        p = _sigmoid(margins)
        grad = weight * (p - y)
        hess = weight * p * (1.0 - p)
        rows = (
            np.sort(rng.choice(m, size=n_rows, replace=False))
            if n_rows < m
            else np.arange(m)
        )
        cols = (
            np.sort(rng.choice(n_features, size=n_cols, replace=False))
            if n_cols < n_features
            else np.arange(n_features)
        )
        tree = _grow_tree(x, grad, hess, rows, cols, 0, config)
        ensemble.trees.append(tree)
        margins += config.learning_rate * np.array([tree.route(row) for row in x])
        losses = np.logaddexp(0.0, -np.where(y == 1, margins, -margins))
        trace.append(float((weight * losses).mean()))
    ensemble.train_loss = tuple(trace)
    return ensemble


def predict_gbdt(ensemble: TreeEnsemble, x: np.ndarray) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(ensemble.predict_proba(x[None, :])[0])
    return ensemble.predict_proba(x)


# ---------------------------------------------------------------------------
# ranking and serialization


def rank_by_classifier(
    model: LinearModel | TreeEnsemble,
    point: Argument,
    pool: Sequence[Argument],
    ctx,
    standardizer: Standardizer,
) -> RankedList:
    """Rank candidates by predicted positive-class probability."""
    scores = []
    for cand in pool:
        feats = apply_standardizer(standardizer, extract_features(point, cand, ctx))
        prob = model.predict_proba(feats[None, :])[0]
        scores.append((cand.id, float(prob)))
    return RankedList.from_scores(scores)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf():
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(obj: dict) -> TreeNode:
    if "value" in obj:
        return TreeNode(value=float(obj["value"]))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_node_from_dict(obj["left"]),
        right=_node_from_dict(obj["right"]),
    )


def model_to_dict(model: LinearModel | TreeEnsemble) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": "logreg",
            "version": 1,
            "weights": model.weights.tolist(),
            "bias": model.bias,
        }
    return {
        "kind": "gbdt",
        "version": 1,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "trees": [_node_to_dict(tree) for tree in model.trees],
    }


def model_from_dict(obj: dict) -> LinearModel | TreeEnsemble:
    if obj.get("version") != 1:
        raise ValueError(f"unsupported ltr checkpoint version: {obj.get('version')}")
    if obj["kind"] == "logreg":
        return LinearModel(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
        )
    if obj["kind"] == "gbdt":
        return TreeEnsemble(
            base_score=float(obj["base_score"]),
            learning_rate=float(obj["learning_rate"]),
            trees=[_node_from_dict(t) for t in obj["trees"]],
        )
    raise ValueError(f"unknown ltr model kind: {obj['kind']!r}")
