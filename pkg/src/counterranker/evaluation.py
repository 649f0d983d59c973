"""Accuracy@1 metrics, the cross-model evaluation harness, and report output."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence


from .corpus import Argument, Corpus, Setting, candidate_pool
from .features import FeaturePipeline, Standardizer
from .ltr import LinearModel, TreeEnsemble, rank_by_classifier
from .neural import NeuralModel
from .rank import build_embedding_cache, rerank, retrieve_topk
from .ranking import RankedList
from .simplesd import LinearWeights, rank_by_simplesd
from .textrep import EmbeddingStore, tokenize


def accuracy_at_1(
    rankings: Mapping[str, RankedList], gold: Mapping[str, str]
) -> float:
    """Fraction of points whose rank-1 candidate is the gold counter.

    Points with an empty ranking count as incorrect; a point without a gold
    entry is an error.
    """
    if not rankings:
        return 0.0
    correct = 0
    for point_id, ranking in rankings.items():
        if point_id not in gold:
            raise ValueError(f"missing gold entry for point {point_id!r}")
        if ranking.top() == gold[point_id]:
            correct += 1
    return correct / len(rankings)


@dataclass(frozen=True)
class KResult:
    k: int
    accuracy: float
    evaluated: int
    correct: int


@dataclass(frozen=True)
class EvalReport:
    model_name: str
    setting: Setting
    results: tuple[KResult, ...]
    model_fingerprint: str = ""
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "setting": self.setting.value,
            "results": [
                {
                    "k": r.k,
                    "accuracy": r.accuracy,
                    "evaluated": r.evaluated,
                    "correct": r.correct,
                }
                for r in self.results
            ],
            "model_fingerprint": self.model_fingerprint,
            "config_fingerprint": self.config_fingerprint,
        }


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned accuracy table: models as rows, setting@K as columns."""
    columns: list[tuple[Setting, int]] = []
    for report in reports:
        for result in report.results:
            key = (report.setting, result.k)
            if key not in columns:
                columns.append(key)
    header = ["model"] + [f"{s.value}@1/{k}" for s, k in columns]
    rows = []
    for report in reports:
        cells = {(report.setting, r.k): f"{100.0 * r.accuracy:.2f}" for r in report.results}
        rows.append(
            [report.model_name] + [cells.get(col, "-") for col in columns]
        )
    widths = [
        max(len(header[i]), *(len(row[i]) for row in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = [
        "  ".join(header[i].ljust(widths[i]) for i in range(len(header))),
        "  ".join("-" * widths[i] for i in range(len(header))),
    ]
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(header))))
    return "\n".join(lines)


@dataclass
class EvalResources:
    """Extra inputs some scorers need: an embedding store for feature models
    and the standardizer fit on their training features."""

    store: EmbeddingStore | None = None
    standardizer: Standardizer | None = None


ScoringModel = LinearWeights | LinearModel | TreeEnsemble | NeuralModel


def _neural_rankings(
    model: NeuralModel,
    corpus: Corpus,
    setting: Setting,
    ks: Sequence[int],
    points: Sequence[Argument],
) -> dict[int, dict[str, RankedList]]:
    full_pool_settings = (Setting.epa, Setting.epc)
    shared_cache = None
    if model.variant.has_retrieval_path and setting in full_pool_settings:
        collection = (
            [a for a in corpus.arguments if a.id in corpus.counter_ids()]
            if setting is Setting.epc
            else list(corpus.arguments)
        )
        shared_cache = build_embedding_cache(model, collection)

    per_k: dict[int, dict[str, RankedList]] = {k: {} for k in ks}
    for point in points:
        pool = candidate_pool(corpus, point, setting)
        if model.variant.has_retrieval_path:
            cache = shared_cache or build_embedding_cache(model, pool)
            emb = model.point_retrieval_embedding(tokenize(point.full_text()))
            pool_ids = [a.id for a in pool]
            if model.variant.has_classification_path:
                by_id = {a.id: a for a in pool}
                for k in ks:
                    shortlist = retrieve_topk(cache, emb, k, candidate_ids=pool_ids)
                    ranking = rerank(
                        model, point, [by_id[cid] for cid in shortlist.ids()], cache
                    )
                    per_k[k][point.id] = ranking
            else:
                # retrieval-only: @1/K is the plain retrieval ranking for every K
                ranking = retrieve_topk(cache, emb, max(len(pool), 1), candidate_ids=pool_ids)
                for k in ks:
                    per_k[k][point.id] = ranking
        else:
            # classification-only scorers rank the full pool directly
            ranking = rerank(model, point, pool)
            for k in ks:
                per_k[k][point.id] = ranking
    return per_k


def _feature_rankings(
    model: ScoringModel,
    corpus: Corpus,
    setting: Setting,
    resources: EvalResources,
    points: Sequence[Argument],
) -> dict[str, RankedList]:
    if resources.store is None:
        raise ValueError("feature-based models require an embedding store")
    pipeline = FeaturePipeline(corpus, setting, resources.store)
    rankings: dict[str, RankedList] = {}
    for point in points:
        pool = pipeline.pool(point)
        ctx = pipeline.context_for(point)
        if isinstance(model, LinearWeights):
            rankings[point.id] = rank_by_simplesd(point, pool, ctx, model)
        else:
            if resources.standardizer is None:
                raise ValueError("learned feature combiners require a standardizer")
            rankings[point.id] = rank_by_classifier(
                model, point, pool, ctx, resources.standardizer
            )
    return rankings


def evaluate(
    model: ScoringModel,
    corpus: Corpus,
    setting: Setting,
    ks: Sequence[int],
    resources: EvalResources | None = None,
    model_name: str = "",
    model_fingerprint: str = "",
    config_fingerprint: str = "",
) -> EvalReport:
    """accuracy@1/K for every requested K.

    Retrieval-only and feature models ignore K (their full-pool ranking is
    reported for each K); retrieve-and-rerank models shortlist K candidates
    first, and a gold counter outside the shortlist counts as incorrect.
    """
    resources = resources or EvalResources()
    ks = list(ks) or [1]
    points = corpus.points_with_counter()
    gold = {p.id: p.counter_id for p in points if p.counter_id is not None}

    if isinstance(model, NeuralModel):
        per_k = _neural_rankings(model, corpus, setting, ks, points)
    else:
        rankings = _feature_rankings(model, corpus, setting, resources, points)
        per_k = {k: rankings for k in ks}

    results = []
    for k in ks:
        rankings = per_k[k]
        acc = accuracy_at_1(rankings, gold)
        correct = sum(1 for pid, r in rankings.items() if r.top() == gold[pid])
        results.append(
            KResult(k=k, accuracy=acc, evaluated=len(rankings), correct=correct)
        )
    name = model_name or (
        model.variant.value if isinstance(model, NeuralModel) else type(model).__name__
    )
    return EvalReport(
        model_name=name,
        setting=setting,
        results=tuple(results),
        model_fingerprint=model_fingerprint,
        config_fingerprint=config_fingerprint,
    )


def report_to_json(report: EvalReport, metadata: dict | None = None) -> str:
    payload = report.to_dict()
    if metadata:
        payload["metadata"] = metadata
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
