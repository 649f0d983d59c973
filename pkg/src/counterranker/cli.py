"""Command-line pipeline: ingest, synth, featurize, train, index, search,
evaluate, gradcheck.

Exit codes: 0 success, 1 validation error (bad flags, config, missing
files), 2 runtime failure. Log level comes from COUNTERRANKER_LOG.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, apply_overrides, config_fingerprint, load_config
from .corpus import Corpus, CorpusError, Setting, load_corpus, save_corpus, split_corpus
from .evaluation import EvalResources, evaluate, render_table, report_to_json
from .features import (
    FeatureError,
    FeatureRow,
    fit_standardizer,
    load_feature_cache,
    save_feature_cache,
    standardizer_from_dict,
    standardizer_to_dict,
)
from .ltr import (
    PointwiseDataset,
    build_pointwise_dataset,
    model_from_dict,
    model_to_dict,
    train_gbdt,
    train_logreg,
)
from .neural import (
    NeuralModel,
    TrainingDiverged,
    Variant,
    checkpoint_bytes,
    checkpoint_fingerprint,
    grad_check,
    init_model,
    load_checkpoint,
    loss_trace_csv,
    save_checkpoint,
    train_model,
)
from .neural.training import TrainConfig
from .rank import (
    CacheError,
    build_embedding_cache,
    load_embedding_cache,
    retrieve_and_rerank,
    retrieve_topk,
    save_embedding_cache,
)
from .simplesd import DEFAULT_WEIGHTS, LinearWeights
from .synthetic import generate_synthetic
from .textrep import StoreFormatError, load_embedding_store, tokenize

log = logging.getLogger("counterranker")

LTR_MODELS = ("logreg", "gbdt")
NEURAL_MODELS = tuple(v.value for v in Variant)
ALL_MODELS = ("simplesd",) + LTR_MODELS + NEURAL_MODELS

_VALIDATION_ERRORS = (
    ConfigError,
    CorpusError,
    StoreFormatError,
    FeatureError,
    CacheError,
    FileNotFoundError,
)


def _setup_logging() -> None:
    level_name = os.environ.get("COUNTERRANKER_LOG", "warn").lower()
    level = {
        "error": logging.ERROR,
        "warn": logging.WARNING,
        "warning": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG,
    }.get(level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="counterranker",
        description="Counter-argument retrieval pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, model: bool = False) -> None:
        p.add_argument("--config", required=True, help="run-config JSON path")
        p.add_argument("--setting", choices=[s.value for s in Setting])
        p.add_argument("--k", help="comma-separated shortlist sizes")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path override")
        if model:
            p.add_argument("--model", required=True, choices=ALL_MODELS)

    common(sub.add_parser("ingest", help="load and validate a corpus"))
    common(sub.add_parser("synth", help="generate the synthetic corpus"))
    common(sub.add_parser("featurize", help="extract training features"))
    common(sub.add_parser("train-ltr", help="train a feature combiner"), model=True)
    common(sub.add_parser("train-neural", help="train a neural scorer"), model=True)
    common(sub.add_parser("index", help="build the embedding cache"), model=True)
    search = sub.add_parser("search", help="rank candidates for one point")
    common(search, model=True)
    search.add_argument("--point", required=True, help="query point id")
    common(sub.add_parser("evaluate", help="accuracy@1/K evaluation"), model=True)
    grad = sub.add_parser("gradcheck", help="finite-difference gradient battery")
    common(grad)
    grad.add_argument("--model", choices=NEURAL_MODELS, help="single variant to check")
    return parser


def _require(value: str | None, name: str) -> str:
    if not value:
        raise ConfigError(f"missing required path: {name}")
    return value


def _existing(path_str: str, name: str) -> Path:
    path = Path(path_str)
    if not path.exists():
        raise ConfigError(f"{name} path does not exist: {path}")
    return path


def _load_corpus_from(config: RunConfig) -> Corpus:
    return load_corpus(_existing(_require(config.paths.corpus, "paths.corpus"), "corpus"))


def _pick_split(corpus: Corpus, which: str) -> Corpus:
    if which == "all":
        return corpus
    train, validation, test = split_corpus(corpus)
    try:
        return {"train": train, "validation": validation, "test": test}[which]
    except KeyError as exc:
        raise ConfigError(f"unknown split: {which!r}") from exc


def _neural_config(config: RunConfig) -> TrainConfig:
    from dataclasses import replace

    return replace(config.neural, setting=config.setting)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_ingest(config: RunConfig, args: argparse.Namespace) -> int:
    corpus = _load_corpus_from(config)
    with_counter = len(corpus.points_with_counter())
    print(
        f"corpus ok: {len(corpus)} arguments, {len(corpus.debates)} debates, "
        f"{with_counter} points with a counter"
    )
    if args.out:
        save_corpus(corpus, args.out)
        print(f"normalized corpus written to {args.out}")
    return 0


def _cmd_synth(config: RunConfig, args: argparse.Namespace) -> int:
    out = args.out or config.paths.corpus
    out = _require(out, "paths.corpus (or --out)")
    corpus = generate_synthetic(config.synthetic)
    save_corpus(corpus, out)
    print(f"synthetic corpus: {len(corpus)} arguments -> {out}")
    return 0


def _cmd_featurize(config: RunConfig, args: argparse.Namespace) -> int:
    corpus = _load_corpus_from(config)
    store = load_embedding_store(
        _existing(_require(config.paths.store, "paths.store"), "store")
    )
    train, _, _ = split_corpus(corpus)
    dataset = build_pointwise_dataset(
        train, config.setting, store, n_neg=config.n_neg, seed=config.seed
    )
    out = _require(args.out or config.paths.features, "paths.features (or --out)")
    save_feature_cache(dataset.rows, out)
    standardizer = fit_standardizer(dataset.matrix)
    std_path = config.paths.standardizer or (str(out) + ".standardizer.json")
    Path(std_path).write_text(
        json.dumps(standardizer_to_dict(standardizer), sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"feature cache: {len(dataset.rows)} rows -> {out}")
    print(f"standardizer -> {std_path}")
    return 0


def _load_training_rows(config: RunConfig) -> PointwiseDataset:
    if config.paths.features and Path(config.paths.features).exists():
        rows = load_feature_cache(config.paths.features)
        return PointwiseDataset(tuple(rows))
    corpus = _load_corpus_from(config)
    store = load_embedding_store(
        _existing(_require(config.paths.store, "paths.store"), "store")
    )
    train, _, _ = split_corpus(corpus)
    return build_pointwise_dataset(
        train, config.setting, store, n_neg=config.n_neg, seed=config.seed
    )


def _cmd_train_ltr(config: RunConfig, args: argparse.Namespace) -> int:
    if args.model not in LTR_MODELS:
        raise ConfigError(f"train-ltr expects one of {LTR_MODELS}, got {args.model!r}")
    dataset = _load_training_rows(config)
    standardizer = fit_standardizer(dataset.matrix)
    standardized = dataset.transform(standardizer)
    model = (
        train_logreg(standardized, config.logreg)
        if args.model == "logreg"
        else train_gbdt(standardized, config.gbdt)
    )
    out = _require(args.out or config.paths.checkpoint, "paths.checkpoint (or --out)")
    payload = {
        "model": model_to_dict(model),
        "standardizer": standardizer_to_dict(standardizer),
    }
    Path(out).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{args.model} checkpoint -> {out}")
    return 0


def _cmd_train_neural(config: RunConfig, args: argparse.Namespace) -> int:
    variant = Variant(args.model)
    corpus = _load_corpus_from(config)
    train, _, _ = split_corpus(corpus)
    result = train_model(train, variant, _neural_config(config))
    out = _require(args.out or config.paths.checkpoint, "paths.checkpoint (or --out)")
    save_checkpoint(result.model, out)
    print(f"{variant.value} checkpoint -> {out} (final loss {result.losses[-1]:.6f})")
    if config.paths.loss_trace:
        Path(config.paths.loss_trace).write_text(
            loss_trace_csv(result.losses), encoding="utf-8"
        )
        print(f"loss trace -> {config.paths.loss_trace}")
    return 0


def _load_neural(config: RunConfig, expected: str) -> NeuralModel:
    path = _existing(
        _require(config.paths.checkpoint, "paths.checkpoint"), "checkpoint"
    )
    model = load_checkpoint(path)
    if model.variant.value != expected:
        raise ConfigError(
            f"checkpoint holds variant {model.variant.value!r}, expected {expected!r}"
        )
    return model


def _cmd_index(config: RunConfig, args: argparse.Namespace) -> int:
    model = _load_neural(config, args.model)
    corpus = _pick_split(_load_corpus_from(config), config.split)
    if config.setting is Setting.epc:
        pool = [a for a in corpus.arguments if a.id in corpus.counter_ids()]
    else:
        pool = list(corpus.arguments)
    cache = build_embedding_cache(model, pool)
    out = _require(args.out or config.paths.cache, "paths.cache (or --out)")
    save_embedding_cache(cache, out)
    print(f"embedding cache: {len(cache)} candidates -> {out}")
    return 0


def _cmd_search(config: RunConfig, args: argparse.Namespace) -> int:
    model = _load_neural(config, args.model)
    corpus = _pick_split(_load_corpus_from(config), config.split)
    if args.point not in corpus:
        raise ConfigError(f"point {args.point!r} not found in the {config.split} split")
    point = corpus.argument(args.point)
    from .corpus import candidate_pool

    pool = candidate_pool(corpus, point, config.setting)
    k = config.ks[0] if config.ks else 10
    if model.variant.has_retrieval_path:
        if config.paths.cache and Path(config.paths.cache).exists():
            cache = load_embedding_cache(
                config.paths.cache,
                expected_fingerprint=checkpoint_fingerprint(checkpoint_bytes(model)),
            )
        else:
            cache = build_embedding_cache(model, pool)
        if model.variant.has_classification_path:
            ranking = retrieve_and_rerank(model, cache, point, pool, k)
        else:
            emb = model.point_retrieval_embedding(tokenize(point.full_text()))
            ranking = retrieve_topk(cache, emb, k, candidate_ids=[a.id for a in pool])
    else:
        from .rank import rerank

        ranking = rerank(model, point, pool).truncated(k)
    for rank_pos, (cid, score) in enumerate(ranking.entries, start=1):
        print(f"{rank_pos:3d}  {score: .6f}  {cid}")
    return 0


def _cmd_evaluate(config: RunConfig, args: argparse.Namespace) -> int:
    corpus = _pick_split(_load_corpus_from(config), config.split)
    resources = EvalResources()
    fingerprint = ""
    if args.model == "simplesd":
        model = (
            LinearWeights(np.asarray(config.simplesd.alpha))
            if config.simplesd.alpha is not None
            else DEFAULT_WEIGHTS
        )
        resources.store = load_embedding_store(
            _existing(_require(config.paths.store, "paths.store"), "store")
        )
    elif args.model in LTR_MODELS:
        path = _existing(
            _require(config.paths.checkpoint, "paths.checkpoint"), "checkpoint"
        )
        payload = json.loads(path.read_text(encoding="utf-8"))
        model = model_from_dict(payload["model"])
        if payload["model"]["kind"] != args.model:
            raise ConfigError(
                f"checkpoint holds {payload['model']['kind']!r}, expected {args.model!r}"
            )
        resources.standardizer = standardizer_from_dict(payload["standardizer"])
        resources.store = load_embedding_store(
            _existing(_require(config.paths.store, "paths.store"), "store")
        )
        fingerprint = checkpoint_fingerprint(path.read_bytes())
    else:
        model = _load_neural(config, args.model)
        fingerprint = checkpoint_fingerprint(checkpoint_bytes(model))

    report = evaluate(
        model,
        corpus,
        config.setting,
        config.ks,
        resources=resources,
        model_name=args.model,
        model_fingerprint=fingerprint,
        config_fingerprint=config_fingerprint(config),
    )
    print(render_table([report]))
    out = args.out or config.paths.report
    if out:
        metadata = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
        Path(out).write_text(report_to_json(report, metadata), encoding="utf-8")
        print(f"report -> {out}")
    return 0


def _cmd_gradcheck(config: RunConfig, args: argparse.Namespace) -> int:
    variants = [Variant(args.model)] if args.model else list(Variant)
    rng = np.random.default_rng(config.seed)
    vocab = {tok: i for i, tok in enumerate(["<unk>", "<sep>"] + [f"w{i}" for i in range(16)])}
    worst_overall = 0.0
    for variant in variants:
        if variant is Variant.bipolar_no_joint:
            ret = init_model(Variant.unipolar_ret, vocab, 6, 6, rng)
            cls = init_model(Variant.unipolar_cls, vocab, 6, 6, rng)
            model = NeuralModel(variant=variant, ret_part=ret, cls_part=cls)
        else:
            model = init_model(variant, vocab, 6, 6, rng)
        sample = tuple(
            rng.integers(2, len(vocab), size=rng.integers(3, 7)).astype(np.int64)
            for _ in range(3)
        )
        err = grad_check(model, sample)  # type: ignore[arg-type]
        worst_overall = max(worst_overall, err)
        print(f"{variant.value:20s} max relative error {err:.3e}")
    print(f"worst overall: {worst_overall:.3e}")
    return 0 if worst_overall < 1e-4 else 2


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "featurize": _cmd_featurize,
    "train-ltr": _cmd_train_ltr,
    "train-neural": _cmd_train_neural,
    "index": _cmd_index,
    "search": _cmd_search,
    "evaluate": _cmd_evaluate,
    "gradcheck": _cmd_gradcheck,
}


def dispatch(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors (spec wants 1)
        return 0 if exc.code == 0 else 1
    try:
        config = load_config(args.config)
        config = apply_overrides(config, args.setting, args.k, args.seed)
        return _COMMANDS[args.command](config, args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        log.exception("unhandled failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
