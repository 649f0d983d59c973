"""Full synthetic-corpus experiment: train every scorer, print one table.

Trains the neural variants (seeds 1-3, averaged) plus Simple-SD and the two
learned feature combiners, then prints an accuracy@1/K table for the epa
setting. Takes several minutes; pass --quick for a small smoke run.
"""

import argparse
import time

import numpy as np

from counterranker.corpus import Setting, split_corpus
from counterranker.evaluation import EvalReport, EvalResources, KResult, evaluate, render_table
from counterranker.features import fit_standardizer
from counterranker.ltr import GbdtConfig, build_pointwise_dataset, train_gbdt, train_logreg
from counterranker.neural import DOT_OBJECTIVE, TrainConfig, Variant, train_model
from counterranker.simplesd import DEFAULT_WEIGHTS
from counterranker.synthetic import SyntheticSpec, generate_synthetic
from counterranker.textrep import EmbeddingStore, tokenize


def random_store(corpus, dim=16, seed=0):
    rng = np.random.default_rng(seed)
    entries = {}
    for arg in corpus.arguments:
        for tok in tokenize(arg.full_text()):
            if tok not in entries:
                vec = rng.normal(size=dim)
                entries[tok] = vec / np.linalg.norm(vec)
    for arg in corpus.arguments:
        entries["doc:" + arg.id] = rng.normal(size=dim)
    return EmbeddingStore(dim, entries)


def mean_report(name, reports):
    ks = [r.k for r in reports[0].results]
    results = []
    for i, k in enumerate(ks):
        acc = float(np.mean([rep.results[i].accuracy for rep in reports]))
        evaluated = reports[0].results[i].evaluated
        results.append(KResult(k=k, accuracy=acc, evaluated=evaluated, correct=round(acc * evaluated)))
    return EvalReport(model_name=name, setting=reports[0].setting, results=tuple(results))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="small corpus, few epochs")
    parser.add_argument("--seeds", default="1,2,3")
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    n_debates = 50 if args.quick else 200
    epochs = 60 if args.quick else 300
    ks = [10, 30, 50]

    neural_variants = [
        Variant.bi,
        Variant.unipolar_ret,
        Variant.cross,
        Variant.unipolar_cls,
        Variant.bipolar,
        Variant.bipolar_no_absdiff,
        Variant.bipolar_no_joint,
    ]
    per_model: dict[str, list] = {v.value: [] for v in neural_variants}
    start = time.time()
    for seed in seeds:
        corpus = generate_synthetic(SyntheticSpec(n_debates=n_debates, seed=seed))
        train, _, test = split_corpus(corpus)
        config = TrainConfig(
            epochs=epochs, seed=seed, setting=Setting.epa, retrieval_objective=DOT_OBJECTIVE
        )
        for variant in neural_variants:
            t = time.time()
            result = train_model(train, variant, config)
            rep = evaluate(result.model, test, Setting.epa, ks)
            per_model[variant.value].append(rep)
            print(
                f"seed {seed} {variant.value:20s} "
                + " ".join(f"@1/{r.k}={r.accuracy:.3f}" for r in rep.results)
                + f"  ({time.time() - t:.0f}s)",
                flush=True,
            )

    # feature models on the first seed
    corpus = generate_synthetic(SyntheticSpec(n_debates=n_debates, seed=seeds[0]))
    train, _, test = split_corpus(corpus)
    store = random_store(corpus, seed=seeds[0])
    resources = EvalResources(store=store)
    feature_reports = [
        evaluate(DEFAULT_WEIGHTS, test, Setting.epa, ks, resources=resources, model_name="simple-sd")
    ]
    dataset = build_pointwise_dataset(train, Setting.epa, store, n_neg=30, seed=seeds[0])
    standardizer = fit_standardizer(dataset.matrix)
    standardized = dataset.transform(standardizer)
    resources = EvalResources(store=store, standardizer=standardizer)
    feature_reports.append(
        evaluate(train_logreg(standardized), test, Setting.epa, ks, resources=resources, model_name="logreg-full")
    )
    gbdt = train_gbdt(
        standardized,
        GbdtConfig(max_depth=3, learning_rate=0.05, n_estimators=300, min_child_weight=0.5, seed=seeds[0]),
    )
    feature_reports.append(
        evaluate(gbdt, test, Setting.epa, ks, resources=resources, model_name="gbdt-full")
    )

    reports = feature_reports + [
        mean_report(name, reps) for name, reps in per_model.items()
    ]
    print()
    print(f"accuracy@1/K on the epa setting (neural rows: mean over seeds {seeds})")
    print(render_table(reports))
    print(f"\ntotal wall time {time.time() - start:.0f}s")


if __name__ == "__main__":
    main()
