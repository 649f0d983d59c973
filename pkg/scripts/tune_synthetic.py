"""Sweep synthetic-corpus and training knobs; print per-config metrics.

Helper for choosing the experiment defaults; not part of the test suite.
"""

import argparse
import time

from counterranker.corpus import Setting, candidate_pool, split_corpus
from counterranker.evaluation import evaluate
from counterranker.neural import TrainConfig, Variant, train_model
from counterranker.simdis import cosine_tf_sim
from counterranker.synthetic import SyntheticSpec, generate_synthetic
from counterranker.textrep import term_frequency, tokenize


def paraphrase_rate(corpus):
    """How often plain tf-cosine argmax picks the same-stance paraphrase."""
    tf = {a.id: term_frequency(tokenize(a.full_text())) for a in corpus.arguments}
    hits = gold_hits = 0
    points = corpus.points_with_counter()
    for p in points:
        pool = candidate_pool(corpus, p, Setting.epa)
        best = max(pool, key=lambda a: (cosine_tf_sim(tf[p.id], tf[a.id]), a.id))
        hits += best.id.startswith(p.debate_id) and "-s" in best.id
        gold_hits += best.id == p.counter_id
    return hits / len(points), gold_hits / len(points)


def run(tag, spec_kw, cfg_kw, variants, seed=1):
    spec = SyntheticSpec(n_debates=200, seed=seed, **spec_kw)
    corpus = generate_synthetic(spec)
    train, _, test = split_corpus(corpus)
    para, gold = paraphrase_rate(test)
    out = [f"{tag:36s} para {para:.2f} gold {gold:.2f}"]
    cfg = TrainConfig(seed=seed, setting=Setting.epa, retrieval_objective="dot", **cfg_kw)
    for variant in variants:
        t = time.time()
        res = train_model(train, variant, cfg)
        rep = evaluate(res.model, test, Setting.epa, [10])
        out.append(f"{variant.value.split('-')[-1][:4]} {rep.results[0].accuracy:.3f} ({time.time()-t:.0f}s)")
    print("  ".join(out), flush=True)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true", help="also train the ablations")
    args = parser.parse_args()
    variants = [Variant.bipolar]
    if args.full:
        variants += [Variant.unipolar_ret, Variant.bipolar_no_absdiff]

    base = dict(n_aspects=5, aspect_vocab_size=12, aspect_tokens_per_text=6)
    run("A stance4x3 fill1 ep150", dict(**base, stance_vocab_size=4, filler_tokens_per_text=1), dict(epochs=150), variants)
    run("B stance4x2 fill1 ep150", dict(**base, stance_vocab_size=4, stance_tokens_per_text=2, filler_tokens_per_text=1), dict(epochs=150), variants)
    run("C stance6x3 fill1 ep150 lr3e-3", dict(**base, stance_vocab_size=6, filler_tokens_per_text=1), dict(epochs=150, learning_rate=3e-3), variants)
    run("D A + d128", dict(**base, stance_vocab_size=4, filler_tokens_per_text=1), dict(epochs=150, d_emb=128, d_model=128), variants)
    run("E A + ep300", dict(**base, stance_vocab_size=4, filler_tokens_per_text=1), dict(epochs=300), variants)
    run("F A + aspects8", dict(n_aspects=8, aspect_vocab_size=12, aspect_tokens_per_text=6, stance_vocab_size=4, filler_tokens_per_text=1), dict(epochs=150), variants)
