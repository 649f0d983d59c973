import numpy as np
import pytest

from counterranker.corpus import Argument, Corpus, Stance
from counterranker.synthetic import SyntheticSpec, generate_synthetic
from counterranker.textrep import EmbeddingStore, tokenize


def make_argument(
    ident="a1",
    debate="d1",
    theme="society",
    topic="ban smoking",
    stance=Stance.pro,
    conclusion="we should ban smoking",
    premise="smoking harms bystanders in public places",
    counter_id=None,
):
    return Argument(
        id=ident,
        debate_id=debate,
        theme=theme,
        topic=topic,
        stance=stance,
        conclusion=conclusion,
        premise=premise,
        counter_id=counter_id,
    )


@pytest.fixture
def three_record_corpus():
    """Point + its counter + an unrelated argument in another debate."""
    point = make_argument("p1", counter_id="c1")
    counter = make_argument(
        "c1",
        stance=Stance.con,
        conclusion="smoking bans overreach",
        premise="adults can choose their own risks outdoors",
    )
    unrelated = make_argument(
        "u1",
        debate="d2",
        theme="economy",
        topic="raise taxes",
        conclusion="taxes should rise",
        premise="public services require sustained funding",
    )
    return Corpus([point, counter, unrelated])


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(SyntheticSpec(n_debates=24, n_aspects=4, seed=7))


def random_store_for(corpus, dim=16, seed=0, extra_tokens=()):
    """Unit-norm random word vectors for the corpus vocabulary plus one
    document vector per argument id."""
    rng = np.random.default_rng(seed)
    entries = {}
    vocab = set(extra_tokens)
    for arg in corpus.arguments:
        vocab.update(tokenize(arg.full_text()))
    for token in sorted(vocab):
        vec = rng.normal(size=dim)
        entries[token] = vec / np.linalg.norm(vec)
    for arg in corpus.arguments:
        vec = rng.normal(size=dim)
        entries["doc:" + arg.id] = vec / np.linalg.norm(vec)
    return EmbeddingStore(dim, entries)


@pytest.fixture(scope="session")
def small_synthetic_store(small_synthetic):
    return random_store_for(small_synthetic)
