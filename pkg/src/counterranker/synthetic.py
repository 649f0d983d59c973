"""Synthetic debate corpus generator for desk-scale evaluation.

Each debate contains an argument point, its gold counter, and distractors
engineered so that pure similarity ranking fails: the gold counter shares
the point's aspect tokens but none of its stance tokens, while a paraphrase
distractor shares both and therefore looks *more* similar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Argument, Corpus, Stance


@dataclass(frozen=True)
class SyntheticSpec:
    n_aspects: int = 10
    n_debates: int = 200
    n_same_stance_distractors: int = 1  # same-aspect paraphrases of the point
    n_cross_aspect_distractors: int = 1  # opposite stance, different aspect
    n_random_distractors: int = 1
    aspect_vocab_size: int = 16  # tokens per aspect group
    stance_vocab_size: int = 4  # tokens per stance
    filler_vocab_size: int = 30
    aspect_tokens_per_text: int = 8
    stance_tokens_per_text: int = 3
    filler_tokens_per_text: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_aspects < 1 or self.n_debates < 1:
            raise ValueError("need at least one aspect and one debate")
        if min(
            self.n_same_stance_distractors,
            self.n_cross_aspect_distractors,
            self.n_random_distractors,
        ) < 0:
            raise ValueError("distractor counts must be non-negative")
        if self.aspect_tokens_per_text > self.aspect_vocab_size:
            raise ValueError("aspect sample larger than aspect vocabulary")
        if self.stance_tokens_per_text > self.stance_vocab_size:
            raise ValueError("stance sample larger than stance vocabulary")
        if self.filler_tokens_per_text > self.filler_vocab_size:
            raise ValueError("filler sample larger than filler vocabulary")
        if self.n_cross_aspect_distractors > 0 and self.n_aspects < 2:
            raise ValueError("cross-aspect distractors require n_aspects >= 2")


def _vocab(prefix: str, group: int | None, size: int) -> list[str]:
    if group is None:
        return [f"{prefix}{j:02d}" for j in range(size)]
    return [f"{prefix}{group:02d}x{j:02d}" for j in range(size)]


def _sample(rng: np.random.Generator, vocab: list[str], k: int) -> list[str]:
    idx = rng.choice(len(vocab), size=k, replace=False)
    return [vocab[int(i)] for i in idx]


def _mutate(
    rng: np.random.Generator, tokens: list[str], vocab: list[str], keep_at_least: float
) -> list[str]:
    """Replace at most (1 - keep_at_least) of the tokens with fresh ones from
    the same vocabulary."""
    k = len(tokens)
    max_swaps = int(k * (1.0 - keep_at_least))
    swaps = int(rng.integers(0, max_swaps + 1))
    if swaps == 0:
        return list(tokens)
    out = list(tokens)
    positions = rng.choice(k, size=swaps, replace=False)
    spare = [t for t in vocab if t not in tokens]
    if not spare:
        return out
    replacements = rng.choice(len(spare), size=min(swaps, len(spare)), replace=False)
    for pos, rep in zip(positions, replacements):
        out[int(pos)] = spare[int(rep)]
    return out


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Deterministic corpus under the spec seed; one point per debate with
    exactly one gold counter."""
    rng = np.random.default_rng(spec.seed)
    aspect_vocabs = [
        _vocab("asp", a, spec.aspect_vocab_size) for a in range(spec.n_aspects)
    ]
    pro_vocab = _vocab("pro", None, spec.stance_vocab_size)
    con_vocab = _vocab("con", None, spec.stance_vocab_size)
    filler_vocab = _vocab("fill", None, spec.filler_vocab_size)

    arguments: list[Argument] = []
    for d in range(spec.n_debates):
        aspect = d % spec.n_aspects
        debate_id = f"debate{d:04d}"
        theme = f"theme{aspect:02d}"
        topic_token = f"topic{d:04d}"

        aspect_tokens = _sample(rng, aspect_vocabs[aspect], spec.aspect_tokens_per_text)

        def stance_tokens(vocab: list[str]) -> list[str]:
            return _sample(rng, vocab, spec.stance_tokens_per_text)

        def filler() -> list[str]:
            return _sample(rng, filler_vocab, spec.filler_tokens_per_text)

        def text(parts: list[list[str]]) -> str:
            return " ".join(t for part in parts for t in part)

        point_id = f"{debate_id}-p"
        gold_id = f"{debate_id}-c"
        point_pro = stance_tokens(pro_vocab)
        arguments.append(
            Argument(
                id=point_id,
                debate_id=debate_id,
                theme=theme,
                topic=topic_token,
                stance=Stance.pro,
                conclusion=text([[topic_token], point_pro]),
                premise=text([aspect_tokens, stance_tokens(pro_vocab), filler()]),
                counter_id=gold_id,
            )
        )
        # gold counter: the point's aspect tokens, zero stance overlap
        gold_aspect = list(aspect_tokens)
        arguments.append(
            Argument(
                id=gold_id,
                debate_id=debate_id,
                theme=theme,
                topic=topic_token,
                stance=Stance.con,
                conclusion=text([[topic_token], stance_tokens(con_vocab)]),
                premise=text([gold_aspect, stance_tokens(con_vocab), filler()]),
                counter_id=None,
            )
        )
        for i in range(spec.n_same_stance_distractors):
            para_aspect = _mutate(rng, aspect_tokens, aspect_vocabs[aspect], 0.8)
            arguments.append(
                Argument(
                    id=f"{debate_id}-s{i}",
                    debate_id=debate_id,
                    theme=theme,
                    topic=topic_token,
                    stance=Stance.pro,
                    conclusion=text([[topic_token], point_pro]),
                    premise=text([para_aspect, stance_tokens(pro_vocab), filler()]),
                    counter_id=None,
                )
            )
        for i in range(spec.n_cross_aspect_distractors):
            other = int((aspect + 1 + rng.integers(spec.n_aspects - 1)) % spec.n_aspects)
            arguments.append(
                Argument(
                    id=f"{debate_id}-x{i}",
                    debate_id=debate_id,
                    theme=theme,
                    topic=topic_token,
                    stance=Stance.con,
                    conclusion=text([[topic_token], stance_tokens(con_vocab)]),
                    premise=text(
                        [
                            _sample(rng, aspect_vocabs[other], spec.aspect_tokens_per_text),
                            stance_tokens(con_vocab),
                            filler(),
                        ]
                    ),
                    counter_id=None,
                )
            )
        for i in range(spec.n_random_distractors):
            stance = Stance.pro if (d + i) % 2 == 0 else Stance.con
            vocab = pro_vocab if stance is Stance.pro else con_vocab
            arguments.append(
                Argument(
                    id=f"{debate_id}-r{i}",
                    debate_id=debate_id,
                    theme=theme,
                    topic=topic_token,
                    stance=stance,
                    conclusion=text([[topic_token], stance_tokens(vocab)]),
                    premise=text(
                        [
                            _sample(rng, filler_vocab, min(6, spec.filler_vocab_size)),
                            stance_tokens(vocab),
                        ]
                    ),
                    counter_id=None,
                )
            )
    return Corpus(arguments)
