"""Fixed-coefficient linear scorer over the raw feature vector.

The default weights keep the sum-aggregated Manhattan and Earth-Mover
similarities as positive evidence (0.9 each) and penalize the min/max
Manhattan aggregates (-0.1 each); everything else is zero. Raw,
unstandardized features feed this scorer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Argument
from .features import N_FEATURES, FeatureContext, extract_features
from .ranking import RankedList


def default_alpha() -> np.ndarray:
    alpha = np.zeros(N_FEATURES)
    alpha[0] = -0.1  # tf-manhattan min
    alpha[1] = -0.1  # tf-manhattan max
    alpha[3] = 0.9  # tf-manhattan sum
    alpha[7] = 0.9  # earth-mover sum
    return alpha


@dataclass(frozen=True)
class LinearWeights:
    alpha: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.alpha, dtype=np.float64)
        if arr.shape != (N_FEATURES,):
            raise ValueError(f"alpha must have {N_FEATURES} entries")
        if not np.isfinite(arr).all():
            raise ValueError("alpha entries must be finite")
        object.__setattr__(self, "alpha", arr)


DEFAULT_WEIGHTS = LinearWeights(default_alpha())


def simplesd_score(x: np.ndarray, w: LinearWeights = DEFAULT_WEIGHTS) -> float:
    # fsum keeps the 20-term dot product correctly rounded, so hand-checked
    # scores (all-ones -> 1.6) come out exact
    x = np.asarray(x, dtype=np.float64)
    return math.fsum(x * w.alpha)


def rank_by_simplesd(
    point: Argument,
    pool: Sequence[Argument],
    ctx: FeatureContext,
    w: LinearWeights = DEFAULT_WEIGHTS,
) -> RankedList:
    """Score every candidate with the linear combiner; sort desc, ties by id."""
    scores = [
        (cand.id, simplesd_score(extract_features(point, cand, ctx), w))
        for cand in pool
    ]
    return RankedList.from_scores(scores)
