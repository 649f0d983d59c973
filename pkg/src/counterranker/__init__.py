"""Counter-argument retrieval engine.

Scores candidate counter-arguments with hand-crafted similarity and
dissimilarity features (fixed-weight and learned combiners) and with small
dual-head neural scorers trained by joint triplet and cross-entropy losses,
evaluated with accuracy@1/K under four candidate-filtering settings.
"""

from .corpus import (
    Argument,
    Corpus,
    CorpusError,
    Setting,
    Stance,
    candidate_pool,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .evaluation import EvalReport, EvalResources, accuracy_at_1, evaluate, render_table
from .features import (
    FeatureContext,
    FeaturePipeline,
    N_FEATURES,
    Standardizer,
    apply_standardizer,
    extract_features,
    fit_standardizer,
)
from .ranking import RankedList
from .simplesd import DEFAULT_WEIGHTS, LinearWeights, rank_by_simplesd, simplesd_score
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
