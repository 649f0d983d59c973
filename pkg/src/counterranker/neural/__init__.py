"""Neural scorers: tiny encoder, retrieval/classification heads, training."""

from .gradcheck import grad_check
from .model import (
    ClassificationHead,
    CrossHead,
    NeuralModel,
    RetrievalHead,
    SEP_TOKEN,
    TinyEncoder,
    UNK_TOKEN,
    Variant,
    build_vocab,
    checkpoint_bytes,
    checkpoint_fingerprint,
    classification_prob,
    encode,
    init_model,
    layer_norm,
    load_checkpoint,
    retrieval_score,
    save_checkpoint,
)
from .training import (
    Adam,
    BERT_SCALE_LEARNING_RATE,
    DOT_OBJECTIVE,
    EUCLIDEAN_OBJECTIVE,
    HARD_SAMPLING,
    RANDOM_SAMPLING,
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    cross_entropy,
    joint_loss,
    loss_trace_csv,
    sample_loss_and_grads,
    sample_negative,
    train_model,
    triplet_loss,
    zero_grads,
)

__all__ = [
    "Adam",
    "BERT_SCALE_LEARNING_RATE",
    "ClassificationHead",
    "CrossHead",
    "DOT_OBJECTIVE",
    "EUCLIDEAN_OBJECTIVE",
    "HARD_SAMPLING",
    "NeuralModel",
    "RANDOM_SAMPLING",
    "RetrievalHead",
    "SEP_TOKEN",
    "TinyEncoder",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "UNK_TOKEN",
    "Variant",
    "build_vocab",
    "checkpoint_bytes",
    "checkpoint_fingerprint",
    "classification_prob",
    "cross_entropy",
    "encode",
    "grad_check",
    "init_model",
    "joint_loss",
    "layer_norm",
    "load_checkpoint",
    "loss_trace_csv",
    "retrieval_score",
    "sample_loss_and_grads",
    "sample_negative",
    "save_checkpoint",
    "train_model",
    "triplet_loss",
    "zero_grads",
]
