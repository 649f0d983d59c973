"""Finite-difference verification of every analytic gradient."""

from __future__ import annotations

import numpy as np

from .model import NeuralModel
from .training import EUCLIDEAN_OBJECTIVE, sample_loss_and_grads, zero_grads


def grad_check(
    model: NeuralModel,
    sample: tuple[np.ndarray, np.ndarray, np.ndarray],
    h: float = 1e-6,
    margin: float = 1.0,
    objective: str = EUCLIDEAN_OBJECTIVE,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Sweeps every entry of every trainable parameter. The relative error uses
    max(1, |analytic|, |numeric|) in the denominator so tiny gradients are
    compared absolutely.
    """
    grads = zero_grads(model)
    sample_loss_and_grads(model, sample, margin, grads, objective)
    worst = 0.0
    for name, param in model.named_params().items():
        flat = param.ravel()
        analytic = grads[name].ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            loss_plus = sample_loss_and_grads(model, sample, margin, None, objective)
            flat[i] = original - h
            loss_minus = sample_loss_and_grads(model, sample, margin, None, objective)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            denom = max(1.0, abs(analytic[i]), abs(numeric))
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
