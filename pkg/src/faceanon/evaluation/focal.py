"""Multi-label focal loss with its analytic logit gradient.

With focusing exponent gamma = 0 and balance alpha = 0.5 the loss reduces to
half the binary cross-entropy per element; larger gamma down-weights
well-classified elements. Probabilities are clamped to [1e-7, 1 - 1e-7], so
degenerate inputs never produce infinities.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

PROB_EPS = 1e-7


def _validate(probs, labels, gamma, alpha):
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValidationError(
            f"probabilities shape {probs.shape} != labels shape {labels.shape}"
        )
    if gamma < 0:
        raise ValidationError("focal gamma must be >= 0")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("focal alpha must lie in [0, 1]")
    if np.any((labels != 0) & (labels != 1)):
        raise ValidationError("labels must be binary")
    return np.clip(probs, PROB_EPS, 1.0 - PROB_EPS), labels


def focal_loss(probs, labels, gamma: float = 2.0, alpha: float = 0.25) -> float:
    """Mean focal loss over every (sample, attribute) element."""
    probs, labels = _validate(probs, labels, gamma, alpha)
    p_t = labels * probs + (1 - labels) * (1 - probs)
    alpha_t = labels * alpha + (1 - labels) * (1 - alpha)
    elements = -alpha_t * (1 - p_t) ** gamma * np.log(p_t)
    return float(elements.mean())


def focal_loss_logit_grad(probs, labels, gamma: float = 2.0,
                          alpha: float = 0.25) -> np.ndarray:
    """d(mean focal loss)/d(logits), with probs = sigmoid(logits).

    Derivation: with p_t the true-class probability, dL/dp_t =
    alpha_t (1-p_t)^(gamma-1) [gamma p_t log p_t - (1-p_t)] / p_t and
    dp_t/dz = (2y - 1) p (1 - p).
    """
    probs, labels = _validate(probs, labels, gamma, alpha)
    p_t = labels * probs + (1 - labels) * (1 - probs)
    alpha_t = labels * alpha + (1 - labels) * (1 - alpha)
    one_minus = 1.0 - p_t
    if gamma == 0.0:
        dl_dpt = -alpha_t / p_t
    else:
        dl_dpt = alpha_t * one_minus ** (gamma - 1.0) * (
            gamma * p_t * np.log(p_t) - one_minus
        ) / p_t
    dpt_dz = (2.0 * labels - 1.0) * probs * (1.0 - probs)
    return dl_dpt * dpt_dz / probs.size
