"""Composite training loss: batch MSE plus a weighted KL-inspired term.

Predictions and labels are ``(b, 10)`` arrays, nine forces then the energy.
"""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 0.03125
    epsilon: float = 1e-8
    batch_size: int = 128
    # the signed KLI sum is clipped at zero so the loss stays bounded below
    clip_kli: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    def to_dict(self):
        return asdict(self)


def _check(pred, labels):
    pred = np.asarray(pred, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if pred.shape != labels.shape or pred.ndim != 2 or pred.shape[1] != 10:
        raise ValueError(
            f"predictions {pred.shape} and labels {labels.shape} must both be (b, 10)"
        )
    return pred, labels


def mse_batch(pred, labels):
    pred, labels = _check(pred, labels)
    return float(np.sum((labels - pred) ** 2) / pred.shape[0])


def kli_terms(pred, labels, epsilon=1e-8):
    """Per-entry ``|v|^2 log|v / (p + eps)|^2``, with 0 where the label is 0."""
    pred, labels = _check(pred, labels)
    out = np.zeros_like(labels)
    nz = labels != 0.0
    v = labels[nz]
    # log|v/q|^2 as a difference of logs: the squared ratio underflows for tiny |v|
    out[nz] = v**2 * 2.0 * (np.log(np.abs(v)) - np.log(np.abs(pred[nz] + epsilon)))
    return out


def kli_batch_sq(pred, labels, epsilon=1e-8):
    terms = kli_terms(pred, labels, epsilon)
    return float(terms.sum() / terms.shape[0])


def batch_loss(pred, labels, config=LossConfig()):
    kli = kli_batch_sq(pred, labels, config.epsilon)
    if config.clip_kli:
        kli = max(kli, 0.0)
    return mse_batch(pred, labels) + config.gamma * kli


def batch_loss_grad(pred, labels, config=LossConfig()):
    """d batch_loss / d pred, shape ``(b, 10)``."""
    pred, labels = _check(pred, labels)
    b = pred.shape[0]
    grad = -2.0 * (labels - pred) / b
    kli = kli_batch_sq(pred, labels, config.epsilon)
    if config.gamma and not (config.clip_kli and kli <= 0.0):
        # d/dp [v^2 log v^2 - v^2 log (p + eps)^2] = -2 v^2 / (p + eps)
        grad += config.gamma * (-2.0 * labels**2 / (pred + config.epsilon)) / b
    return grad


def axis_losses(pred, labels):
    """Squared force residuals summed per axis and averaged over the batch: ``(3,)``."""
    pred, labels = _check(pred, labels)
    r2 = ((labels[:, :9] - pred[:, :9]) ** 2).reshape(-1, 3, 3)
    return r2.sum(axis=(0, 1)) / pred.shape[0]
