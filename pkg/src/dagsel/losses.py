"""List-wise and binary losses over one sample's observed choice logits.

The list-wise loss pushes every successful choice above every failed one:

    L = log(1 + sum_{p=0} e^{s}) + log(1 + sum_{p=1} e^{-s})

Sums run over observed entries only. Both losses return exact gradients
w.r.t. the logits; masked-out positions get exactly zero and never
influence the result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChoiceBatch:
    logits: np.ndarray
    labels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        labels = np.asarray(self.labels)
        mask = np.asarray(self.mask, dtype=bool)
        if not (logits.shape == labels.shape == mask.shape) or logits.ndim != 1:
            raise ValueError("logits, labels, mask must be equal-length vectors")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be binary")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "labels", labels.astype(np.int8))
        object.__setattr__(self, "mask", mask)


def _log1p_sumexp(xs: np.ndarray) -> float:
    """log(1 + sum e^{x}), stable for any magnitudes; 0 for empty xs."""
    if xs.size == 0:
        return 0.0
    m = max(float(xs.max()), 0.0)
    return m + np.log(np.exp(-m) + np.exp(xs - m).sum())


def cce_loss(batch: ChoiceBatch) -> tuple[float, np.ndarray]:
    """List-wise loss and its gradient w.r.t. every logit."""
    s = batch.logits
    pos = batch.mask & (batch.labels == 1)
    neg = batch.mask & (batch.labels == 0)
    loss_neg = _log1p_sumexp(s[neg])
    loss_pos = _log1p_sumexp(-s[pos])
    grad = np.zeros_like(s)
    grad[neg] = np.exp(s[neg] - loss_neg)
    grad[pos] = -np.exp(-s[pos] - loss_pos)
    return loss_neg + loss_pos, grad


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    nonneg = x >= 0
    out[nonneg] = 1.0 / (1.0 + np.exp(-x[nonneg]))
    e = np.exp(x[~nonneg])
    out[~nonneg] = e / (1.0 + e)
    return out


def bce_loss(batch: ChoiceBatch) -> tuple[float, np.ndarray]:
    """Mean per-entry binary cross-entropy over observed choices."""
    m = batch.mask
    n = int(m.sum())
    grad = np.zeros_like(batch.logits)
    if n == 0:
        return 0.0, grad
    s = batch.logits[m]
    p = batch.labels[m].astype(np.float64)
    loss = float(np.mean(_softplus(s) - p * s))
    grad[m] = (_sigmoid(s) - p) / n
    return loss, grad
