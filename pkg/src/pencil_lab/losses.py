"""Per-sample losses with analytic gradients.

Every function takes probability vectors (the network prediction `f` and/or
the label distribution `yd`) either as single length-c vectors or as ``(b, c)``
batches, and returns per-sample values plus gradients of the same shape as its
inputs. Logs use `log_clamped`; gradients in `yd` coordinates are the exact
element-wise derivatives of the unclamped expressions, which coincide with the
clamped ones whenever the probabilities exceed the clamp floor.

Gradients "w.r.t. logits" assume the probability vector came out of a softmax
over those logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import log_clamped, softmax_vjp


def _as_prob(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] < 1:
        raise ValueError("expected a probability vector or a batch of them")
    return p


def _onehot(labels, c):
    labels = np.asarray(labels)
    if labels.dtype.kind not in "iu":
        raise ValueError("labels must be integers")
    if np.any(labels < 0) or np.any(labels >= c):
        raise ValueError(f"label out of range [0, {c})")
    return np.eye(c)[labels]


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def cross_entropy(f, label):
    """Cross-entropy against a hard label; gradient is ``f - onehot(label)``."""
    f = _as_prob(f)
    y = _onehot(label, f.shape[-1])
    value = -np.sum(y * log_clamped(f), axis=-1)
    return _scalar(value), f - y


def kl_label_to_pred(yd, f):
    """``KL(yd || f)`` and its gradient in `yd`: ``log(yd_j / f_j) + 1``."""
    yd, f = _as_prob(yd), _as_prob(f)
    log_ratio = log_clamped(yd) - log_clamped(f)
    value = np.sum(yd * log_ratio, axis=-1)
    return _scalar(value), log_ratio + 1.0


def kl_pred_to_label(f, yd):
    """``KL(f || yd)``, the classification loss.

    Returns
    -------
    value : float or ndarray
    grad_wrt_yd : ndarray
        ``-f_j / yd_j`` per component.
    grad_wrt_logits : ndarray
        ``d value / d f_j = log(f_j / yd_j) + 1`` pulled back through softmax.
    """
    f, yd = _as_prob(f), _as_prob(yd)
    log_ratio = log_clamped(f) - log_clamped(yd)
    value = np.sum(f * log_ratio, axis=-1)
    return _scalar(value), -f / yd, softmax_vjp(f, log_ratio + 1.0)


def compatibility(noisy_label, yd):
    """Cross-entropy between the noisy hard label and the label distribution.

    Does not involve the prediction, so it only has a `yd` gradient.
    """
    yd = _as_prob(yd)
    y = _onehot(noisy_label, yd.shape[-1])
    value = -np.sum(y * log_clamped(yd), axis=-1)
    return _scalar(value), -y / yd


def entropy(f):
    """Shannon entropy of the prediction (nats) and its logit gradient."""
    f = _as_prob(f)
    logf = log_clamped(f)
    value = -np.sum(f * logf, axis=-1)
    return _scalar(value), softmax_vjp(f, -(logf + 1.0))


@dataclass
class LossBundle:
    """Per-sample loss terms and the gradients of the weighted total.

    ``total = lc / c + alpha * lo + beta / c * le``.
    """

    lc: float | np.ndarray
    lo: float | np.ndarray
    le: float | np.ndarray
    total: float | np.ndarray
    grad_wrt_logits: np.ndarray
    grad_wrt_yd: np.ndarray


def combine(lc, lo, le, alpha, beta, c):
    return lc / c + alpha * lo + beta / c * le


def pencil_total(f, yd, noisy_label, alpha, beta, c=None) -> LossBundle:
    f, yd = _as_prob(f), _as_prob(yd)
    if c is None:
        c = f.shape[-1]
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    lc, lc_yd, lc_logits = kl_pred_to_label(f, yd)
    lo, lo_yd = compatibility(noisy_label, yd)
    le, le_logits = entropy(f)
    return LossBundle(
        lc=lc,
        lo=lo,
        le=le,
        total=combine(lc, lo, le, alpha, beta, c),
        grad_wrt_logits=lc_logits / c + beta / c * le_logits,
        grad_wrt_yd=lc_yd / c + alpha * lo_yd,
    )
