"""Numerical substrate shared by every other module.

All arithmetic is float64. Functions accept a single vector or a 2-D batch and
operate along the last axis.
"""

from __future__ import annotations

import numpy as np

LOG_EPS = 1e-12

# Floor applied to softmax outputs so that probabilities stay strictly positive
# even when a logit gap exceeds the float64 exponent range. Small enough that
# 1 / PROB_FLOOR still leaves headroom below the float64 maximum.
PROB_FLOOR = 1e-300


def softmax(v):
    """Max-shifted softmax along the last axis.

    Raises
    ------
    ValueError
        If `v` is empty or contains NaN/Inf.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    z = v - v.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return np.maximum(p, PROB_FLOOR)


def log_clamped(p, eps: float = LOG_EPS):
    """Return ``log(max(p, eps))``; works on scalars and arrays."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    out = np.log(np.maximum(p, eps))
    return float(out) if np.ndim(out) == 0 else out


def argmax_tiebreak(v):
    """Index of the maximum along the last axis; ties go to the smallest index.

    ``np.argmax`` already returns the first occurrence, which is exactly the
    tie-break rule we want. The wrapper pins that behaviour down and rejects
    empty input.
    """
    v = np.asarray(v)
    if v.size == 0 or v.shape[-1] == 0:
        raise ValueError("argmax of an empty vector")
    out = np.argmax(v, axis=-1)
    return int(out) if out.ndim == 0 else out


def seeded_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Reproducible random stream.

    Backed by numpy's PCG64 (PCG XSL RR 128/64) bit generator seeded through
    ``SeedSequence``. The raw stream for a given seed is stable across platforms
    and numpy releases, so datasets and training runs are portable.

    `stream` selects an independent child stream of the same seed (via the
    SeedSequence spawn key), so one experiment seed can feed several consumers
    without them sharing draws.
    """
    if stream is None:
        return np.random.Generator(np.random.PCG64(seed))
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def softmax_vjp(p, g):
    """Vector-Jacobian product of softmax: given ``p = softmax(z)`` and
    ``g = dL/dp`` return ``dL/dz = p * (g - <p, g>)``."""
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    return p * (g - np.sum(p * g, axis=-1, keepdims=True))
