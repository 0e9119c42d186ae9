"""Central finite-difference checks of every analytic gradient.

Each check draws random instances, compares the analytic gradient with a
central difference of the loss value, and reports the worst relative error
``|a - n| / max(|a|, |n|, 1e-8)`` (Euclidean norms over the whole gradient).
The finite differences only ever call the loss *values*, so they are an
independent route to the same numbers.
"""

from __future__ import annotations

import numpy as np

from . import losses
from .backbone import backward, forward, mlp_init
from .core import seeded_rng, softmax
from .labels import LabelStore

H = 1e-5


def rel_err(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-8))


def numeric_grad(fn, x, h=H):
    """Central differences of scalar `fn` at array `x` (not modified)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return g


def _instance(rng, c=None):
    c = int(rng.integers(2, 8)) if c is None else c
    # unit-scale logits keep probabilities away from the region where the
    # O(h^2 / p^2) truncation error of the difference quotient dominates
    z = rng.normal(0, 1.0, c)
    yd = softmax(rng.normal(0, 1.0, c))
    label = int(rng.integers(c))
    return c, z, yd, label


def check_losses(seed=0, instances=100):
    """Max relative error for each loss gradient, keyed by a short name."""
    rng = seeded_rng(seed)
    worst = {}

    def record(name, a, n):
        worst[name] = max(worst.get(name, 0.0), rel_err(a, n))

    for _ in range(instances):
        c, z, yd, label = _instance(rng)
        f = softmax(z)
        alpha, beta = rng.uniform(0, 1, 2)

        _, g = losses.cross_entropy(f, label)
        record("cross_entropy/logits", g, numeric_grad(lambda v: losses.cross_entropy(softmax(v), label)[0], z))

        _, g = losses.kl_label_to_pred(yd, f)
        record("kl_label_to_pred/yd", g, numeric_grad(lambda v: losses.kl_label_to_pred(v, f)[0], yd))

        _, g_yd, g_z = losses.kl_pred_to_label(f, yd)
        record("kl_pred_to_label/yd", g_yd, numeric_grad(lambda v: losses.kl_pred_to_label(f, v)[0], yd))
        record("kl_pred_to_label/logits", g_z,
               numeric_grad(lambda v: losses.kl_pred_to_label(softmax(v), yd)[0], z))

        _, g = losses.compatibility(label, yd)
        record("compatibility/yd", g, numeric_grad(lambda v: losses.compatibility(label, v)[0], yd))

        _, g = losses.entropy(f)
        record("entropy/logits", g, numeric_grad(lambda v: losses.entropy(softmax(v))[0], z))

        b = losses.pencil_total(f, yd, label, alpha, beta, c)
        record("total/logits", b.grad_wrt_logits,
               numeric_grad(lambda v: losses.pencil_total(softmax(v), yd, label, alpha, beta, c).total, z))
        record("total/yd", b.grad_wrt_yd,
               numeric_grad(lambda v: losses.pencil_total(f, v, label, alpha, beta, c).total, yd))
    return worst


def check_label_store(seed=0, instances=100):
    """Gradient of the total loss w.r.t. the label variables, as applied by
    `LabelStore.apply_label_gradient` (step recovered from a unit-lambda update)."""
    rng = seeded_rng(seed)
    worst = 0.0
    for _ in range(instances):
        c, z, _, label = _instance(rng)
        f = softmax(z)
        yt = rng.normal(0, 1.0, c)
        alpha, beta = rng.uniform(0, 1, 2)
        store = LabelStore(yt[None, :])
        b = losses.pencil_total(f, store.distributions(0), label, alpha, beta, c)
        store.apply_label_gradient(0, b.grad_wrt_yd, 1.0)
        analytic = yt - store.y_tilde[0]
        numeric = numeric_grad(lambda v: losses.pencil_total(f, softmax(v), label, alpha, beta, c).total, yt)
        worst = max(worst, rel_err(analytic, numeric))
    return worst


def check_backbone(seed=0, instances=100, layer_sizes=(2, 8, 3)):
    """Total-loss and cross-entropy gradients w.r.t. every network parameter."""
    rng = seeded_rng(seed)
    c = layer_sizes[-1]
    worst = {"backbone/total": 0.0, "backbone/cross_entropy": 0.0}
    for _ in range(instances):
        params = mlp_init(layer_sizes, int(rng.integers(2**32)))
        for b in params.biases:
            b[:] = rng.normal(0, 0.5, b.shape)
        x = rng.normal(0, 1, layer_sizes[0])
        yd = softmax(rng.normal(0, 1.0, c))
        label = int(rng.integers(c))
        alpha, beta = rng.uniform(0, 1, 2)

        def total(p):
            return losses.pencil_total(softmax(forward(p, x)[0]), yd, label, alpha, beta, c).total

        def ce(p):
            return losses.cross_entropy(softmax(forward(p, x)[0]), label)[0]

        logits, cache = forward(params, x)
        f = softmax(logits)
        for name, fn, g_logits in (
            ("backbone/total", total, losses.pencil_total(f, yd, label, alpha, beta, c).grad_wrt_logits),
            ("backbone/cross_entropy", ce, losses.cross_entropy(f, label)[1]),
        ):
            analytic = backward(params, cache, g_logits)
            numeric = []
            for arr in params.arrays():
                def fn_arr(v, arr=arr):
                    saved = arr.copy()
                    arr[...] = v
                    try:
                        return fn(params)
                    finally:
                        arr[...] = saved
                numeric.append(numeric_grad(fn_arr, arr))
            err = rel_err(np.concatenate([a.ravel() for a in analytic]),
                          np.concatenate([n.ravel() for n in numeric]))
            worst[name] = max(worst[name], err)
    return worst


def run_all(seed=0, instances=100):
    """Every check; returns ``{name: max relative error}``."""
    out = check_losses(seed, instances)
    out["label_store/y_tilde"] = check_label_store(seed + 1, instances)
    out.update(check_backbone(seed + 2, instances))
    return out
