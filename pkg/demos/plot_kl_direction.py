"""
Which KL direction moves labels faster
--------------------------------------

The label distributions receive a gradient from the classification loss.
With KL(f || y^d) that gradient is ``-f / y^d``; with the usual
KL(y^d || f) it is ``log(y^d / f) + 1``. Two points make the difference
plain.
"""

import numpy as np

from pencil_lab import losses


def component(f_j, yd_j):
    f = np.array([f_j, 1 - f_j])
    yd = np.array([yd_j, 1 - yd_j])
    forward = losses.kl_label_to_pred(yd, f)[1][0]
    reverse = losses.kl_pred_to_label(f, yd)[1][0]
    return forward, reverse


# %%
# The network is confident (0.9) about a class the label nearly rules out
# (0.05). This is the typical wrong-label situation.

fwd, rev = component(0.9, 0.05)
print(f"f=0.90, y=0.05: forward {fwd:+.4f}  reverse {rev:+.4f}")

# %%
# The label is confident (0.9) about a class the network rejects (0.05).

fwd, rev = component(0.05, 0.9)
print(f"f=0.05, y=0.90: forward {fwd:+.4f}  reverse {rev:+.4f}")

# %%
# A sweep over the label value with the prediction fixed at 0.9.

for yd_j in (0.01, 0.05, 0.2, 0.5, 0.9):
    fwd, rev = component(0.9, yd_j)
    print(f"y={yd_j:4.2f}: forward {fwd:+8.3f}  reverse {rev:+8.3f}")
