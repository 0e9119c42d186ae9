"""
Three ways to corrupt labels
----------------------------

Symmetric noise redraws a label uniformly over all classes, so some
redraws land back on the true class. Circular noise moves a label to the
next class. Pair noise flips specific source classes to fixed targets.
"""

import numpy as np

from pencil_lab import CIFAR10_PAIRS, Dataset, NoiseSpec, corrupted_fraction, inject_noise

y = np.repeat(np.arange(10), 10_000)
ds = Dataset(np.zeros((y.size, 1)), y, 10, y)

# %%
# Corrupted fraction for each mode at r = 0.3.

for spec in (NoiseSpec("symmetric", 0.3),
             NoiseSpec("asymmetric-circular", 0.3),
             NoiseSpec("asymmetric-pairs", 0.3, CIFAR10_PAIRS)):
    noisy = inject_noise(ds, spec, seed=0)
    print(f"{spec.kind:20s} {corrupted_fraction(noisy):.4f}")

# %%
# Confusion counts for the pair mode: only the mapped rows leak.

noisy = inject_noise(ds, NoiseSpec("asymmetric-pairs", 0.3, CIFAR10_PAIRS), seed=0)
confusion = np.zeros((10, 10), int)
np.add.at(confusion, (noisy.true_labels, noisy.noisy_labels), 1)
print(confusion)
