"""
Label learning on clean data
----------------------------

With no noise at all, a small compatibility weight and a small label
step, learning the labels should neither hurt accuracy nor flip any
label.
"""

import numpy as np

from pencil_lab import load_preset, make_blobs, run_baseline, run_experiment

ds = make_blobs(3000, 3, 2, separation=10, sigma=1, seed=0)
config = load_preset("sym30").replace(noise_rate=0.0, alpha=0.01, lambda_start=30.0, lambda_end=30.0)

report = run_experiment(config, ds)
_, best, last, _ = run_baseline(config, report.train, report.test)

print(f"label learning: best {report.best_test_acc:.2f} last {report.last_test_acc:.2f}")
print(f"plain CE:       best {best:.2f} last {last:.2f}")
print("labels changed:", int(np.sum(report.hard_labels != report.train.noisy_labels)))

# %%
# The peak probability of the learned distributions stays close to one.

peak = report.store.distributions().max(axis=1)
print(f"peak probability min {peak.min():.4f} median {np.median(peak):.4f}")
