"""Learning with noisy labels through learnable label distributions."""

from .backbone import MlpParams, SgdState, backward, forward, load_params, mlp_init, predict, save_params, sgd_step
from .config import ConfigError, load_preset, parse_config
from .core import argmax_tiebreak, log_clamped, seeded_rng, softmax
from .data import (
    CIFAR10_PAIRS,
    Dataset,
    NoiseSpec,
    corrupted_fraction,
    inject_asymmetric,
    inject_noise,
    inject_symmetric,
    load_dataset,
    make_blobs,
    save_dataset,
    split,
)
from .labels import LabelStore, init_from_labels
from .losses import (
    LossBundle,
    compatibility,
    cross_entropy,
    entropy,
    kl_label_to_pred,
    kl_pred_to_label,
    pencil_total,
)
from .metrics import EpochRecord, accuracy, corrected_count, read_metrics_csv, write_metrics_csv
from .trainer import (
    ExperimentConfig,
    TrainReport,
    phase1_backbone,
    phase2_pencil,
    phase3_finetune,
    run_baseline,
    run_experiment,
)

__version__ = "0.1.0"
