"""MixUp with maximum-entropy label filling for partially labeled
multi-label classification, with a small numpy training stack."""

from .augment import MixConfig, VicinalBatch, mixup_pair, mixup_pme_batch
from .data import Dataset, SyntheticSpec, generate_synthetic, read_csv, write_csv
from .experiment import ExperimentConfig, RunResult, run_experiment, run_suite, run_sweep
from .labels import (
    ClassWeights,
    LabelValue,
    PartialLabelMatrix,
    compute_class_weights,
    mask_of,
    pme_fill,
)
from .metrics import MetricsReport, confusion, f1_from_counts, mean_f1
from .nn import AdamState, Network, masked_weighted_bce, sigmoid
from .rng import Rng

__version__ = "0.1.0"
