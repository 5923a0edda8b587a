"""Vicinal batch construction: MixUp and MixUp with PME-filled labels."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .labels import PartialLabelMatrix, mask_of, pme_fill
from .rng import sample_beta, sample_uniform

STRATEGIES = ("mixup", "mixup_pme", "amp")


@dataclass(frozen=True)
class MixConfig:
    """Mixing hyperparameters.

    ``alpha`` is the Beta(alpha, alpha) parameter for plain MixUp.
    ``alpha_k`` holds the Uniform(alpha_k, 1) lower bounds: one shared value
    for ``mixup_pme``, one per class for ``amp``.
    """

    strategy: str = "mixup_pme"
    alpha: float = 1.0
    alpha_k: tuple = (0.75,)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown mix strategy {self.strategy!r}")
        object.__setattr__(self, "alpha_k", tuple(float(a) for a in self.alpha_k))
        if self.strategy == "mixup":
            if not self.alpha > 0:
                raise ConfigurationError(f"MixUp alpha must be positive, got {self.alpha}")
            return
        if not self.alpha_k:
            raise ConfigurationError("alpha_k must not be empty")
        if self.strategy == "mixup_pme" and len(set(self.alpha_k)) != 1:
            raise ConfigurationError("mixup_pme uses one shared alpha; use amp for per-class values")
        for a in self.alpha_k:
            if not 0.5 <= a < 1.0:
                raise ConfigurationError(f"alpha_k values must satisfy 0.5 <= a < 1, got {a}")

    def lower_bound(self, labeled_classes):
        """Smallest admissible lambda for a batch whose base rows label ``labeled_classes``.

        The max over the labeled classes' bounds satisfies every class at once.
        """
        if len(self.alpha_k) == 1:
            return self.alpha_k[0]
        classes = list(labeled_classes)
        if not classes:
            return max(self.alpha_k)
        return max(self.alpha_k[k] for k in classes)


@dataclass
class VicinalBatch:
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    lambda_used: float


def mixup_pair(x_i, y_i, x_j, y_j, alpha=1.0, rng=None, lam=None):
    """Classic MixUp of two samples on a fully supervised class set.

    ``y_i``/``y_j`` hold the labels of the trained classes only and must be
    0 or 1 (a missing entry, -1 or NaN, is rejected).  Returns
    ``(x_mix, y_mix, lam)``.
    """
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    for y in (y_i, y_j):
        if np.any((y != 0.0) & (y != 1.0)):
            raise InputError("mixup_pair needs labeled (0/1) entries on every trained class")
    if lam is None:
        if rng is None:
            raise InputError("either rng or lam is required")
        lam = sample_beta(rng, alpha)
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    return lam * x_i + (1.0 - lam) * x_j, lam * y_i + (1.0 - lam) * y_j, lam


def mixup_pme_batch(x1, labels1, x2, labels2, config, rng=None, lam=None):
    """Mix a base batch with a companion batch using PME-filled labels.

    One lambda is drawn per batch from Uniform(bound, 1), where ``bound``
    comes from ``config.lower_bound`` over the classes labeled in the base
    rows.  The mask is taken from the base rows only.
    """
    if config.strategy not in ("mixup_pme", "amp"):
        raise ConfigurationError(f"mixup_pme_batch needs a PME strategy, got {config.strategy!r}")
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise InputError(f"batch shapes differ: {x1.shape} vs {x2.shape}")
    if not isinstance(labels1, PartialLabelMatrix):
        labels1 = PartialLabelMatrix.from_tokens(labels1)
    if not isinstance(labels2, PartialLabelMatrix):
        labels2 = PartialLabelMatrix.from_tokens(labels2)
    if labels1.shape != labels2.shape or labels1.n_rows != x1.shape[0]:
        raise InputError("label and feature batches must have matching rows")
    if config.strategy == "amp" and len(config.alpha_k) not in (1, labels1.n_classes):
        raise ConfigurationError(
            f"amp needs {labels1.n_classes} alpha_k values, got {len(config.alpha_k)}"
        )
    if lam is None:
        if rng is None:
            raise InputError("either rng or lam is required")
        labeled = ()
        if len(config.alpha_k) > 1:
            labeled = np.flatnonzero((labels1.values >= 0).any(axis=0))
        lam = sample_uniform(rng, config.lower_bound(labeled), 1.0)
    y1 = pme_fill(labels1)
    y2 = pme_fill(labels2)
    return VicinalBatch(
        inputs=lam * x1 + (1.0 - lam) * x2,
        targets=lam * y1 + (1.0 - lam) * y2,
        mask=mask_of(labels1),
        lambda_used=lam,
    )


def pair_sampler_locally_full(labels, k, rng):
    """Index pairs for one epoch of MixUp on class ``k``.

    Every sample labeled for ``k`` appears exactly once as the first index;
    companions are an independent permutation of the same set.  Returns an
    ``(M, 2)`` integer array, empty when fewer than two samples are labeled.
    """
    idx = np.flatnonzero(labels.values[:, k] >= 0)
    if len(idx) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    first = idx[rng.permutation(len(idx))]
    second = idx[rng.permutation(len(idx))]
    return np.stack([first, second], axis=1)


def pair_sampler_shuffle(n, rng, independent=False):
    """Companion indices for a batch of ``n`` rows.

    A uniform permutation by default (self-pairing allowed); with
    ``independent`` each companion is drawn with replacement.
    """
    if n <= 1:
        return np.zeros(n, dtype=np.int64)
    if independent:
        return rng.integers(0, n, size=n)
    return rng.permutation(n)
