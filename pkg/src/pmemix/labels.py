"""Ternary label matrices, PME filling, loss masks and class weights."""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import InputError, LabelValidationError

PME_FILL = 0.5
_FILL_TABLE = np.array([0.0, 1.0, PME_FILL])
_MASK_TABLE = np.array([1.0, 1.0, 0.0])


class LabelValue(IntEnum):
    NEGATIVE = 0
    POSITIVE = 1
    MISSING = -1

    @property
    def token(self):
        return "?" if self is LabelValue.MISSING else str(int(self))

    @classmethod
    def from_token(cls, token):
        try:
            return _TOKENS[token]
        except KeyError:
            raise InputError(f"unknown label token {token!r}") from None


_TOKENS = {"0": LabelValue.NEGATIVE, "1": LabelValue.POSITIVE, "?": LabelValue.MISSING}


class PartialLabelMatrix:
    """N x K grid of labels, stored as int8 with -1 for a missing entry."""

    def __init__(self, values):
        raw = np.asarray(values)
        if raw.ndim == 1:
            raw = raw[None, :]
        if raw.ndim != 2:
            raise InputError("label matrix must be two-dimensional")
        if raw.shape[1] < 1:
            raise InputError("label matrix needs at least one class")
        if raw.dtype == np.int8:
            arr = raw.copy()
            exact = True
        else:
            arr = raw.astype(np.int8)
            exact = np.array_equal(arr, raw)
        if not exact or (arr.size and (arr.min() < -1 or arr.max() > 1)):
            raise InputError("label entries must be 1, 0 or missing (-1)")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def from_tokens(cls, rows):
        """Build from nested sequences of ``"1"``, ``"0"``, ``"?"`` (or ints / None)."""
        out = []
        for row in rows:
            conv = []
            for v in row:
                if v is None or v == "?":
                    conv.append(-1)
                elif isinstance(v, str):
                    conv.append(int(LabelValue.from_token(v)))
                else:
                    conv.append(int(v))
            out.append(conv)
        return cls(out)

    @classmethod
    def from_dense(cls, dense, mask):
        """Inverse of ``(pme_fill, mask_of)``."""
        dense = np.asarray(dense, dtype=np.float64)
        mask = np.asarray(mask).astype(bool)
        labels = np.where(mask, np.rint(dense), -1).astype(np.int8)
        return cls(labels)

    @classmethod
    def empty(cls, k):
        obj = cls.__new__(cls)
        arr = np.zeros((0, k), dtype=np.int8)
        arr.setflags(write=False)
        obj._values = arr
        return obj

    @property
    def values(self):
        return self._values

    @property
    def shape(self):
        return self._values.shape

    @property
    def n_rows(self):
        return self._values.shape[0]

    @property
    def n_classes(self):
        return self._values.shape[1]

    def __len__(self):
        return self.n_rows

    def __getitem__(self, rows):
        if isinstance(rows, (int, np.integer)):
            rows = [rows]
        sub = self._values[rows]
        if sub.shape[0] == 0:
            return PartialLabelMatrix.empty(self.n_classes)
        return PartialLabelMatrix(sub)

    def __eq__(self, other):
        if not isinstance(other, PartialLabelMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.all(self._values == other._values))

    def __repr__(self):
        return f"PartialLabelMatrix(shape={self.shape}, missing={int((self._values < 0).sum())})"

    def tokens(self):
        return [[LabelValue(int(v)).token for v in row] for row in self._values]

    def is_fully_labeled(self):
        return not bool(np.any(self._values < 0))

    def with_missing(self, keep):
        """Copy with every entry where ``keep`` is False replaced by Missing."""
        keep = np.asarray(keep, dtype=bool)
        return PartialLabelMatrix(np.where(keep, self._values, -1))


def pme_fill(labels):
    """Dense targets: positive 1.0, negative 0.0, missing 0.5."""
    # index -1 picks the last slot, so one lookup covers all three values
    return _FILL_TABLE[labels.values]


def mask_of(labels):
    return _MASK_TABLE[labels.values]


@dataclass(frozen=True)
class ClassWeights:
    pos_weight: np.ndarray
    neg_weight: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray

    @property
    def n_classes(self):
        return len(self.pos_weight)

    @classmethod
    def uniform(cls, k):
        half = np.full(k, 0.5)
        return cls(half, half.copy(), np.zeros(k, dtype=np.int64), np.zeros(k, dtype=np.int64))

    def to_dict(self):
        return {
            "pos_weight": [float(x) for x in self.pos_weight],
            "neg_weight": [float(x) for x in self.neg_weight],
            "n_pos": [int(x) for x in self.n_pos],
            "n_neg": [int(x) for x in self.n_neg],
        }


def compute_class_weights(labels, class_names=None):
    """Per-class (w+, w-) = (n-, n+) / (n+ + n-) over labeled entries."""
    v = labels.values
    n_pos = (v == 1).sum(axis=0).astype(np.int64)
    n_neg = (v == 0).sum(axis=0).astype(np.int64)
    for k in range(labels.n_classes):
        name = class_names[k] if class_names is not None else f"class {k}"
        if n_pos[k] == 0:
            raise LabelValidationError(f"{name} has no labeled positives")
        if n_neg[k] == 0:
            raise LabelValidationError(f"{name} has no labeled negatives")
    total = (n_pos + n_neg).astype(np.float64)
    return ClassWeights(n_neg / total, n_pos / total, n_pos, n_neg)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    class_index: int = None
    row_index: int = None
    severity: str = "error"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def errors(self):
        return [v for v in self.violations if v.severity == "error"]

    @property
    def warnings(self):
        return [v for v in self.violations if v.severity == "warning"]

    @property
    def ok(self):
        return not self.errors

    def __str__(self):
        if not self.violations:
            return "valid"
        return "\n".join(f"[{v.severity}] {v.kind}: {v.message}" for v in self.violations)


def validate_partial_dataset(labels, strict_partial=False, class_names=None):
    """Check the partial-supervision premises.

    Every class needs at least one labeled positive and one labeled negative.
    With ``strict_partial`` each row must also have at least one missing
    entry.  Rows with no labels at all are always reported, as warnings.
    """
    report = ValidationReport()
    v = labels.values
    for k in range(labels.n_classes):
        name = class_names[k] if class_names is not None else f"class {k}"
        col = v[:, k]
        if not np.any(col == 1):
            report.violations.append(
                Violation("no labeled positives", f"{name} has no labeled positives", class_index=k)
            )
        if not np.any(col == 0):
            report.violations.append(
                Violation("no labeled negatives", f"{name} has no labeled negatives", class_index=k)
            )
    missing_per_row = (v < 0).sum(axis=1)
    for i in np.flatnonzero(missing_per_row == labels.n_classes):
        report.violations.append(
            Violation("unlabeled sample", f"row {i} has no labels", row_index=int(i), severity="warning")
        )
    if strict_partial:
        for i in np.flatnonzero(missing_per_row == 0):
            report.violations.append(
                Violation("fully labeled sample", f"row {i} has no missing entry", row_index=int(i))
            )
    return report


@dataclass(frozen=True)
class LabelStatistics:
    labeled: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    missing: np.ndarray

    def to_dict(self):
        return {k: [int(x) for x in getattr(self, k)] for k in ("labeled", "positive", "negative", "missing")}


def label_statistics(labels):
    v = labels.values
    pos = (v == 1).sum(axis=0)
    neg = (v == 0).sum(axis=0)
    miss = (v < 0).sum(axis=0)
    return LabelStatistics(pos + neg, pos, neg, miss)
