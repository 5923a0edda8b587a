"""Datasets: synthetic generator, CSV io, normalization, splits and
partial-supervision simulators."""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GenerationError, InputError, ParseError, PartitionError
from .labels import LabelValue, PartialLabelMatrix, validate_partial_dataset
from .rng import Rng

MAX_PARTITION_ATTEMPTS = 8
NORM_EPS = 1e-8


@dataclass
class Dataset:
    features: np.ndarray
    labels: PartialLabelMatrix
    class_names: list = None
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise InputError("features must be an N x D matrix")
        if self.features.shape[0] != self.labels.n_rows:
            raise InputError(
                f"{self.features.shape[0]} feature rows but {self.labels.n_rows} label rows"
            )
        if self.class_names is None:
            self.class_names = default_class_names(self.labels.n_classes)
        self.class_names = list(self.class_names)
        if len(self.class_names) != self.labels.n_classes:
            raise InputError("class_names length must equal the number of classes")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return self.labels.n_classes

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.class_names, self.provenance)

    def with_labels(self, labels, note=None):
        prov = self.provenance if note is None else f"{self.provenance}; {note}".lstrip("; ")
        return Dataset(self.features, labels, self.class_names, prov)


def default_class_names(k):
    return [f"class{i}" for i in range(k)]


@dataclass(frozen=True)
class SyntheticSpec:
    """Latent-Gaussian multi-label data with one linear label plane per class."""

    n: int = 2000
    d: int = 16
    k: int = 4
    noise: float = 0.0
    rates: tuple = field(default=(0.3, 0.2, 0.15, 0.08))
    plane_seed: int = None

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.n < 1 or self.d < 1 or self.k < 1:
            raise InputError("n, d and k must be positive")
        if len(self.rates) != self.k:
            raise InputError(f"need {self.k} positive rates, got {len(self.rates)}")
        if any(not 0.0 < r < 1.0 for r in self.rates):
            raise InputError("positive rates must lie in (0, 1)")
        if self.n < 2 * self.k:
            raise InputError("need n >= 2k")
        if self.noise < 0:
            raise InputError("noise scale must be non-negative")

    def to_dict(self):
        return {
            "n": self.n, "d": self.d, "k": self.k, "noise": self.noise,
            "rates": list(self.rates), "plane_seed": self.plane_seed,
        }


def generate_synthetic(spec, seed):
    """Fully labeled dataset: class k is positive iff ``a_k . z`` exceeds the
    quantile threshold that yields the target positive rate."""
    rng = Rng(seed)
    plane_rng = Rng(spec.plane_seed) if spec.plane_seed is not None else rng.spawn("planes")
    planes = plane_rng.normal((spec.k, spec.d))
    z = rng.spawn("latent").normal((spec.n, spec.d))
    scores = z @ planes.T
    labels = np.zeros((spec.n, spec.k), dtype=np.int8)
    for k, rate in enumerate(spec.rates):
        if not np.any(planes[k]):
            raise GenerationError(f"label plane {k} is degenerate")
        m = int(round(rate * spec.n))
        if m < 1 or m > spec.n - 1:
            raise GenerationError(f"rate {rate} gives {m} positives out of {spec.n}")
        order = np.sort(scores[:, k])[::-1]
        if order[m - 1] == order[m]:
            raise GenerationError(f"tied scores at the class {k} threshold")
        tau = 0.5 * (order[m - 1] + order[m])
        labels[:, k] = scores[:, k] > tau
    features = z
    if spec.noise > 0:
        features = z + spec.noise * rng.spawn("noise").normal((spec.n, spec.d))
    return Dataset(
        features,
        PartialLabelMatrix(labels),
        default_class_names(spec.k),
        f"synthetic seed={seed} n={spec.n} d={spec.d} k={spec.k} noise={spec.noise}",
    )


def instance_normalize(features):
    """Standardize each row with its own mean and population std."""
    x = np.asarray(features, dtype=np.float64)
    mu = x.mean(axis=1, keepdims=True)
    sigma = np.maximum(x.std(axis=1, keepdims=True), NORM_EPS)
    return (x - mu) / sigma


def split_train_test(dataset, n_train, n_test):
    """Contiguous split: first ``n_train`` rows, then the next ``n_test``."""
    if n_train < 0 or n_test < 0:
        raise InputError("split sizes must be non-negative")
    if n_train + n_test > len(dataset):
        raise InputError(f"need {n_train + n_test} rows, dataset has {len(dataset)}")
    train = dataset.subset(np.arange(n_train))
    test = dataset.subset(np.arange(n_train, n_train + n_test))
    return train, test


def _as_labels(train):
    return train.labels if isinstance(train, Dataset) else train


def _retry(build, seed, what):
    for attempt in range(MAX_PARTITION_ATTEMPTS):
        labels = build(Rng(seed + attempt))
        if validate_partial_dataset(labels).ok:
            return labels
    raise PartitionError(
        f"{what}: no valid partition in {MAX_PARTITION_ATTEMPTS} attempts from seed {seed}"
    )


def make_single_class_partition(train, k, seed):
    """Split rows into ``k`` near-equal random subsets; subset j keeps only class j."""
    labels = _as_labels(train)
    if k != labels.n_classes:
        raise InputError(f"partition into {k} subsets needs {k} classes, got {labels.n_classes}")

    def build(rng):
        keep = np.zeros(labels.shape, dtype=bool)
        order = rng.permutation(labels.n_rows)
        for j, chunk in enumerate(np.array_split(order, k)):
            keep[chunk, j] = True
        return labels.with_missing(keep)

    return _retry(build, seed, "single-class partition")


def single_class_subsets(labels):
    """Subset index of each row of a single-class partition (-1 if not exactly one label)."""
    v = labels.values
    known = v >= 0
    out = np.full(labels.n_rows, -1, dtype=np.int64)
    one = known.sum(axis=1) == 1
    out[one] = np.argmax(known[one], axis=1)
    return out


def make_bernoulli_partial(train, p=0.5, seed=0):
    """Keep each entry independently with probability ``p``."""
    labels = _as_labels(train)
    if not 0.0 < p <= 1.0:
        raise InputError(f"keep probability must lie in (0, 1], got {p}")

    def build(rng):
        return labels.with_missing(rng.random(labels.shape) < p)

    return _retry(build, seed, "bernoulli partition")


def write_csv(dataset, path):
    header = [f"f{i}" for i in range(dataset.n_features)]
    header += [f"label:{name}" for name in dataset.class_names]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for x, y in zip(dataset.features, dataset.labels.values):
            row = [format(float(v), ".17g") for v in x]
            row += [LabelValue(int(v)).token for v in y]
            writer.writerow(row)


def read_csv(path, n_classes=None):
    """Parse the ``f0..,label:<name>..`` format.  ``n_classes`` checks the header."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        n_feat = 0
        while n_feat < len(header) and header[n_feat] == f"f{n_feat}":
            n_feat += 1
        names = []
        for col in header[n_feat:]:
            if not col.startswith("label:") or not col[len("label:"):]:
                raise ParseError(f"unexpected header column {col!r}", line=1)
            names.append(col[len("label:"):])
        if not names:
            raise ParseError("header declares no label columns", line=1)
        if n_classes is not None and len(names) != n_classes:
            raise ParseError(f"header declares {len(names)} classes, expected {n_classes}", line=1)
        feats, labs = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line_no)
            try:
                feats.append([float(v) for v in row[:n_feat]])
            except ValueError as exc:
                raise ParseError(f"bad feature value: {exc}", line=line_no) from None
            try:
                labs.append([int(LabelValue.from_token(t)) for t in row[n_feat:]])
            except InputError as exc:
                raise ParseError(str(exc), line=line_no) from None
    features = np.array(feats, dtype=np.float64).reshape(len(feats), n_feat)
    labels = PartialLabelMatrix(np.array(labs, dtype=np.int8).reshape(len(labs), len(names)))
    return Dataset(features, labels, names, f"csv {path}")


def normalized(dataset):
    return replace(dataset, features=instance_normalize(dataset.features))
