"""End-to-end experiment protocol: data, partial labels, training, evaluation."""

import json
import math
import warnings
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .augment import MixConfig, mixup_pme_batch, pair_sampler_locally_full, pair_sampler_shuffle
from .data import (
    SyntheticSpec,
    generate_synthetic,
    make_bernoulli_partial,
    make_single_class_partition,
    normalized,
    read_csv,
    single_class_subsets,
    split_train_test,
)
from .errors import ConfigurationError
from .labels import (
    ClassWeights,
    PartialLabelMatrix,
    compute_class_weights,
    label_statistics,
    mask_of,
    pme_fill,
)
from .metrics import MetricsReport, evaluate
from .nn import AdamState, Network, backward_and_step, masked_weighted_bce
from .rng import Rng, sample_beta

RESULTS_VERSION = 1
STRATEGIES = ("vanilla", "mixup", "mixup_pme", "amp", "oracle")
SIMULATORS = ("single_class", "bernoulli", "none")
DEFAULT_SWEEP_ALPHAS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def derive_seed(root, name):
    """Stable 63-bit seed for a named sub-stream of ``root``."""
    seq = np.random.SeedSequence(int(root), spawn_key=(zlib.crc32(name.encode()),))
    hi, lo = seq.generate_state(2, dtype=np.uint32)
    return (int(hi) << 31) ^ int(lo)


@dataclass
class ExperimentConfig:
    strategy: str = "vanilla"
    simulator: str = "single_class"
    bernoulli_p: float = 0.5
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    data_csv: str = None
    n_train: int = 1000
    n_test: int = 1000
    normalize: bool = True
    data_seed: int = 0
    alpha: float = 1.0
    pme_alpha: float = 0.75
    alpha_k: list = None
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    threshold: float = 0.5
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    hidden: list = field(default_factory=lambda: [64, 32])
    reduction: str = "mean"
    holdout_validation: bool = False
    holdout_fraction: float = 0.2
    independent_companion: bool = False

    def validate(self, n_classes=None):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.simulator not in SIMULATORS:
            raise ConfigurationError(f"unknown simulator {self.simulator!r}")
        if self.strategy == "oracle" and self.simulator != "none":
            raise ConfigurationError("oracle trains on full labels: simulator must be 'none'")
        if self.strategy == "mixup" and self.simulator != "single_class":
            raise ConfigurationError("mixup needs locally full supervision: simulator must be 'single_class'")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.reduction not in ("mean", "masked_mean"):
            raise ConfigurationError(f"unknown reduction {self.reduction!r}")
        if self.holdout_validation and not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigurationError("holdout_fraction must lie in (0, 1)")
        if n_classes is None and self.data_csv is None:
            n_classes = self.synthetic.k
        if self.strategy == "amp":
            if not self.alpha_k:
                raise ConfigurationError("amp needs a per-class alpha_k list")
            if n_classes is not None and len(self.alpha_k) != n_classes:
                raise ConfigurationError(f"amp needs {n_classes} alpha_k values, got {len(self.alpha_k)}")
        if self.strategy in ("mixup", "mixup_pme", "amp"):
            self.mix_config()

    def mix_config(self):
        if self.strategy == "mixup":
            return MixConfig("mixup", alpha=self.alpha)
        if self.strategy == "mixup_pme":
            return MixConfig("mixup_pme", alpha_k=(self.pme_alpha,))
        if self.strategy == "amp":
            return MixConfig("amp", alpha_k=tuple(self.alpha_k))
        return None

    def to_dict(self):
        doc = asdict(self)
        doc["synthetic"] = self.synthetic.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if isinstance(doc.get("synthetic"), dict):
            doc["synthetic"] = SyntheticSpec(**doc["synthetic"])
        return cls(**doc)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class PreparedData:
    train: object
    labels: PartialLabelMatrix
    test: object
    validation: object = None


def prepare_data(config):
    """Build, normalize, split and partially mask the data for a config.

    Depends only on ``config.data_seed`` and the data/simulator settings, so
    every training seed sees the same dataset and partition.
    """
    if config.data_csv is not None:
        full = read_csv(config.data_csv)
    else:
        spec = config.synthetic
        if spec.n < config.n_train + config.n_test:
            spec = replace(spec, n=config.n_train + config.n_test)
        full = generate_synthetic(spec, derive_seed(config.data_seed, "data"))
    if config.normalize:
        full = normalized(full)
    train, test = split_train_test(full, config.n_train, config.n_test)
    validation = None
    if config.holdout_validation:
        n_val = max(1, int(round(config.holdout_fraction * len(train))))
        train, validation = split_train_test(train, len(train) - n_val, n_val)
    part_seed = derive_seed(config.data_seed, "partition")
    if config.simulator == "single_class":
        labels = make_single_class_partition(train, train.n_classes, part_seed)
    elif config.simulator == "bernoulli":
        labels = make_bernoulli_partial(train, config.bernoulli_p, part_seed)
    else:
        labels = train.labels
    return PreparedData(train, labels, test, validation)


def _batches(order, batch_size):
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]


def _grouped_batches(order, subsets, batch_size, rng):
    # AMP on single-class data: keep each batch within one base class so a
    # single lambda honours that class's bound.
    batches = []
    for k in range(int(subsets.max()) + 1):
        batches.extend(_batches(order[subsets[order] == k], batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def _step(net, opt, x, targets, mask, weights, reduction):
    logits = net.forward(x)
    loss, grad = masked_weighted_bce(
        logits, targets, mask, weights.pos_weight, weights.neg_weight, reduction
    )
    backward_and_step(net, opt, grad)
    return loss


def train_epoch(net, opt, features, labels, strategy, mix, weights, rng,
                batch_size=64, reduction="mean", lam=None, independent_companion=False):
    """One pass over the training rows; returns the mean batch loss.

    ``lam`` pins the mixing coefficient for the PME strategies (used by the
    equivalence checks); normally it is drawn per batch.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    losses = []

    if strategy in ("vanilla", "oracle"):
        targets = pme_fill(labels)
        mask = mask_of(labels) if strategy == "vanilla" else np.ones(labels.shape)
        if strategy == "oracle" and not labels.is_fully_labeled():
            raise ConfigurationError("oracle strategy needs fully labeled training data")
        for b in _batches(rng.permutation(n), batch_size):
            losses.append(_step(net, opt, features[b], targets[b], mask[b], weights, reduction))

    elif strategy in ("mixup_pme", "amp"):
        order = rng.permutation(n)
        subsets = single_class_subsets(labels)
        if strategy == "amp" and len(mix.alpha_k) > 1 and np.all(subsets >= 0):
            batches = _grouped_batches(order, subsets, batch_size, rng)
        else:
            batches = _batches(order, batch_size)
        for b in batches:
            companion = b[pair_sampler_shuffle(len(b), rng, independent_companion)]
            vb = mixup_pme_batch(
                features[b], labels[b], features[companion], labels[companion], mix, rng, lam=lam
            )
            losses.append(_step(net, opt, vb.inputs, vb.targets, vb.mask, weights, reduction))

    elif strategy == "mixup":
        dense = pme_fill(labels)
        k_total = labels.n_classes
        for k in range(k_total):
            pairs = pair_sampler_locally_full(labels, k, rng)
            if len(pairs) == 0:
                warnings.warn(f"class {k}: fewer than two labeled samples, skipped this epoch")
                continue
            for chunk in _batches(pairs, batch_size):
                a, b = chunk[:, 0], chunk[:, 1]
                lam_b = sample_beta(rng, mix.alpha) if lam is None else lam
                x = lam_b * features[a] + (1.0 - lam_b) * features[b]
                targets = np.full((len(chunk), k_total), 0.5)
                targets[:, k] = lam_b * dense[a, k] + (1.0 - lam_b) * dense[b, k]
                mask = np.zeros((len(chunk), k_total))
                mask[:, k] = 1.0
                losses.append(_step(net, opt, x, targets, mask, weights, reduction))
    else:
        raise ConfigurationError(f"unknown strategy {strategy!r}")

    return float(np.mean(losses)) if losses else 0.0


@dataclass
class SeedResult:
    seed: int
    epochs: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    best_epoch: int = None
    best_mean_f1: float = None
    best_selection_f1: float = None

    def append_epoch(self, report, loss, validation=None):
        self.epochs.append(report)
        self.losses.append(loss)
        if validation is not None:
            self.validation.append(validation)
        score = (validation or report).mean_f1
        if self.best_selection_f1 is None or score > self.best_selection_f1:
            self.best_selection_f1 = score
            self.best_epoch = len(self.epochs)
            self.best_mean_f1 = report.mean_f1

    @property
    def best_per_class_f1(self):
        return list(self.epochs[self.best_epoch - 1].f1)

    def to_dict(self):
        doc = {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "best_mean_f1": self.best_mean_f1,
            "best_per_class_f1": self.best_per_class_f1,
            "losses": list(self.losses),
            "epochs": [r.to_dict() for r in self.epochs],
        }
        if self.validation:
            doc["validation"] = [r.to_dict() for r in self.validation]
        return doc


@dataclass
class RunResult:
    config: ExperimentConfig
    class_names: list
    seeds: list
    class_weights: dict
    train_label_stats: dict

    @property
    def mean_best_f1(self):
        return float(np.mean([s.best_mean_f1 for s in self.seeds]))

    @property
    def mean_per_class_f1(self):
        return [float(x) for x in np.mean([s.best_per_class_f1 for s in self.seeds], axis=0)]

    def to_dict(self):
        return {
            "format_version": RESULTS_VERSION,
            "kind": "run",
            "strategy": self.config.strategy,
            "config": self.config.to_dict(),
            "class_names": list(self.class_names),
            "class_weights": self.class_weights,
            "train_label_stats": self.train_label_stats,
            "seeds": [s.to_dict() for s in self.seeds],
            "aggregate": {
                "mean_best_mean_f1": self.mean_best_f1,
                "mean_per_class_f1": self.mean_per_class_f1,
            },
        }


def train_seed(config, data, weights, seed, mix=None):
    root = Rng(seed)
    dims = [data.train.n_features] + list(config.hidden) + [data.train.n_classes]
    net = Network.init(dims, root.spawn("init"))
    opt = AdamState.for_network(net, lr=config.lr)
    train_rng = root.spawn("train")
    result = SeedResult(seed)
    for epoch in range(1, config.epochs + 1):
        loss = train_epoch(
            net, opt, data.train.features, data.labels, config.strategy, mix, weights,
            train_rng, config.batch_size, config.reduction,
            independent_companion=config.independent_companion,
        )
        report = evaluate(net.predict_proba(data.test.features), data.test.labels,
                          config.threshold, epoch=epoch, seed=seed)
        val = None
        if data.validation is not None:
            val = evaluate(net.predict_proba(data.validation.features), data.validation.labels,
                           config.threshold, epoch=epoch, seed=seed)
        result.append_epoch(report, loss, val)
    return result


def run_experiment(config, data=None):
    config.validate()
    if data is None:
        data = prepare_data(config)
    config.validate(n_classes=data.train.n_classes)
    weights = compute_class_weights(data.labels, data.train.class_names)
    mix = config.mix_config()
    seeds = [train_seed(config, data, weights, int(s), mix) for s in config.seeds]
    return RunResult(
        config=config,
        class_names=data.train.class_names,
        seeds=seeds,
        class_weights=weights.to_dict(),
        train_label_stats=label_statistics(data.labels).to_dict(),
    )


def config_for_strategy(base, strategy, derive_simulator=True):
    """Derive one strategy's config from a shared base config."""
    if strategy == "oracle" and derive_simulator:
        return replace(base, strategy="oracle", simulator="none")
    return replace(base, strategy=strategy)


def run_suite(base, strategies=STRATEGIES, derive_simulator=True):
    """Run several strategies on the same data; returns a results document.

    With ``derive_simulator`` the oracle run switches to full labels;
    otherwise the base simulator is kept and a contradiction is an error.
    """
    runs = {}
    skipped = {}
    for strategy in strategies:
        cfg = config_for_strategy(base, strategy, derive_simulator)
        try:
            cfg.validate()
        except ConfigurationError as exc:
            if len(strategies) == 1:
                raise
            skipped[strategy] = str(exc)
            continue
        runs[strategy] = run_experiment(cfg).to_dict()
    return {
        "format_version": RESULTS_VERSION,
        "kind": "suite",
        "runs": runs,
        "skipped": skipped,
    }


def run_sweep(base, alphas=DEFAULT_SWEEP_ALPHAS):
    """MixUp-PME over a grid of shared alpha values; picks the per-class argmax."""
    data = prepare_data(replace(base, strategy="mixup_pme"))
    rows = []
    class_names = None
    for a in alphas:
        res = run_experiment(replace(base, strategy="mixup_pme", pme_alpha=float(a)), data)
        class_names = res.class_names
        rows.append({
            "alpha": float(a),
            "per_class_f1": res.mean_per_class_f1,
            "mean_f1": res.mean_best_f1,
        })
    best = []
    for k in range(len(class_names)):
        scores = [r["per_class_f1"][k] for r in rows]
        best.append(rows[int(np.argmax(scores))]["alpha"])
    return {
        "format_version": RESULTS_VERSION,
        "kind": "sweep",
        "config": replace(base, strategy="mixup_pme").to_dict(),
        "class_names": class_names,
        "rows": rows,
        "best_alpha_k": best,
    }


def format_alpha_k(values):
    return ",".join(f"{k}={v:g}" for k, v in enumerate(values))


def parse_alpha_k(text, class_names=None):
    """Parse ``k=v,...`` where k is a class index or name; every class must appear."""
    text = text.strip()
    if text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8").strip()
    pairs = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ConfigurationError(f"alpha-k entry {item!r} is not k=v")
        key, val = (s.strip() for s in item.split("=", 1))
        if key.isdigit():
            idx = int(key)
        elif class_names is not None and key in class_names:
            idx = class_names.index(key)
        else:
            raise ConfigurationError(f"unknown class {key!r} in alpha-k")
        pairs[idx] = float(val)
    n = len(class_names) if class_names is not None else (max(pairs) + 1 if pairs else 0)
    missing = [k for k in range(n) if k not in pairs]
    if missing or not pairs or max(pairs) >= n:
        raise ConfigurationError(f"alpha-k must give one value per class 0..{n - 1}")
    return [pairs[k] for k in range(n)]


def _fmt(x):
    return f"{x:.4f}"


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    line = lambda r: "| " + " | ".join(str(c).ljust(w) for c, w in zip(r, widths)) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def render_table(doc):
    """Human-readable F1 table for a run, suite or sweep document."""
    kind = doc.get("kind")
    if kind == "sweep":
        names = doc["class_names"]
        rows = [[_fmt(r["alpha"])] + [_fmt(v) for v in r["per_class_f1"]] + [_fmt(r["mean_f1"])]
                for r in doc["rows"]]
        rows.append(["argmax"] + [f"{a:g}" for a in doc["best_alpha_k"]] + [""])
        return _table(["alpha"] + names + ["Average"], rows)
    if kind == "run":
        runs = {doc["strategy"]: doc}
    elif kind == "suite":
        runs = doc["runs"]
    else:
        raise ValueError(f"unrecognised results document kind {kind!r}")
    if not runs:
        return "(no runs)\n"
    names = next(iter(runs.values()))["class_names"]
    rows = []
    for strategy, run in runs.items():
        agg = run["aggregate"]
        rows.append([strategy] + [_fmt(v) for v in agg["mean_per_class_f1"]] + [_fmt(agg["mean_best_mean_f1"])])
    return _table(["Model"] + names + ["Average"], rows)


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def report(results, path, stem="results"):
    """Write ``<stem>.json`` and ``<stem>.txt`` into directory ``path``."""
    doc = results.to_dict() if isinstance(results, RunResult) else results
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{stem}.json"
    txt_path = out / f"{stem}.txt"
    json_path.write_text(dumps(doc), encoding="utf-8")
    txt_path.write_text(render_table(doc), encoding="utf-8")
    return json_path, txt_path
