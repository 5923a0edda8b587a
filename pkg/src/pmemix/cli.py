"""Command line entry point: ``pmemix {generate,partition,train,sweep,report}``."""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import (
    SyntheticSpec,
    default_class_names,
    generate_synthetic,
    make_bernoulli_partial,
    make_single_class_partition,
    read_csv,
    write_csv,
)
from .errors import PmemixError
from .experiment import (
    DEFAULT_SWEEP_ALPHAS,
    STRATEGIES,
    ExperimentConfig,
    format_alpha_k,
    parse_alpha_k,
    render_table,
    report,
    run_suite,
    run_sweep,
)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _add_experiment_args(p):
    p.add_argument("--config", help="JSON file holding an ExperimentConfig")
    p.add_argument("--data", help="CSV dataset (otherwise synthetic data is generated)")
    p.add_argument("--simulator", choices=["single_class", "bernoulli", "none"])
    p.add_argument("--bernoulli-p", type=float)
    p.add_argument("--alpha", type=float,
                   help="Beta alpha for mixup, or the shared Uniform(alpha, 1) bound for mixup_pme")
    p.add_argument("--mixup-alpha", type=float, help="Beta alpha for plain mixup")
    p.add_argument("--alpha-k", help="per-class bounds as k=v,... (or @file)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--seed", type=int, help="first training seed")
    p.add_argument("--num-seeds", type=int)
    p.add_argument("--data-seed", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--holdout-validation", action="store_true",
                   help="select the best epoch on a held-out slice of the training split")
    p.add_argument("--out", default="runs", help="output directory")


def build_config(args, strategy=None):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.data:
        updates["data_csv"] = args.data
    for name in ("simulator", "bernoulli_p", "epochs", "batch_size", "lr", "threshold",
                 "data_seed", "n_train", "n_test"):
        value = getattr(args, name)
        if value is not None:
            updates[name] = value
    if args.no_normalize:
        updates["normalize"] = False
    if args.holdout_validation:
        updates["holdout_validation"] = True
    if strategy is not None:
        updates["strategy"] = strategy
    if args.mixup_alpha is not None:
        updates["alpha"] = args.mixup_alpha
    if args.alpha is not None:
        if (strategy or cfg.strategy) == "mixup":
            updates["alpha"] = args.alpha
        else:
            updates["pme_alpha"] = args.alpha
    if args.alpha_k:
        if cfg.data_csv or args.data:
            names = read_csv(args.data or cfg.data_csv).class_names
        else:
            names = default_class_names(cfg.synthetic.k)
        updates["alpha_k"] = parse_alpha_k(args.alpha_k, names)
    if args.seed is not None or args.num_seeds is not None:
        start = args.seed if args.seed is not None else 0
        count = args.num_seeds if args.num_seeds is not None else len(cfg.seeds)
        updates["seeds"] = list(range(start, start + count))
    return replace(cfg, **updates)


def _simulator_given(args):
    if args.simulator is not None:
        return True
    if args.config:
        return "simulator" in json.loads(Path(args.config).read_text(encoding="utf-8"))
    return False


def cmd_generate(args):
    spec = SyntheticSpec(n=args.n, d=args.d, k=args.k, noise=args.noise,
                         rates=tuple(_floats(args.rates)) if args.rates else (0.5,) * args.k)
    write_csv(generate_synthetic(spec, args.seed), args.out)
    print(f"wrote {args.out}")


def cmd_partition(args):
    ds = read_csv(args.input)
    if args.simulator == "single_class":
        labels = make_single_class_partition(ds, ds.n_classes, args.seed)
    else:
        labels = make_bernoulli_partial(ds, args.p, args.seed)
    write_csv(ds.with_labels(labels, f"{args.simulator} seed={args.seed}"), args.out)
    print(f"wrote {args.out}")


def cmd_train(args):
    if args.strategy == "all":
        strategies = STRATEGIES
    else:
        strategies = tuple(s.strip() for s in args.strategy.split(","))
    base = build_config(args, strategy=strategies[0] if len(strategies) == 1 else None)
    # a lone strategy honours an explicitly chosen simulator; suites give
    # the oracle its full labels regardless
    strict = len(strategies) == 1 and _simulator_given(args)
    doc = run_suite(base, strategies, derive_simulator=not strict)
    if len(strategies) == 1:
        doc = doc["runs"][strategies[0]]
    json_path, _ = report(doc, args.out)
    print(render_table(doc), end="")
    for name, why in doc.get("skipped", {}).items():
        print(f"skipped {name}: {why}")
    print(f"results: {json_path}")


def cmd_sweep(args):
    base = build_config(args, strategy="mixup_pme")
    alphas = _floats(args.alphas) if args.alphas else DEFAULT_SWEEP_ALPHAS
    doc = run_sweep(base, alphas)
    out = Path(args.out)
    report(doc, out, stem="sweep")
    alpha_k_path = out / "alpha_k.txt"
    alpha_k_path.write_text(format_alpha_k(doc["best_alpha_k"]) + "\n", encoding="utf-8")
    print(render_table(doc), end="")
    print(f"per-class alpha: {alpha_k_path} (pass as --alpha-k @{alpha_k_path})")


def cmd_report(args):
    with open(args.results, encoding="utf-8") as fh:
        doc = json.load(fh)
    table = render_table(doc)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")


def make_parser():
    parser = argparse.ArgumentParser(prog="pmemix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic fully labeled dataset as CSV")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--rates", help="comma-separated positive rates, one per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("partition", help="hide labels with a partial-supervision simulator")
    p.add_argument("--input", required=True)
    p.add_argument("--simulator", choices=["single_class", "bernoulli"], required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train", help="run one or more strategies")
    p.add_argument("--strategy", default="vanilla",
                   help=f"one of {', '.join(STRATEGIES)}, a comma list, or 'all'")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="MixUp-PME over a grid of alpha values")
    p.add_argument("--alphas", help="comma-separated grid (default 0.5,0.55,...,0.95)")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render the table for a results document")
    p.add_argument("--results", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        args.func(args)
    except (PmemixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
