"""Command-line interface.

Subcommands: gen-mlr, gen-deep, gen-xor, validate-mlr, xor,
sweep-structure, sweep-reg, model-select, dof, cv. Every command is
deterministic given its flags: re-running writes byte-identical
report/dataset CSVs (timing lives only in manifest.json).

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import datagen, harness
from .datagen import (
    dataset_manifest,
    gen_deepnet,
    gen_mlr,
    gen_xor,
    read_dataset_csv,
    write_dataset_csv,
    write_manifest,
)
from .dof import CrnContext
from .estimators import DeepNetClassifier, IdentityEstimator, MeanEstimator, MultinomialLogit
from .exceptions import DataFormatError, EstimationError, TrainingError
from .harness import SweepSpec, cross_validate, run_sweep
from .rng import subseed


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _int_list(text):
    return [int(v) for v in text.split(",") if v != ""]


def _float_list(text):
    return [float(v) for v in text.split(",") if v != ""]


def _add_shared(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--replicates", type=int, default=1, help="Monte-Carlo replicates T")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _add_model_flags(p):
    p.add_argument("--width", type=int, default=30)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--lr", type=float, default=harness.DESK_TRAIN["learning_rate"])
    p.add_argument("--epochs", type=int, default=harness.DESK_TRAIN["epochs"])
    p.add_argument("--batch-size", type=int, default=harness.DESK_TRAIN["batch_size"])
    p.add_argument("--dropout", type=float, default=harness.DESK_TRAIN["dropout"])
    p.add_argument("--corruption", type=float, default=harness.DESK_TRAIN["corruption"])
    p.add_argument("--weight-decay", type=float, default=harness.DESK_TRAIN["weight_decay"])
    p.add_argument("--pretrain-epochs", type=int, default=harness.DESK_TRAIN["pretrain_epochs"])
    p.add_argument("--pretrain-lr", type=float,
                   default=harness.DESK_TRAIN["pretrain_learning_rate"])


def _train_params(args):
    return dict(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                weight_decay=args.weight_decay, dropout=args.dropout,
                corruption=args.corruption, pretrain_epochs=args.pretrain_epochs,
                pretrain_learning_rate=args.pretrain_lr)


def _ctx(args):
    return CrnContext(model_seed=subseed(args.seed, "model"),
                      perturbation_seed=subseed(args.seed, "perturb"),
                      epsilon=args.eps, T=args.replicates, workers=args.workers)


def _out_dir(args):
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _flags_manifest(args):
    skip = {"func", "out"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items() if k not in skip}


def _load_dataset(args):
    if getattr(args, "data", None):
        return read_dataset_csv(args.data, k=getattr(args, "k", None))
    return harness.desk_synthetic(args.seed, n=args.n)


def _write_report(report, args, extra=None):
    out = _out_dir(args)
    report.metadata["flags"] = _flags_manifest(args)
    if extra:
        report.metadata.update(extra)
    report.write_csv(out / "report.csv")
    write_manifest(report.metadata, out / "manifest.json")
    print(f"wrote {out / 'report.csv'} ({len(report.rows)} rows)")


def _cmd_gen_mlr(args):
    out = _out_dir(args)
    train, test = gen_mlr(n=args.n, p=args.p, k=args.k, seed=args.seed, n_test=args.n_test)
    write_dataset_csv(train, out / "dataset.csv")
    manifest = dataset_manifest(train, "mlr", seed=args.seed, flags=_flags_manifest(args))
    if test is not None:
        write_dataset_csv(test, out / "test.csv")
        manifest["test_digest"] = datagen.dataset_digest(test)
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {out / 'dataset.csv'} (n={train.n}, p={train.p}, k={train.k})")


def _cmd_gen_deep(args):
    out = _out_dir(args)
    train, test = gen_deepnet(n=args.n, input_dim=args.input_dim,
                              gen_widths=tuple([args.gen_width] * args.gen_depth),
                              k=args.k, sigma=args.sigma, seed=args.seed,
                              n_test=args.n_test)
    write_dataset_csv(train, out / "dataset.csv")
    manifest = dataset_manifest(train, "deepnet", seed=args.seed, flags=_flags_manifest(args))
    if test is not None:
        write_dataset_csv(test, out / "test.csv")
        manifest["test_digest"] = datagen.dataset_digest(test)
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {out / 'dataset.csv'} (n={train.n}, p={train.p}, k={train.k})")


def _cmd_gen_xor(args):
    out = _out_dir(args)
    ds, P_soft = gen_xor(args.replicas, args.target_soft)
    write_dataset_csv(ds, out / "dataset.csv")
    with open(out / "soft_targets.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("p1\n")
        for v in P_soft[:, 0]:
            f.write(repr(float(v)) + "\n")
    manifest = dataset_manifest(ds, "xor", flags=_flags_manifest(args),
                                target_soft=args.target_soft,
                                class_1="xor-true")
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {out / 'dataset.csv'} (n={ds.n})")


def _cmd_validate_mlr(args):
    report = harness.run_mlr_validation(seed=args.seed, eps=args.eps,
                                        T=args.replicates, workers=args.workers)
    _write_report(report, args)


def _cmd_xor(args):
    report = harness.run_xor(replicas=args.replicas, seed=args.seed,
                             target_soft=args.target_soft, eps=args.eps,
                             T=args.replicates,
                             train_params=dict(learning_rate=args.lr, epochs=args.epochs),
                             workers=args.workers)
    _write_report(report, args)
    row = report.rows[0]
    print(f"param_count={row['param_count']} df={row['df']:.3f}")


def _cmd_sweep_structure(args):
    dataset = _load_dataset(args)
    report = harness.run_structure_sweep(dataset, widths=args.widths, depths=args.depths,
                                         train_params=_train_params(args), ctx=_ctx(args),
                                         workers=args.workers)
    _write_report(report, args)


def _cmd_sweep_reg(args):
    dataset = _load_dataset(args)
    report = harness.run_regularization_sweep(
        dataset, width=args.width, depth=args.depth, train_params=_train_params(args),
        corruption_grid=args.corruption_grid, dropout_grid=args.dropout_grid,
        weight_decay_grid=args.weight_decay_grid, ctx=_ctx(args), workers=args.workers)
    _write_report(report, args)


def _cmd_model_select(args):
    dataset = _load_dataset(args)
    report, dofaic_rho, naive_rho = harness.run_model_selection(
        dataset, widths=args.widths, depths=args.depths,
        train_params=_train_params(args), ctx=_ctx(args), folds=args.folds,
        workers=args.workers)
    _write_report(report, args)
    print(f"dofaic_rho={dofaic_rho:.4f} naive_rho={naive_rho:.4f} "
          f"dofaic_argmin={report.metadata['dofaic_argmin']} "
          f"cv_argmin={report.metadata['cv_argmin']}")


def _estimator_from_args(args):
    if args.model == "mlr":
        return MultinomialLogit(weight_decay=args.weight_decay)
    if args.model == "mean":
        return MeanEstimator()
    if args.model == "identity":
        return IdentityEstimator()
    hidden = tuple([args.width] * args.depth)
    return DeepNetClassifier(hidden_widths=hidden, **_train_params(args))


def _cmd_dof(args):
    dataset = _load_dataset(args)
    est = _estimator_from_args(args)
    spec = SweepSpec(dataset, [(args.model, est)], _ctx(args), workers=args.workers)
    report = run_sweep(spec)
    if not report.rows:
        raise EstimationError(report.metadata["errors"].get(args.model, "fit failed"))
    _write_report(report, args)
    row = report.rows[0]
    print(f"df={row['df']!r} stderr={row['df_stderr']!r} (eps={args.eps}, T={args.replicates})")


def _cmd_cv(args):
    dataset = _load_dataset(args)
    est = _estimator_from_args(args)
    total = cross_validate(dataset, est, folds=args.folds, seed=args.seed,
                           workers=args.workers)
    report = harness.ExperimentReport(
        rows=[{"model_id": args.model, "cv_mean_deviance": total,
               "width": args.width if args.model == "deepnet" else None,
               "depth": args.depth if args.model == "deepnet" else None}],
        metadata={"experiment": "cv", "folds": args.folds})
    _write_report(report, args)
    print(f"cv_mean_deviance={total!r} over {args.folds} folds")


def build_parser():
    parser = _Parser(prog="dofnet",
                     description="Degrees-of-freedom estimation and model selection "
                                 "for multi-class classifiers")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-mlr", help="generate the linear-score dataset")
    _add_shared(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--n-test", type=int, default=0)
    p.set_defaults(func=_cmd_gen_mlr)

    p = sub.add_parser("gen-deep", help="generate the deep-generator dataset")
    _add_shared(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--input-dim", type=int, default=30)
    p.add_argument("--gen-width", type=int, default=30)
    p.add_argument("--gen-depth", type=int, default=2)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--sigma", type=float, default=float(np.sqrt(5.0)))
    p.set_defaults(func=_cmd_gen_deep)

    p = sub.add_parser("gen-xor", help="generate replicated XOR patterns")
    _add_shared(p)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--target-soft", type=float, default=0.9)
    p.set_defaults(func=_cmd_gen_xor)

    p = sub.add_parser("validate-mlr", help="df vs parameter count on nested logits")
    _add_shared(p)
    p.set_defaults(func=_cmd_validate_mlr, replicates=5)

    p = sub.add_parser("xor", help="train the 2-2 XOR network and estimate df")
    _add_shared(p)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--target-soft", type=float, default=0.9)
    p.add_argument("--lr", type=float, default=harness.XOR_TRAIN["learning_rate"])
    p.add_argument("--epochs", type=int, default=harness.XOR_TRAIN["epochs"])
    p.set_defaults(func=_cmd_xor, replicates=3)

    p = sub.add_parser("sweep-structure", help="df across a width x depth grid")
    _add_shared(p)
    _add_model_flags(p)
    p.add_argument("--data", type=Path, default=None, help="dataset CSV (default: generate)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--widths", type=_int_list, default=list(harness.DESK_WIDTHS))
    p.add_argument("--depths", type=_int_list, default=list(harness.DESK_DEPTHS))
    p.set_defaults(func=_cmd_sweep_structure)

    p = sub.add_parser("sweep-reg", help="df across regularization grids, one factor at a time")
    _add_shared(p)
    _add_model_flags(p)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--corruption-grid", type=_float_list, default=None)
    p.add_argument("--dropout-grid", type=_float_list, default=None)
    p.add_argument("--weight-decay-grid", type=_float_list, default=None)
    p.set_defaults(func=_cmd_sweep_reg)

    p = sub.add_parser("model-select", help="DoFAIC vs cross-validation over a sweep")
    _add_shared(p)
    _add_model_flags(p)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--widths", type=_int_list, default=list(harness.DESK_WIDTHS))
    p.add_argument("--depths", type=_int_list, default=list(harness.DESK_DEPTHS))
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=_cmd_model_select)

    p = sub.add_parser("dof", help="df of a single model on a dataset")
    _add_shared(p)
    _add_model_flags(p)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--model", choices=["deepnet", "mlr", "mean", "identity"],
                   default="deepnet")
    p.set_defaults(func=_cmd_dof)

    p = sub.add_parser("cv", help="k-fold cross-validation deviance of a single model")
    _add_shared(p)
    _add_model_flags(p)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--model", choices=["deepnet", "mlr", "mean", "identity"],
                   default="deepnet")
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=_cmd_cv)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, EstimationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
