"""Command-line interface.

Subcommands:
  gradcheck   run every analytic-vs-finite-difference check; exit 0 iff all pass
  sample-so3  write Haar-uniform rotations as quaternion lines `a b c d`
  train       run one experiment end to end, writing CSVs into a run directory
  eval        score a prediction file against a ground-truth file
  report      aggregate run directories into comparison and variance tables
"""

import argparse
import json
import math
import sys

from . import backend, experiments, gradcheck, linalg, rotations
from .experiments import ExperimentConfig
from .network import TrainingDiverged

TASK_DIMS = {"s1": 2, "s2": 3, "s3": 4}


def _add_train_parser(sub):
    p = sub.add_parser("train", help="train one configuration and evaluate it")
    p.add_argument("--task", choices=experiments.TASKS)
    p.add_argument("--head", choices=experiments.HEADS)
    p.add_argument("--loss", choices=experiments.LOSSES)
    p.add_argument("--lambda", dest="lam", type=float, help="sign-loss weight")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--pre-rot", type=float, help="pre-rotation of the training targets, degrees")
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--out", required=True, help="directory to write the run into")
    return p


def _build_config(args):
    base = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    cfg = ExperimentConfig.from_json_dict(base) if base else ExperimentConfig()
    overrides = {}
    for field in ("task", "head", "loss", "lam", "epochs", "batch", "lr", "seed",
                  "n_train", "n_test", "noise"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.pre_rot is not None:
        overrides["pre_rotation"] = math.radians(args.pre_rot)
    if overrides:
        cfg = ExperimentConfig(**{**_cfg_as_kwargs(cfg), **overrides})
    return cfg.validate()


def _cfg_as_kwargs(cfg):
    return {name: getattr(cfg, name) for name in cfg.__dataclass_fields__}


def cmd_gradcheck(args):
    results = gradcheck.run_all(trials=args.trials, eps=args.eps, seed=args.seed)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(f"{status} {r.name:24s} max_rel={r.max_err:.3e} tol={r.tol:.0e} draws={r.draws}")
    print("gradcheck:", "all checks passed" if ok else "FAILURES above")
    return 0 if ok else 1


def cmd_sample_so3(args):
    quats = rotations.sample_uniform_so3(linalg.make_rng(args.seed), args.n)
    if args.out:
        rotations.save_quaternions(args.out, quats)
    else:
        for q in quats:
            print(rotations.format_quaternion(q))
    return 0


def cmd_train(args):
    cfg = _build_config(args)
    print(f"run: {cfg.run_name()}  (kernel backend: {backend.BACKEND})")
    try:
        report, records = experiments.run_experiment(cfg, out_dir=args.out)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    print(f"batches: {len(records)}  final loss: {records[-1].loss:.6g}")
    for key, value in report.as_dict().items():
        print(f"{key}: {value:.9g}")
    return 0


def cmd_eval(args):
    dims = TASK_DIMS[args.task]
    preds = experiments.load_vectors(args.pred, dims)
    gts = experiments.load_vectors(args.gt, dims)
    # serialized vectors are rounded to 9 significant digits; renormalize so
    # the unit-norm preconditions of the metrics hold exactly
    preds = preds / _row_norms(preds)
    gts = gts / _row_norms(gts)
    report = experiments.evaluate_task(args.task, preds, gts)
    for key, value in report.as_dict().items():
        print(f"{key}: {value:.9g}")
    return 0


def _row_norms(arr):
    import numpy as np

    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if norms.min() < linalg.DEGENERATE_NORM:
        raise ValueError("file contains a (near-)zero vector")
    return norms


def cmd_report(args):
    comparison, rows = experiments.aggregate_runs(args.dir)
    if not rows:
        print(f"no runs found under {args.dir}", file=sys.stderr)
        return 1
    experiments.write_aggregates(args.dir, comparison, rows)

    print("head comparison (aggregated over runs):")
    header = f"{'task':4s} {'head':6s} {'loss':8s} {'runs':>4s} {'MedErr':>9s} {'Acc@30':>7s} {'Acc@15':>7s} {'Acc@7.5':>8s}"
    print(header)
    for c in comparison:
        print(
            f"{c['task']:4s} {c['head']:6s} {c['loss']:8s} {c['runs']:4d} "
            f"{c['med_err_deg_mean']:9.3f} {c['acc_pi6_mean']:7.3f} "
            f"{c['acc_pi12_mean']:7.3f} {c['acc_pi24_mean']:8.3f}"
        )
    print()
    print("gradient-norm variance (global and mean per-epoch):")
    print(f"{'task':4s} {'head':6s} {'loss':8s} {'seed':>6s} {'global':>12s} {'per-epoch':>12s}")
    for row in rows:
        seed = "-" if row["seed"] is None else str(row["seed"])
        print(
            f"{row['task']:4s} {row['head']:6s} {row['loss']:8s} {seed:>6s} "
            f"{row['grad_var']:12.5g} {row['grad_var_per_epoch']:12.5g}"
        )
    print(f"\nwrote comparison.csv and grad_variance.csv under {args.dir}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="spherereg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=20240901)

    p = sub.add_parser("sample-so3", help="sample Haar-uniform rotations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (stdout if omitted)")

    _add_train_parser(sub)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--task", choices=experiments.TASKS, required=True)

    p = sub.add_parser("report", help="aggregate run directories")
    p.add_argument("--dir", required=True)

    args = parser.parse_args(argv)
    handler = {
        "gradcheck": cmd_gradcheck,
        "sample-so3": cmd_sample_so3,
        "train": cmd_train,
        "eval": cmd_eval,
        "report": cmd_report,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
