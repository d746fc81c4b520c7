"""End-to-end experiment runs: data generation, training, evaluation, and
deterministic CSV reports.

Each run writes into its own directory named from a hash of the full
configuration, so independent runs never clobber each other:

    records.csv   per-minibatch telemetry: epoch,batch,loss,grad_O_norm
    report.csv    one summary row: task,head,loss,med_err_deg,acc_pi6,
                  acc_pi12,acc_pi24,grad_var
    config.json   the resolved configuration
    model.npz     final checkpoint
    pred.txt      test-set predictions, one unit vector per line
    gt.txt        test-set ground truths, same format

All floats are serialized with 9 significant digits, UTF-8, LF endings; two
runs with identical configuration produce bitwise-identical files.
"""

import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import datasets, linalg, metrics, network, rotations
from .activations import ActivationKind
from .heads import SphereKind, decode_signs

TASKS = ("s1", "s2", "s3")
HEADS = ("direct", "flat", "sexp")
LOSSES = ("cosine", "l2", "xent2", "smoothl1")

_HEAD_ACTIVATION = {
    "direct": None,
    "flat": ActivationKind.SPHERICAL_FLAT,
    "sexp": ActivationKind.SPHERICAL_EXP,
}

RECORDS_HEADER = "epoch,batch,loss,grad_O_norm"
REPORT_HEADER = "task,head,loss,med_err_deg,acc_pi6,acc_pi12,acc_pi24,grad_var"


@dataclass
class ExperimentConfig:
    task: str = "s3"
    head: str = "sexp"
    loss: str = "cosine"
    lam: float = 1.0
    epochs: int = 50
    batch: int = 64
    lr: float = 0.05
    seed: int = 0
    n_train: int = 8192
    n_test: int = 2048
    noise: float = 0.01
    pre_rotation: float | None = None
    hidden: tuple = (64, 64, 32)

    def validate(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if (self.loss == "smoothl1") != (self.head == "direct"):
            raise ValueError("smooth-L1 pairs with the direct head (and the direct head with it)")
        if self.loss == "xent2" and self.head != "sexp":
            raise ValueError("cross-entropy-on-squares requires the sexp head")
        if self.pre_rotation is not None and self.task == "s3":
            raise ValueError("pre-rotation is undefined for the quaternion task")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if self.lam < 0.0 or self.noise < 0.0:
            raise ValueError("lambda and noise must be >= 0")
        network.TrainConfig(
            epochs=self.epochs, batch_size=self.batch, lr=self.lr, seed=self.seed
        ).validate()
        return self

    def to_json_dict(self):
        d = {
            "task": self.task,
            "head": self.head,
            "loss": self.loss,
            "lambda": self.lam,
            "epochs": self.epochs,
            "batch": self.batch,
            "lr": self.lr,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "noise": self.noise,
            "pre_rotation": self.pre_rotation,
            "hidden": list(self.hidden),
        }
        return d

    @classmethod
    def from_json_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def run_name(self):
        blob = json.dumps(self.to_json_dict(), sort_keys=True)
        digest = hashlib.sha1(blob.encode("utf-8")).hexdigest()[:8]
        return f"{self.task}-{self.head}-{self.loss}-seed{self.seed}-{digest}"


def _fmt(x):
    return f"{x:.9g}"


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_records_csv(path, records):
    lines = [RECORDS_HEADER]
    for r in records:
        lines.append(f"{r.epoch},{r.batch},{_fmt(r.loss)},{_fmt(r.grad_O_norm)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_report_csv(path, cfg, report, grad_var):
    row = ",".join(
        [
            cfg.task,
            cfg.head,
            cfg.loss,
            _fmt(report.med_err),
            _fmt(report.acc_pi6),
            _fmt(report.acc_pi12),
            _fmt(report.acc_pi24),
            _fmt(grad_var),
        ]
    )
    _write_text(path, REPORT_HEADER + "\n" + row + "\n")


def write_vectors(path, vectors):
    lines = [" ".join(_fmt(x) for x in row) for row in np.asarray(vectors)]
    _write_text(path, "\n".join(lines) + "\n")


def load_vectors(path, dims):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != dims:
                raise ValueError(f"{path}:{lineno}: expected {dims} values, got {len(parts)}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"{path}: no vectors found")
    return np.array(rows)


def build_train_data(ds):
    return network.TrainData(
        features=np.ascontiguousarray(ds.features, dtype=np.float64),
        raw=np.ascontiguousarray(ds.raw_targets, dtype=np.float64),
        abs_values=np.stack([t.abs for t in ds.targets]),
        sign_classes=np.array([t.sign_class for t in ds.targets], dtype=np.intp),
    )


def predict_vectors(model, features, cfg):
    """Unit-vector predictions for a feature batch.

    sexp merges absolute values with the argmax sign class; flat outputs are
    already signed unit vectors; direct outputs are normalized (the raw
    embedding carries no norm constraint, but the metrics require unit
    inputs). Predictions are rotated back when the run trained on
    pre-rotated targets.
    """
    _, p, logits = model.forward(np.ascontiguousarray(features, dtype=np.float64))
    kind = SphereKind(cfg.task)
    if cfg.head == "sexp":
        classes = np.argmax(logits, axis=1)
        signs = np.stack([decode_signs(int(c), kind) for c in classes])
        vec = signs * p
    elif cfg.head == "flat":
        vec = p
    else:
        norms = np.linalg.norm(p, axis=1, keepdims=True)
        if norms.min() < linalg.DEGENERATE_NORM:
            raise ValueError("direct head produced a (near-)zero output; direction undefined")
        vec = p / norms
    if cfg.pre_rotation is not None:
        vec = datasets.rotate_back(vec, kind, cfg.pre_rotation)
        vec = vec / np.linalg.norm(vec, axis=1, keepdims=True)
    return vec


def evaluate_task(task, pred_vectors, gt_vectors):
    if task == "s2":
        return metrics.eval_normals(pred_vectors, gt_vectors)
    if task == "s3":
        preds = [rotations.Quaternion.canonical(v) for v in pred_vectors]
        gts = [rotations.Quaternion.canonical(v) for v in gt_vectors]
        return metrics.eval_rotation(preds, gts)
    preds = [_angle_to_euler(v) for v in pred_vectors]
    gts = [_angle_to_euler(v) for v in gt_vectors]
    return metrics.eval_rotation(preds, gts)


def _angle_to_euler(v):
    return rotations.EulerAngles(rotations.wrap_pi(math.atan2(v[1], v[0])), 0.0, 0.0)


def run_experiment(cfg, out_dir=None):
    """Generate data, train, evaluate on the held-out split, optionally write
    the run directory. Deterministic given the configuration."""
    cfg.validate()
    kind = SphereKind(cfg.task)
    rng = linalg.make_rng(cfg.seed)
    full = datasets.GENERATORS[kind](rng, cfg.n_train + cfg.n_test, cfg.noise)
    train_ds = _slice_ds(full, 0, cfg.n_train)
    test_ds = _slice_ds(full, cfg.n_train, cfg.n_train + cfg.n_test)
    if cfg.pre_rotation is not None:
        train_ds = datasets.apply_pre_rotation(train_ds, cfg.pre_rotation)

    model = MlpModelFactory.build(rng, full.features.shape[1], kind, cfg)
    data = build_train_data(train_ds)
    model, records = network.train(
        model,
        data,
        network.TrainConfig(
            epochs=cfg.epochs,
            batch_size=cfg.batch,
            lr=cfg.lr,
            seed=cfg.seed,
            loss=cfg.loss,
            sign_loss_weight=cfg.lam,
        ),
    )
    preds = predict_vectors(model, test_ds.features, cfg)
    report = evaluate_task(cfg.task, preds, test_ds.raw_targets)
    grad_var = float(np.var([r.grad_O_norm for r in records]))

    if out_dir is not None:
        run_dir = os.path.join(out_dir, cfg.run_name())
        os.makedirs(run_dir, exist_ok=True)
        write_records_csv(os.path.join(run_dir, "records.csv"), records)
        write_report_csv(os.path.join(run_dir, "report.csv"), cfg, report, grad_var)
        _write_text(
            os.path.join(run_dir, "config.json"),
            json.dumps(cfg.to_json_dict(), sort_keys=True, indent=2) + "\n",
        )
        network.save_model(os.path.join(run_dir, "model.npz"), model)
        write_vectors(os.path.join(run_dir, "pred.txt"), preds)
        write_vectors(os.path.join(run_dir, "gt.txt"), test_ds.raw_targets)
    return report, records


class MlpModelFactory:
    @staticmethod
    def build(rng, in_dim, kind, cfg):
        return network.MlpModel.build(
            rng, in_dim, kind, _HEAD_ACTIVATION[cfg.head], hidden=tuple(cfg.hidden)
        )


def _slice_ds(ds, start, stop):
    return datasets.SyntheticDataset(
        kind=ds.kind,
        features=ds.features[start:stop],
        targets=ds.targets[start:stop],
        raw_targets=ds.raw_targets[start:stop],
    )


def per_epoch_grad_variance(records):
    """Mean over epochs of the within-epoch variance of grad_O_norm."""
    by_epoch = {}
    for r in records:
        by_epoch.setdefault(r.epoch, []).append(r.grad_O_norm)
    return float(np.mean([np.var(v) for v in by_epoch.values()]))


def collect_runs(root):
    """Find run directories (anything containing report.csv) under root."""
    runs = []
    for dirpath, _, filenames in sorted(os.walk(root)):
        if "report.csv" in filenames:
            runs.append(dirpath)
    return runs


def read_report_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != REPORT_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        parts = fh.readline().strip().split(",")
    task, head, loss = parts[0], parts[1], parts[2]
    nums = [float(p) for p in parts[3:]]
    return {
        "task": task,
        "head": head,
        "loss": loss,
        "med_err_deg": nums[0],
        "acc_pi6": nums[1],
        "acc_pi12": nums[2],
        "acc_pi24": nums[3],
        "grad_var": nums[4],
    }


def read_records_csv(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != RECORDS_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            e, b, loss, gnorm = line.strip().split(",")
            records.append(
                network.TrainRecord(
                    epoch=int(e), batch=int(b), loss=float(loss), grad_O_norm=float(gnorm)
                )
            )
    return records


def aggregate_runs(root):
    """Aggregate all runs under root into comparison and gradient-variance tables."""
    rows = []
    for run_dir in collect_runs(root):
        row = read_report_csv(os.path.join(run_dir, "report.csv"))
        cfg_path = os.path.join(run_dir, "config.json")
        if os.path.exists(cfg_path):
            with open(cfg_path, "r", encoding="utf-8") as fh:
                row["seed"] = json.load(fh).get("seed")
        else:
            row["seed"] = None
        rec_path = os.path.join(run_dir, "records.csv")
        if os.path.exists(rec_path):
            row["grad_var_per_epoch"] = per_epoch_grad_variance(read_records_csv(rec_path))
        else:
            row["grad_var_per_epoch"] = float("nan")
        row["run_dir"] = run_dir
        rows.append(row)

    groups = {}
    for row in rows:
        groups.setdefault((row["task"], row["head"], row["loss"]), []).append(row)
    comparison = []
    for (task, head, loss), members in sorted(groups.items()):
        med = [m["med_err_deg"] for m in members]
        comparison.append(
            {
                "task": task,
                "head": head,
                "loss": loss,
                "runs": len(members),
                "med_err_deg_mean": float(np.mean(med)),
                "med_err_deg_median": float(np.median(med)),
                "acc_pi6_mean": float(np.mean([m["acc_pi6"] for m in members])),
                "acc_pi12_mean": float(np.mean([m["acc_pi12"] for m in members])),
                "acc_pi24_mean": float(np.mean([m["acc_pi24"] for m in members])),
                "grad_var_mean": float(np.mean([m["grad_var"] for m in members])),
            }
        )
    return comparison, rows


def write_aggregates(root, comparison, rows):
    comp_lines = [
        "task,head,loss,runs,med_err_deg_mean,med_err_deg_median,"
        "acc_pi6_mean,acc_pi12_mean,acc_pi24_mean,grad_var_mean"
    ]
    for c in comparison:
        comp_lines.append(
            f"{c['task']},{c['head']},{c['loss']},{c['runs']},"
            f"{_fmt(c['med_err_deg_mean'])},{_fmt(c['med_err_deg_median'])},"
            f"{_fmt(c['acc_pi6_mean'])},{_fmt(c['acc_pi12_mean'])},"
            f"{_fmt(c['acc_pi24_mean'])},{_fmt(c['grad_var_mean'])}"
        )
    _write_text(os.path.join(root, "comparison.csv"), "\n".join(comp_lines) + "\n")

    var_lines = ["task,head,loss,seed,grad_var_global,grad_var_per_epoch_mean"]
    for row in sorted(rows, key=lambda r: (r["task"], r["head"], r["loss"], str(r["seed"]))):
        seed = "" if row["seed"] is None else str(row["seed"])
        var_lines.append(
            f"{row['task']},{row['head']},{row['loss']},{seed},"
            f"{_fmt(row['grad_var'])},{_fmt(row['grad_var_per_epoch'])}"
        )
    _write_text(os.path.join(root, "grad_variance.csv"), "\n".join(var_lines) + "\n")
