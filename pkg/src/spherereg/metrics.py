"""Evaluation metrics: geodesic rotation errors and angular normal errors,
summarized as medians, means, and threshold accuracies.

Thresholds follow the two metric families used for pose and surface-normal
benchmarks: pi/6, pi/12, pi/24 for rotations and 11.25, 22.5, 30 degrees for
normals. Both families are computed from the same per-sample angular errors,
so every report carries both.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rotations
from .rotations import EulerAngles, Quaternion

ROTATION_THRESHOLDS_DEG = (30.0, 15.0, 7.5)
NORMAL_THRESHOLDS_DEG = (11.25, 22.5, 30.0)


@dataclass
class EvalReport:
    med_err: float
    acc_pi6: float
    acc_pi12: float
    acc_pi24: float
    mean_err: float
    median_err: float
    acc_11_25: float
    acc_22_5: float
    acc_30: float

    def as_dict(self):
        return {
            "med_err": self.med_err,
            "acc_pi6": self.acc_pi6,
            "acc_pi12": self.acc_pi12,
            "acc_pi24": self.acc_pi24,
            "mean_err": self.mean_err,
            "median_err": self.median_err,
            "acc_11_25": self.acc_11_25,
            "acc_22_5": self.acc_22_5,
            "acc_30": self.acc_30,
        }


def report_from_errors_deg(err):
    err = np.asarray(err, dtype=np.float64)
    med = float(np.median(err))
    return EvalReport(
        med_err=med,
        acc_pi6=float(np.mean(err <= ROTATION_THRESHOLDS_DEG[0])),
        acc_pi12=float(np.mean(err <= ROTATION_THRESHOLDS_DEG[1])),
        acc_pi24=float(np.mean(err <= ROTATION_THRESHOLDS_DEG[2])),
        mean_err=float(np.mean(err)),
        median_err=med,
        acc_11_25=float(np.mean(err <= NORMAL_THRESHOLDS_DEG[0])),
        acc_22_5=float(np.mean(err <= NORMAL_THRESHOLDS_DEG[1])),
        acc_30=float(np.mean(err <= NORMAL_THRESHOLDS_DEG[2])),
    )


def _to_matrix(r):
    if isinstance(r, Quaternion):
        return rotations.quat_to_matrix(r)
    if isinstance(r, EulerAngles):
        return rotations.euler_to_matrix(r)
    arr = np.asarray(r, dtype=np.float64)
    if arr.shape == (3, 3):
        return arr
    if arr.shape == (4,):
        return rotations.quat_to_matrix(arr)
    raise TypeError(f"cannot interpret {type(r).__name__} with shape {arr.shape} as a rotation")


def rotation_errors_deg(preds, gts):
    """Per-sample geodesic errors in degrees between rotation predictions and
    ground truths (quaternions, Euler angles, or 3x3 matrices)."""
    if len(preds) == 0 or len(preds) != len(gts):
        raise ValueError("prediction and ground-truth lists must be non-empty and equal length")
    return np.array(
        [
            math.degrees(rotations.geodesic_distance(_to_matrix(g), _to_matrix(p)))
            for p, g in zip(preds, gts)
        ]
    )


def eval_rotation(preds, gts):
    return report_from_errors_deg(rotation_errors_deg(preds, gts))


def normal_errors_deg(preds, gts):
    """Per-sample angular errors in degrees between unit direction vectors."""
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] == 0 or preds.shape != gts.shape:
        raise ValueError("expected matching non-empty (n, 3) arrays")
    for name, arr in (("predictions", preds), ("ground truths", gts)):
        if np.max(np.abs(np.linalg.norm(arr, axis=1) - 1.0)) > 1e-6:
            raise ValueError(f"{name} must be unit vectors (within 1e-6)")
    cos = np.clip(np.sum(preds * gts, axis=1), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def eval_normals(preds, gts):
    return report_from_errors_deg(normal_errors_deg(preds, gts))
