"""Synthetic on-sphere regression tasks at desk scale.

Features are fixed seeded random linear lifts of the targets (circle and
normal tasks) or the flattened coordinates of a fixed asymmetric point cloud
rotated by the target rotation (quaternion task), plus Gaussian noise. The
lift matrices and the point cloud come from their own fixed seeds so that
independently generated train and test splits describe the same task.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg, rotations
from .heads import SphereKind, encode_target

LIFT_DIM = 16
_LIFT_SEEDS = {SphereKind.S1: 0x51EED1, SphereKind.S2: 0x51EED2}
_CLOUD_SEED = 0x51EED3
CLOUD_POINTS = 8


@dataclass
class SyntheticDataset:
    kind: SphereKind
    features: np.ndarray
    targets: list
    raw_targets: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if len(self.targets) != n or self.raw_targets.shape[0] != n:
            raise ValueError("features, targets, and raw_targets must have equal lengths")

    def __len__(self):
        return self.features.shape[0]


def lift_matrix(kind):
    """The fixed (LIFT_DIM, dims) lift for the circle and normal tasks."""
    kind = SphereKind(kind)
    return linalg.make_rng(_LIFT_SEEDS[kind]).normal(size=(LIFT_DIM, kind.dims))


def canonical_cloud():
    """Fixed 8-point cloud with no rotational symmetry (generic random points)."""
    return linalg.make_rng(_CLOUD_SEED).normal(size=(CLOUD_POINTS, 3))


def _assemble(kind, raw, features):
    targets = [encode_target(y, kind) for y in raw]
    return SyntheticDataset(kind=kind, features=features, targets=targets, raw_targets=raw)


def gen_s1(rng, n, noise):
    """Angles uniform on the circle; targets [cos phi, sin phi]."""
    _check_gen_args(n, noise)
    phi = rng.uniform(-np.pi, np.pi, size=n)
    raw = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    features = raw @ lift_matrix(SphereKind.S1).T + noise * rng.normal(size=(n, LIFT_DIM))
    return _assemble(SphereKind.S1, raw, features)


def gen_s2(rng, n, noise):
    """Uniform unit normals on the outward-facing hemisphere (z < 0)."""
    _check_gen_args(n, noise)
    raw = np.empty((n, 3))
    filled = 0
    while filled < n:
        v = rng.normal(size=(n - filled, 3))
        norms = np.linalg.norm(v, axis=1)
        ok = norms >= linalg.DEGENERATE_NORM
        v = v[ok] / norms[ok, None]
        v[:, 2] = -np.abs(v[:, 2])
        v = v[v[:, 2] < 0.0]
        raw[filled : filled + v.shape[0]] = v
        filled += v.shape[0]
    features = raw @ lift_matrix(SphereKind.S2).T + noise * rng.normal(size=(n, LIFT_DIM))
    return _assemble(SphereKind.S2, raw, features)


def gen_s3(rng, n, noise):
    """Haar-uniform rotations; features are the rotated point-cloud coordinates."""
    _check_gen_args(n, noise)
    cloud = canonical_cloud()
    quats = rotations.sample_uniform_so3(rng, n)
    raw = np.stack([q.as_array() for q in quats])
    features = np.empty((n, 3 * CLOUD_POINTS))
    for i, q in enumerate(quats):
        features[i] = (cloud @ rotations.quat_to_matrix(q).T).reshape(-1)
    features += noise * rng.normal(size=features.shape)
    return _assemble(SphereKind.S3, raw, features)


def apply_pre_rotation(ds, angle):
    """Rotate targets by a fixed angle (circle: angle addition; normals: about
    z), re-encoding sign classes. Exactly invertible by rotating back; the
    quaternion task has no analogous single-angle rotation and is rejected.
    """
    angle = float(angle)
    if ds.kind is SphereKind.S1:
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
    elif ds.kind is SphereKind.S2:
        rot = rotations.rot_z(angle)
    else:
        raise ValueError("pre-rotation is defined for the circle and normal tasks only")
    raw = ds.raw_targets @ rot.T
    # rotation preserves norms up to rounding; renormalize so encode's
    # on-sphere check never trips on accumulated error
    raw = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return _assemble(ds.kind, raw, ds.features)


def rotate_back(vectors, kind, angle):
    """Undo apply_pre_rotation on predicted vectors."""
    kind = SphereKind(kind)
    if kind is SphereKind.S1:
        c, s = np.cos(-angle), np.sin(-angle)
        rot = np.array([[c, -s], [s, c]])
    elif kind is SphereKind.S2:
        rot = rotations.rot_z(-angle)
    else:
        raise ValueError("pre-rotation is defined for the circle and normal tasks only")
    return vectors @ rot.T


def _check_gen_args(n, noise):
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise < 0.0:
        raise ValueError("noise must be >= 0")


GENERATORS = {SphereKind.S1: gen_s1, SphereKind.S2: gen_s2, SphereKind.S3: gen_s3}
