"""Rotation representations, conversions, the geodesic metric, and uniform
SO(3) sampling.

Euler convention (fixed for the whole package): R(a, e, t) = Rz(t) Rx(e) Ry(a)
with azimuth a about the vertical y-axis, elevation e about x, and in-plane
rotation t about the camera axis z. Azimuth and in-plane angles live in
[-pi, pi), elevation in [-pi/2, pi/2].

Quaternions are stored real-part-first (a, b, c, d) and canonicalized to the
a >= 0 hemisphere; when a == 0 exactly, the sign is flipped so the first
nonzero imaginary component is positive.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg


class GimbalLockError(ValueError):
    """Euler decomposition requested inside the degenerate |elevation| ~ pi/2 region."""


def wrap_pi(x):
    """Wrap an angle to [-pi, pi)."""
    return (float(x) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class EulerAngles:
    azimuth: float
    elevation: float
    inplane: float

    def __post_init__(self):
        for name in ("azimuth", "elevation", "inplane"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")
        if not (-math.pi <= self.azimuth < math.pi):
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi)")
        if not (-math.pi / 2 <= self.elevation <= math.pi / 2):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")
        if not (-math.pi <= self.inplane < math.pi):
            raise ValueError(f"inplane {self.inplane} outside [-pi, pi)")


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion on the canonical a >= 0 hemisphere."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        v = np.array([self.a, self.b, self.c, self.d], dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("quaternion has non-finite components")
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("quaternion is not unit length")
        if self.a < 0.0:
            raise ValueError("quaternion is not on the canonical a >= 0 hemisphere")

    def as_array(self):
        return np.array([self.a, self.b, self.c, self.d], dtype=np.float64)

    @classmethod
    def canonical(cls, v):
        """Normalize a 4-vector and fold it onto the canonical hemisphere.

        Tie-break at a == 0: flip so the first nonzero of (b, c, d) is positive.
        """
        v = linalg.as_vector(v)
        if v.size != 4:
            raise ValueError("expected 4 components")
        n = np.linalg.norm(v)
        if n < linalg.DEGENERATE_NORM:
            raise ValueError("cannot canonicalize a (near-)zero 4-vector")
        v = v / n
        if v[0] < 0.0:
            v = -v
        elif v[0] == 0.0:
            for comp in v[1:]:
                if comp != 0.0:
                    if comp < 0.0:
                        v = -v
                    break
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class AxisAngle:
    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = linalg.as_vector(self.axis)
        if axis.size != 3:
            raise ValueError("axis must have 3 components")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("axis must be unit length")
        object.__setattr__(self, "axis", axis)
        if not (0.0 <= self.angle <= math.pi):
            raise ValueError(f"angle {self.angle} outside [0, pi]")


def rot_x(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def check_rotation(r, tol=1e-9):
    """Validate orthogonality and det = +1; returns the matrix as float64."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise ValueError("expected a finite 3x3 matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise ValueError("matrix is not orthogonal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return r


def euler_to_matrix(ang):
    return rot_z(ang.inplane) @ rot_x(ang.elevation) @ rot_y(ang.azimuth)


def matrix_to_euler(r):
    """Inverse of euler_to_matrix away from the gimbal-lock region.

    With R = Rz(t) Rx(e) Ry(a): R[2,1] = sin e, R[2,0] = -cos e sin a,
    R[2,2] = cos e cos a, R[0,1] = -sin t cos e, R[1,1] = cos t cos e.
    """
    r = check_rotation(r)
    se = min(1.0, max(-1.0, float(r[2, 1])))
    e = math.asin(se)
    if abs(e) >= math.pi / 2 - 1e-6:
        raise GimbalLockError(
            "elevation within 1e-6 of +-pi/2: azimuth and in-plane rotation are not separable"
        )
    a = math.atan2(-r[2, 0], r[2, 2])
    t = math.atan2(-r[0, 1], r[1, 1])
    return EulerAngles(wrap_pi(a), e, wrap_pi(t))


def _quat_components(q):
    if isinstance(q, Quaternion):
        return q.as_array()
    v = linalg.as_vector(q)
    if v.size != 4:
        raise ValueError("expected 4 quaternion components")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("quaternion is not unit length")
    return v


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion. Accepts Quaternion instances or
    raw 4-vectors from either hemisphere (q and -q give the same matrix)."""
    a, b, c, d = _quat_components(q)
    return np.array(
        [
            [1 - 2 * (c * c + d * d), 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), 1 - 2 * (b * b + d * d), 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), 1 - 2 * (b * b + c * c)],
        ]
    )


def matrix_to_quat(r):
    """Canonical-hemisphere quaternion of a rotation matrix (largest-pivot method)."""
    r = check_rotation(r)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif r[1, 1] >= r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    return Quaternion.canonical(q)


def axis_angle_to_quat(aa):
    """(cos(angle/2), sin(angle/2) * axis); lands on the canonical hemisphere
    because angle <= pi."""
    half = 0.5 * aa.angle
    s = math.sin(half)
    return Quaternion(math.cos(half), s * aa.axis[0], s * aa.axis[1], s * aa.axis[2])


def quat_to_axis_angle(q):
    """Inverse of axis_angle_to_quat. Below angle 1e-9 the axis is undefined;
    the convention is to return axis e_x with angle 0."""
    if not isinstance(q, Quaternion):
        q = Quaternion.canonical(_quat_components(q))
    angle = 2.0 * math.acos(min(1.0, max(-1.0, q.a)))
    if angle < 1e-9:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    v = np.array([q.b, q.c, q.d]) / math.sin(0.5 * angle)
    return AxisAngle(v / np.linalg.norm(v), angle)


def geodesic_distance(r_gt, r_pr):
    """Rotation angle of R_gt^T R_pr in [0, pi], via the clamped trace formula."""
    r_gt = check_rotation(r_gt)
    r_pr = check_rotation(r_pr)
    rel = r_gt.T @ r_pr
    cos_angle = (np.trace(rel) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos_angle)))


def sample_uniform_so3(rng, n):
    """n Haar-uniform rotations as canonical-hemisphere quaternions.

    Four independent standard normals normalized to the 3-sphere are uniform
    on it; folding onto a hemisphere preserves uniformity over rotations
    because q and -q are the same rotation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    while len(out) < n:
        draws = rng.normal(size=(n - len(out), 4))
        for row in draws:
            if np.linalg.norm(row) >= linalg.DEGENERATE_NORM:
                out.append(Quaternion.canonical(row))
    return out


def save_quaternions(path, quats):
    """One rotation per line: `a b c d` with 9 significant digits, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in quats:
            fh.write(format_quaternion(q) + "\n")


def format_quaternion(q):
    return " ".join(f"{x:.9g}" for x in q.as_array())


def load_quaternions(path):
    """Parse `a b c d` lines; each is renormalized and hemisphere-folded, so
    the 9-digit serialization round-trips to a valid Quaternion."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 components, got {len(parts)}")
            out.append(Quaternion.canonical([float(p) for p in parts]))
    return out
