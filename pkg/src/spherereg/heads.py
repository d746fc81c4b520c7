"""Target decomposition into absolute values plus a sign class, the merge
rule, and the loss functions with their analytic gradients.

Sign-class bit rule: the free components of a target, ordered by position,
each contribute one bit (1 when the component is negative); the first free
component is the most significant bit. Components whose sign is fixed by the
sphere kind (the z-component of an outward surface normal is always negative,
the real part of a canonical quaternion always non-negative) carry no bit.

  S1: free = (cos, sin)            -> 4 classes
  S2: free = (nx, ny), nz fixed -  -> 4 classes
  S3: free = (b, c, d), a fixed +  -> 8 classes
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .activations import softmax_forward

SPHERE_TOL = 1e-6


class SphereKind(Enum):
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"

    @property
    def dims(self):
        return {SphereKind.S1: 2, SphereKind.S2: 3, SphereKind.S3: 4}[self]

    @property
    def sign_classes(self):
        return {SphereKind.S1: 4, SphereKind.S2: 4, SphereKind.S3: 8}[self]

    @property
    def free_indices(self):
        return {SphereKind.S1: (0, 1), SphereKind.S2: (0, 1), SphereKind.S3: (1, 2, 3)}[self]

    @property
    def fixed_component(self):
        """(index, sign) of the constrained component, or None."""
        return {SphereKind.S1: None, SphereKind.S2: (2, -1.0), SphereKind.S3: (0, 1.0)}[self]


@dataclass(frozen=True)
class SphereTarget:
    abs: np.ndarray
    sign_class: int
    kind: SphereKind

    def __post_init__(self):
        a = linalg.as_vector(self.abs)
        if a.size != self.kind.dims:
            raise ValueError(f"expected {self.kind.dims} components, got {a.size}")
        if a.min() < 0.0 or abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("abs values must be non-negative and unit length")
        if not 0 <= self.sign_class < self.kind.sign_classes:
            raise ValueError(f"sign class {self.sign_class} out of range")
        object.__setattr__(self, "abs", a)


@dataclass
class LossValue:
    value: float
    grad_abs: np.ndarray | None = None
    grad_logits: np.ndarray | None = None


def encode_target(y, kind):
    """Split an on-sphere target into |y| and its sign class.

    Exact zeros count as positive (bit 0); the merge reconstructs them either
    way. Raises if the target is off-sphere or violates the kind's fixed-sign
    constraint.
    """
    y = linalg.as_vector(y)
    if y.size != kind.dims:
        raise ValueError(f"expected {kind.dims} components for {kind.value}, got {y.size}")
    if abs(np.linalg.norm(y) - 1.0) > SPHERE_TOL:
        raise ValueError("target is not unit length")
    fixed = kind.fixed_component
    if fixed is not None:
        idx, sign = fixed
        if y[idx] * sign < 0.0:
            raise ValueError(
                f"component {idx} must have sign {'+' if sign > 0 else '-'} for {kind.value}"
            )
    cls = 0
    for i in kind.free_indices:
        cls = (cls << 1) | (1 if y[i] < 0.0 else 0)
    return SphereTarget(np.abs(y), cls, kind)


def decode_signs(sign_class, kind):
    """Inverse of the bit rule: a +-1 vector over all components, with fixed
    components getting their constrained sign."""
    if not 0 <= sign_class < kind.sign_classes:
        raise ValueError(f"sign class {sign_class} out of range for {kind.value}")
    signs = np.ones(kind.dims)
    free = kind.free_indices
    for pos, i in enumerate(free):
        bit = (sign_class >> (len(free) - 1 - pos)) & 1
        signs[i] = -1.0 if bit else 1.0
    fixed = kind.fixed_component
    if fixed is not None:
        signs[fixed[0]] = fixed[1]
    return signs


def merge_prediction(abs_values, sign_class, kind):
    """Elementwise sign * abs: the final on-sphere prediction."""
    a = linalg.as_vector(abs_values)
    if a.size != kind.dims:
        raise ValueError(f"expected {kind.dims} components, got {a.size}")
    if a.min() < -SPHERE_TOL or abs(np.linalg.norm(a) - 1.0) > SPHERE_TOL:
        raise ValueError("abs values must be (near-)non-negative and unit length")
    return decode_signs(sign_class, kind) * a


def cosine_proximity_loss(pred, target):
    """L = -<pred, target>; gradient w.r.t. pred is -target.

    For unit inputs this equals the cosine proximity loss. Used on |P| vs |Y|
    in the sign-decomposed pipeline and on signed P vs Y in the plain
    normalized pipeline; the gradient is bounded by ||target|| = 1 either way.
    """
    pred = linalg.as_vector(pred)
    target = linalg.as_vector(target)
    if pred.size != target.size:
        raise ValueError(f"length mismatch: {pred.size} vs {target.size}")
    return LossValue(value=-float(pred @ target), grad_abs=-target.copy())


def l2_sphere_loss(pred, target):
    """L = ||pred - target||^2 = 2 - 2<pred, target> for unit inputs."""
    pred = linalg.as_vector(pred)
    target = linalg.as_vector(target)
    if pred.size != target.size:
        raise ValueError(f"length mismatch: {pred.size} vs {target.size}")
    d = pred - target
    return LossValue(value=float(d @ d), grad_abs=2.0 * d)


def xent_squares_loss(p, y):
    """Cross-entropy between the squared coordinates: sum_i y_i^2 log(1/p_i^2).

    Requires strictly positive p (guaranteed by the spherical exponential
    output); gradient w.r.t. p_i is -2 y_i^2 / p_i.
    """
    p = linalg.as_vector(p)
    y = linalg.as_vector(y)
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} vs {y.size}")
    if p.min() <= 0.0:
        raise ValueError("p must be strictly positive")
    y2 = y * y
    return LossValue(value=-2.0 * float(y2 @ np.log(p)), grad_abs=-2.0 * y2 / p)


def smooth_l1_loss(o, y):
    """Summed smooth-L1 between raw outputs and targets.

    Per component with d = y - o: 0.5 d^2 when |d| <= 1, else |d| - 0.5.
    Gradient w.r.t. o: -d in the quadratic branch, -sign(d) in the linear one.
    """
    o = linalg.as_vector(o)
    y = linalg.as_vector(y)
    if o.size != y.size:
        raise ValueError(f"length mismatch: {o.size} vs {y.size}")
    d = y - o
    quad = np.abs(d) <= 1.0
    value = float(np.sum(np.where(quad, 0.5 * d * d, np.abs(d) - 0.5)))
    grad = np.where(quad, -d, -np.sign(d))
    return LossValue(value=value, grad_abs=grad)


def sign_xent_loss(logits, sign_class):
    """Cross-entropy of the sign classifier: -log softmax(logits)[class];
    gradient w.r.t. logits is softmax(logits) - onehot(class)."""
    logits = linalg.as_vector(logits)
    if not 0 <= sign_class < logits.size:
        raise ValueError(f"class {sign_class} out of range for {logits.size} logits")
    m = logits.max()
    value = float(np.log(np.sum(np.exp(logits - m))) - (logits[sign_class] - m))
    grad = softmax_forward(logits)
    grad[sign_class] -= 1.0
    return LossValue(value=value, grad_logits=grad)


def joint_loss(abs_p, abs_y, logits, sign_class, weight=1.0):
    """Regression (cosine proximity on abs values) plus weight * sign cross-entropy."""
    if weight < 0.0:
        raise ValueError("sign-loss weight must be >= 0")
    reg = cosine_proximity_loss(abs_p, abs_y)
    sign = sign_xent_loss(logits, sign_class)
    return LossValue(
        value=reg.value + weight * sign.value,
        grad_abs=reg.grad_abs,
        grad_logits=weight * sign.grad_logits,
    )
