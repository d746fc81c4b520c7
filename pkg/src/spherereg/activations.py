"""Simplex- and sphere-valued activations with exact analytic Jacobians.

Jacobian convention used everywhere in this package: J[j, i] = d p_j / d o_i,
i.e. row index = output component, column index = input component. This
matches the column layout produced by ``linalg.fd_jacobian``.

The softmax and spherical-exponential Jacobians are functions of the output P
alone; the plain l2-normalization Jacobian also carries a 1/||O|| factor, so
its scale is tied to the raw input. That contrast is the whole point of the
spherical-exponential map: gradients pulled back through it stay bounded no
matter how large the raw embedding grows.
"""

from enum import Enum

import numpy as np

from . import linalg

# Tolerance for "is this really an activation output" checks on the
# Jacobian-from-P entry points: tight enough to catch wiring bugs, loose
# enough to accept accumulated rounding.
OFF_MANIFOLD_TOL = 1e-9


class ActivationKind(Enum):
    SOFTMAX = "softmax"
    SPHERICAL_FLAT = "flat"
    SPHERICAL_EXP = "sexp"


def softmax_forward(o):
    """exp(o_i) / sum_j exp(o_j); output on the probability simplex."""
    o = linalg.as_vector(o)
    z = np.exp(o - o.max())
    return z / z.sum()


def softmax_jacobian(p):
    """diag(p) - p p^T, expressed purely in the output p."""
    p = _check_simplex(p)
    return np.diag(p) - np.outer(p, p)


def softmax_xent_grad(p, y):
    """Gradient w.r.t. raw logits of cross-entropy after softmax: p - y."""
    p = linalg.as_vector(p)
    y = linalg.as_vector(y)
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} vs {y.size}")
    return p - y


def sflat_forward(o):
    """Plain l2 normalization onto the unit sphere."""
    return linalg.l2_normalize(o)


def sflat_jacobian(o):
    """(I - p p^T) / ||o|| with p = o/||o||; scales with the raw input norm."""
    o = linalg.as_vector(o)
    n = np.linalg.norm(o)
    if n < linalg.DEGENERATE_NORM:
        raise ValueError("l2-normalization Jacobian undefined at (near-)zero input")
    p = o / n
    return (np.eye(o.size) - np.outer(p, p)) / n


def sexp_forward(o):
    """Spherical exponential: exp(o_j) / sqrt(sum_k exp(2 o_k)).

    Maps any real vector onto the strictly positive part of the unit sphere.
    The max entry is subtracted before exponentiation; the map is invariant
    under adding a constant to all inputs, so this changes nothing but
    prevents overflow. (Entries further than ~745 below the max underflow to
    exactly zero in float64.)
    """
    o = linalg.as_vector(o)
    z = np.exp(o - o.max())
    return z / np.linalg.norm(z)


def sexp_jacobian(p):
    """(I - p p^T) diag(p): entry [j, i] is p_i(1 - p_i^2) on the diagonal and
    -p_i^2 p_j off it. Depends only on the output p, and every row is
    tangent to the sphere at p (p^T J = 0)."""
    p = _check_positive_sphere(p)
    return (np.eye(p.size) - np.outer(p, p)) * p


def grad_check(kind, o, eps=1e-5):
    """Max unit-floored relative error between the analytic Jacobian and the
    central-difference oracle at o. See linalg.max_rel_error for the metric."""
    forward, jac_of = _DISPATCH[ActivationKind(kind)]
    analytic = jac_of(o)
    fd = linalg.fd_jacobian(forward, o, eps)
    return linalg.max_rel_error(analytic, fd)


def _check_simplex(p):
    p = linalg.as_vector(p)
    if abs(p.sum() - 1.0) > OFF_MANIFOLD_TOL or p.min() < -OFF_MANIFOLD_TOL:
        raise ValueError("input is not on the probability simplex")
    return p


def _check_positive_sphere(p):
    p = linalg.as_vector(p)
    if abs(np.linalg.norm(p) - 1.0) > OFF_MANIFOLD_TOL:
        raise ValueError("input is not on the unit sphere")
    if p.min() <= 0.0:
        raise ValueError("input must be strictly positive")
    return p


_DISPATCH = {
    ActivationKind.SOFTMAX: (softmax_forward, lambda o: softmax_jacobian(softmax_forward(o))),
    ActivationKind.SPHERICAL_FLAT: (sflat_forward, sflat_jacobian),
    ActivationKind.SPHERICAL_EXP: (sexp_forward, lambda o: sexp_jacobian(sexp_forward(o))),
}
