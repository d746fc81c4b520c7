"""The analytic-vs-finite-difference verification suite.

Every analytic Jacobian and gradient in the package is compared against the
central-difference oracle on seeded random draws. Draws are kept inside the
oracle's validity region: away from the smooth-L1 kink, away from
(near-)zero norms for the plain-normalization map, and away from vanishing
outputs for the log-based loss, where the finite-difference truncation error
itself (third derivative times eps^2) would exceed the tolerance.

Errors are unit-floored relative errors (see linalg.max_rel_error): relative
for entries above 1, absolute below.
"""

from dataclasses import dataclass

import numpy as np

from . import heads, linalg, network
from .activations import ActivationKind, grad_check
from .heads import SphereKind

JACOBIAN_TOL = 1e-6
LOSS_TOL = 1e-6
MODEL_TOL = 1e-5

MODEL_COMBOS = (
    ("direct", "smoothl1"),
    ("flat", "cosine"),
    ("flat", "l2"),
    ("sexp", "cosine"),
    ("sexp", "l2"),
    ("sexp", "xent2"),
)

_ACTIVATION_OF = {
    "direct": None,
    "flat": ActivationKind.SPHERICAL_FLAT,
    "sexp": ActivationKind.SPHERICAL_EXP,
}


@dataclass
class CheckResult:
    name: str
    max_err: float
    tol: float
    draws: int

    @property
    def passed(self):
        return self.max_err < self.tol


def _random_dim(rng, lo=2, hi=16):
    return int(rng.integers(lo, hi + 1))


def _random_embedding(rng, kind, min_norm=0.0):
    while True:
        o = 1.5 * rng.normal(size=_random_dim(rng))
        if np.linalg.norm(o) >= min_norm:
            return o


def check_activation(kind, trials, eps, rng):
    kind = ActivationKind(kind)
    min_norm = 0.01 if kind is ActivationKind.SPHERICAL_FLAT else 0.0
    worst = 0.0
    for _ in range(trials):
        o = _random_embedding(rng, kind, min_norm=min_norm)
        worst = max(worst, grad_check(kind, o, eps))
    return CheckResult(f"{kind.value} jacobian", worst, JACOBIAN_TOL, trials)


def _positive_unit(rng, dim, offset=0.3):
    v = np.abs(rng.normal(size=dim)) + offset
    return v / np.linalg.norm(v)


def _signed_unit(rng, dim):
    while True:
        v = rng.normal(size=dim)
        n = np.linalg.norm(v)
        if n >= linalg.DEGENERATE_NORM:
            return v / n


def check_loss(name, trials, eps, rng):
    worst = 0.0
    for _ in range(trials):
        dim = _random_dim(rng)
        if name == "cosine":
            pred, target = _positive_unit(rng, dim), _positive_unit(rng, dim)
            analytic = heads.cosine_proximity_loss(pred, target).grad_abs
            fd = linalg.fd_grad(lambda p: heads.cosine_proximity_loss(p, target).value, pred, eps)
        elif name == "l2":
            pred, target = _positive_unit(rng, dim), _positive_unit(rng, dim)
            analytic = heads.l2_sphere_loss(pred, target).grad_abs
            fd = linalg.fd_grad(lambda p: heads.l2_sphere_loss(p, target).value, pred, eps)
        elif name == "xent2":
            pred, target = _positive_unit(rng, dim), _signed_unit(rng, dim)
            analytic = heads.xent_squares_loss(pred, target).grad_abs
            fd = linalg.fd_grad(lambda p: heads.xent_squares_loss(p, target).value, pred, eps)
        elif name == "smoothl1":
            pred, target = _smooth_l1_pair(rng, dim)
            analytic = heads.smooth_l1_loss(pred, target).grad_abs
            fd = linalg.fd_grad(lambda o: heads.smooth_l1_loss(o, target).value, pred, eps)
        elif name == "sign_xent":
            logits = 2.0 * rng.normal(size=dim)
            cls = int(rng.integers(dim))
            analytic = heads.sign_xent_loss(logits, cls).grad_logits
            fd = linalg.fd_grad(lambda l: heads.sign_xent_loss(l, cls).value, logits, eps)
        else:
            raise ValueError(f"unknown loss check {name!r}")
        worst = max(worst, linalg.max_rel_error(analytic, fd))
    return CheckResult(f"{name} gradient", worst, LOSS_TOL, trials)


def _smooth_l1_pair(rng, dim):
    # keep every component at least 1e-3 away from the |y - o| = 1 kink,
    # where central differences straddle the branch switch
    while True:
        pred = 1.5 * rng.normal(size=dim)
        target = 1.5 * rng.normal(size=dim)
        if np.min(np.abs(np.abs(target - pred) - 1.0)) > 1e-3:
            return pred, target


_KINDS = (SphereKind.S1, SphereKind.S2, SphereKind.S3)


def _model_draw(rng, head, loss):
    """A small random model plus a 2-sample batch inside the FD validity region."""
    kind = _KINDS[int(rng.integers(len(_KINDS)))]
    while True:
        model = network.MlpModel.build(rng, 4, kind, _ACTIVATION_OF[head], hidden=(6,))
        x = np.ascontiguousarray(rng.normal(size=(2, 4)))
        raw = np.stack([_on_sphere_target(rng, kind) for _ in range(2)])
        targets = [heads.encode_target(y, kind) for y in raw]
        batch = (
            raw,
            np.stack([t.abs for t in targets]),
            np.array([t.sign_class for t in targets], dtype=np.intp),
        )
        o, p, _ = model.forward(x)
        if head == "flat" and np.min(np.linalg.norm(o, axis=1)) < 0.05:
            continue
        if loss == "xent2" and p.min() < 0.02:
            continue
        if loss == "smoothl1" and np.min(np.abs(np.abs(raw - p) - 1.0)) < 1e-3:
            continue
        return model, x, batch


def _on_sphere_target(rng, kind):
    v = _signed_unit(rng, kind.dims)
    fixed = kind.fixed_component
    if fixed is not None:
        idx, sign = fixed
        v[idx] = sign * abs(v[idx])
        n = np.linalg.norm(v)
        v = v / n
    return v


def check_full_model(head, loss, trials, eps, rng):
    worst = 0.0
    for _ in range(trials):
        model, x, batch = _model_draw(rng, head, loss)
        worst = max(worst, network.param_grad_check(model, x, batch, loss, 1.0, eps))
    return CheckResult(f"mlp {head}+{loss}", worst, MODEL_TOL, trials)


def run_all(trials=1000, eps=1e-5, seed=20240901):
    """Every analytic-vs-FD check in the package; returns a list of CheckResult."""
    rng = linalg.make_rng(seed)
    results = []
    for kind in ActivationKind:
        results.append(check_activation(kind, trials, eps, rng))
    for loss in ("cosine", "l2", "xent2", "smoothl1", "sign_xent"):
        results.append(check_loss(loss, trials, eps, rng))
    per_combo = max(1, -(-trials // len(MODEL_COMBOS)))
    for head, loss in MODEL_COMBOS:
        results.append(check_full_model(head, loss, per_combo, eps, rng))
    return results
