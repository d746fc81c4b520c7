"""Two-branch fully connected network with manual backpropagation.

A shared ReLU trunk feeds a regression head producing the raw embedding O
(optionally pushed through an activation to give P) and a sign-classification
head producing logits. Gradients flow back through the activation's exact
Jacobian; no autodiff anywhere.

Batch semantics: the batch loss is the mean of per-sample losses, so the
learning rate is independent of batch size. Telemetry records the mean over
the batch of the per-sample gradient norms at O.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend, linalg
from .activations import ActivationKind
from .heads import SphereKind

CHECKPOINT_FORMAT = "spherereg-ckpt-1"

REGRESSION_LOSSES = ("cosine", "l2", "xent2", "smoothl1")


class TrainingDiverged(RuntimeError):
    """Raised when a batch produces a non-finite loss or gradient."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainRecord:
    epoch: int
    batch: int
    loss: float
    grad_O_norm: float


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    lr: float
    seed: int
    loss: str = "cosine"
    sign_loss_weight: float = 1.0

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.loss not in REGRESSION_LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.sign_loss_weight < 0.0:
            raise ValueError("sign-loss weight must be >= 0")


@dataclass
class TrainData:
    """Training arrays: features plus both target encodings.

    ``raw`` holds the signed on-sphere targets (used by the direct and flat
    modes), ``abs_values`` / ``sign_classes`` the decomposed form (used by the
    sign-classified spherical-exponential mode).
    """

    features: np.ndarray
    raw: np.ndarray
    abs_values: np.ndarray
    sign_classes: np.ndarray

    def __len__(self):
        return self.features.shape[0]


class DenseLayer:
    def __init__(self, w, b):
        self.w = np.ascontiguousarray(w, dtype=np.float64)
        self.b = np.ascontiguousarray(b, dtype=np.float64)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ValueError("weight must be (out, in) with matching bias length")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.b))):
            raise ValueError("layer parameters must be finite")
        self._x = None

    @classmethod
    def init(cls, rng, fan_in, fan_out):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        return cls(w, np.zeros(fan_out))

    def forward(self, x):
        self._x = x
        return backend.affine_fwd(x, self.w, self.b)

    def backward(self, gz):
        """Returns (per-sample input grads, summed weight grads, summed bias grads)."""
        if self._x is None:
            raise RuntimeError("backward called before forward")
        return backend.affine_bwd(self._x, self.w, gz)


class MlpModel:
    def __init__(self, trunk, reg_head, sign_head, activation, kind):
        self.trunk = list(trunk)
        self.reg_head = reg_head
        self.sign_head = sign_head
        self.activation = None if activation is None else ActivationKind(activation)
        self.kind = SphereKind(kind)
        if reg_head.w.shape[0] != self.kind.dims:
            raise ValueError("regression head width must equal the sphere dimension count")
        if sign_head.w.shape[0] != self.kind.sign_classes:
            raise ValueError("sign head width must equal the sign-class count")
        self._cache = None

    @classmethod
    def build(cls, rng, in_dim, kind, activation, hidden=(64, 64, 32)):
        kind = SphereKind(kind)
        trunk = []
        width = in_dim
        for h in hidden:
            trunk.append(DenseLayer.init(rng, width, h))
            width = h
        reg_head = DenseLayer.init(rng, width, kind.dims)
        sign_head = DenseLayer.init(rng, width, kind.sign_classes)
        return cls(trunk, reg_head, sign_head, activation, kind)

    def parameters(self):
        out = []
        for i, layer in enumerate(self.trunk):
            out.append((f"trunk{i}.W", layer.w))
            out.append((f"trunk{i}.b", layer.b))
        out.append(("reg_head.W", self.reg_head.w))
        out.append(("reg_head.b", self.reg_head.b))
        out.append(("sign_head.W", self.sign_head.w))
        out.append(("sign_head.b", self.sign_head.b))
        return out

    def num_parameters(self):
        return sum(arr.size for _, arr in self.parameters())

    def forward(self, x):
        """Returns (O, P, logits). Accepts a single sample or a batch; the
        output arrays mirror the input's dimensionality."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        pre_acts = []
        h = x
        for layer in self.trunk:
            z = layer.forward(h)
            pre_acts.append(z)
            h = backend.relu_fwd(z)
        o = self.reg_head.forward(h)
        logits = self.sign_head.forward(h)
        norms = None
        if self.activation is None:
            p = o
        elif self.activation is ActivationKind.SOFTMAX:
            p = backend.softmax_rows(o)
        elif self.activation is ActivationKind.SPHERICAL_FLAT:
            p, norms = backend.sflat_rows(o)
        else:
            p = backend.sexp_rows(o)
        self._cache = {"pre_acts": pre_acts, "p": p, "norms": norms, "single": single}
        if single:
            return o[0], p[0], logits[0]
        return o, p, logits

    def backward(self, grad_p, grad_logits=None):
        """Backpropagate per-sample loss gradients.

        ``grad_p`` holds dL_s/dP_s rows (dL_s/dO_s directly when there is no
        activation); ``grad_logits`` the sign-branch rows, or None when the
        sign branch carries no loss. Returns (grads, grad_o) where grads maps
        parameter names to batch-mean gradients and grad_o holds the
        per-sample rows of dL_s/dO_s.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        cache = self._cache
        grad_p = np.ascontiguousarray(grad_p, dtype=np.float64)
        if cache["single"]:
            grad_p = grad_p[None, :]
            if grad_logits is not None:
                grad_logits = np.ascontiguousarray(grad_logits, dtype=np.float64)[None, :]
        elif grad_logits is not None:
            grad_logits = np.ascontiguousarray(grad_logits, dtype=np.float64)

        if self.activation is None:
            grad_o = grad_p
        elif self.activation is ActivationKind.SOFTMAX:
            grad_o = backend.softmax_bwd_rows(cache["p"], grad_p)
        elif self.activation is ActivationKind.SPHERICAL_FLAT:
            grad_o = backend.sflat_bwd_rows(cache["p"], cache["norms"], grad_p)
        else:
            grad_o = backend.sexp_bwd_rows(cache["p"], grad_p)

        n = grad_o.shape[0]
        grads = {}
        gfeat, gw, gb = self.reg_head.backward(grad_o)
        grads["reg_head.W"] = gw / n
        grads["reg_head.b"] = gb / n
        if grad_logits is not None:
            gfeat_s, gw_s, gb_s = self.sign_head.backward(grad_logits)
            gfeat = gfeat + gfeat_s
            grads["sign_head.W"] = gw_s / n
            grads["sign_head.b"] = gb_s / n
        else:
            grads["sign_head.W"] = np.zeros_like(self.sign_head.w)
            grads["sign_head.b"] = np.zeros_like(self.sign_head.b)
        ga = gfeat
        for i in range(len(self.trunk) - 1, -1, -1):
            gz = backend.relu_bwd(cache["pre_acts"][i], ga)
            ga, gw, gb = self.trunk[i].backward(gz)
            grads[f"trunk{i}.W"] = gw / n
            grads[f"trunk{i}.b"] = gb / n
        if cache["single"]:
            return grads, grad_o[0]
        return grads, grad_o


def sgd_step(model, grads, lr):
    """theta <- theta - lr * grad, in place. Aborts on non-finite gradients,
    naming the offending parameter."""
    if lr < 0.0:
        raise ValueError("learning rate must be >= 0")
    for name, param in model.parameters():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient in {name}")
        param -= lr * g
    return model


def _regression_loss_rows(loss, p, target):
    """Per-sample loss values and gradient rows for a batched prediction."""
    if loss == "cosine":
        return -np.sum(p * target, axis=1), -target
    if loss == "l2":
        d = p - target
        return np.sum(d * d, axis=1), 2.0 * d
    if loss == "xent2":
        if p.min() <= 0.0:
            raise ValueError("cross-entropy-on-squares requires strictly positive predictions")
        y2 = target * target
        return -2.0 * np.sum(y2 * np.log(p), axis=1), -2.0 * y2 / p
    if loss == "smoothl1":
        d = target - p
        quad = np.abs(d) <= 1.0
        vals = np.sum(np.where(quad, 0.5 * d * d, np.abs(d) - 0.5), axis=1)
        return vals, np.where(quad, -d, -np.sign(d))
    raise ValueError(f"unknown loss {loss!r}")


def _sign_loss_rows(logits, classes):
    """Per-sample cross-entropy and gradient rows for the sign classifier."""
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.sum(np.exp(logits - m), axis=1))
    idx = np.arange(logits.shape[0])
    vals = lse - logits[idx, classes]
    grad = backend.softmax_rows(logits)
    grad[idx, classes] -= 1.0
    return vals, grad


def batch_loss_and_grads(model, x, data_slice, loss, sign_loss_weight):
    """One forward/backward pass over a batch.

    Returns (mean loss, parameter grads, per-sample grad rows at O). In the
    sign-decomposed mode (spherical-exponential activation) the loss is the
    regression loss on absolute values plus the weighted sign cross-entropy;
    the other modes regress the signed targets directly and leave the sign
    head untouched.
    """
    raw, abs_values, classes = data_slice
    _, p, logits = model.forward(x)
    if model.activation is ActivationKind.SPHERICAL_EXP:
        vals, grad_p = _regression_loss_rows(loss, p, abs_values)
        sign_vals, grad_logits = _sign_loss_rows(logits, classes)
        vals = vals + sign_loss_weight * sign_vals
        grad_logits = sign_loss_weight * grad_logits
    else:
        vals, grad_p = _regression_loss_rows(loss, p, raw)
        grad_logits = None
    grads, grad_o = model.backward(grad_p, grad_logits)
    return float(np.mean(vals)), grads, grad_o


def batch_loss_value(model, x, data_slice, loss, sign_loss_weight):
    """Loss evaluation only; used by the finite-difference parameter check."""
    raw, abs_values, classes = data_slice
    _, p, logits = model.forward(x)
    if model.activation is ActivationKind.SPHERICAL_EXP:
        vals, _ = _regression_loss_rows(loss, p, abs_values)
        sign_vals, _ = _sign_loss_rows(logits, classes)
        vals = vals + sign_loss_weight * sign_vals
    else:
        vals, _ = _regression_loss_rows(loss, p, raw)
    return float(np.mean(vals))


def _check_mode(model, loss):
    if model.activation is ActivationKind.SOFTMAX:
        raise ValueError("training supports the direct, flat, and sexp modes only")
    if loss == "smoothl1" and model.activation is not None:
        raise ValueError("smooth-L1 regresses raw embeddings: use it without an activation")
    if loss == "xent2" and model.activation is not ActivationKind.SPHERICAL_EXP:
        raise ValueError("cross-entropy-on-squares needs strictly positive outputs (sexp)")


def train(model, data, cfg):
    """SGD over shuffled minibatches; one TrainRecord per batch.

    Deterministic given (initial model, data order, cfg.seed). A non-finite
    loss aborts immediately with the offending epoch and batch index.
    """
    cfg.validate()
    _check_mode(model, cfg.loss)
    n = len(data)
    rng = linalg.make_rng(cfg.seed)
    records = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            x = np.ascontiguousarray(data.features[idx])
            batch = (data.raw[idx], data.abs_values[idx], data.sign_classes[idx])
            loss, grads, grad_o = batch_loss_and_grads(
                model, x, batch, cfg.loss, cfg.sign_loss_weight
            )
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {bi}", epoch=epoch, batch=bi
                )
            gnorm = float(np.mean(np.linalg.norm(grad_o, axis=1)))
            records.append(TrainRecord(epoch=epoch, batch=bi, loss=loss, grad_O_norm=gnorm))
            try:
                sgd_step(model, grads, cfg.lr)
            except TrainingDiverged as exc:
                raise TrainingDiverged(
                    f"{exc} at epoch {epoch}, batch {bi}", epoch=epoch, batch=bi
                ) from None
    return model, records


def param_grad_check(model, x, data_slice, loss, sign_loss_weight, eps=1e-5):
    """Max unit-floored relative error between analytic parameter gradients
    and central finite differences, over every parameter entry."""
    _, grads, _ = batch_loss_and_grads(model, x, data_slice, loss, sign_loss_weight)
    worst = 0.0
    for name, param in model.parameters():
        analytic = grads[name]
        flat = param.reshape(-1)
        fd = np.empty(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = batch_loss_value(model, x, data_slice, loss, sign_loss_weight)
            flat[i] = orig - eps
            lo = batch_loss_value(model, x, data_slice, loss, sign_loss_weight)
            flat[i] = orig
            fd[i] = (hi - lo) / (2.0 * eps)
        worst = max(worst, linalg.max_rel_error(analytic.reshape(-1), fd))
    return worst


def save_model(path, model):
    """Checkpoint: npz holding every named parameter plus format metadata.
    Documented in the README (format `spherereg-ckpt-1`)."""
    arrays = {name: arr for name, arr in model.parameters()}
    np.savez(
        path,
        __format__=np.str_(CHECKPOINT_FORMAT),
        __activation__=np.str_(model.activation.value if model.activation else "none"),
        __kind__=np.str_(model.kind.value),
        __trunk_layers__=np.int64(len(model.trunk)),
        **arrays,
    )


def load_model(path):
    with np.load(path) as blob:
        if str(blob["__format__"]) != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {blob['__format__']!r}")
        activation = str(blob["__activation__"])
        kind = SphereKind(str(blob["__kind__"]))
        n_trunk = int(blob["__trunk_layers__"])
        trunk = [DenseLayer(blob[f"trunk{i}.W"], blob[f"trunk{i}.b"]) for i in range(n_trunk)]
        reg_head = DenseLayer(blob["reg_head.W"], blob["reg_head.b"])
        sign_head = DenseLayer(blob["sign_head.W"], blob["sign_head.b"])
    return MlpModel(
        trunk,
        reg_head,
        sign_head,
        None if activation == "none" else ActivationKind(activation),
        kind,
    )
