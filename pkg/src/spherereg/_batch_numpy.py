"""Pure-numpy implementation of the batched training kernels.

All functions take C-contiguous float64 arrays with one sample per row and
mirror the compiled versions in ``_batchkern.pyx`` exactly; ``backend`` picks
one implementation at import time.
"""

import numpy as np

DEGENERATE_NORM = 1e-12


def affine_fwd(x, w, b):
    """(n, din) @ (dout, din)^T + (dout,) -> (n, dout)."""
    return x @ w.T + b


def affine_bwd(x, w, gz):
    """Per-sample input gradients plus summed parameter gradients.

    Returns (gx, gw, gb) with gx[i] = gz[i] @ w, gw = gz^T x, gb = sum_i gz[i].
    """
    return gz @ w, gz.T @ x, gz.sum(axis=0)


def relu_fwd(z):
    return np.maximum(z, 0.0)


def relu_bwd(z, ga):
    return np.where(z > 0.0, ga, 0.0)


def softmax_rows(o):
    z = np.exp(o - o.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def softmax_bwd_rows(p, gp):
    return p * (gp - np.sum(p * gp, axis=1, keepdims=True))


def sexp_rows(o):
    z = np.exp(o - o.max(axis=1, keepdims=True))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sexp_bwd_rows(p, gp):
    return p * gp - (p * p) * np.sum(p * gp, axis=1, keepdims=True)


def sflat_rows(o):
    norms = np.linalg.norm(o, axis=1)
    if norms.min() < DEGENERATE_NORM:
        raise ValueError("cannot l2-normalize a (near-)zero row")
    return o / norms[:, None], norms


def sflat_bwd_rows(p, norms, gp):
    return (gp - p * np.sum(p * gp, axis=1, keepdims=True)) / norms[:, None]
