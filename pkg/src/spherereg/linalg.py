"""Dense float64 helpers, seeded randomness, and the finite-difference oracle.

Everything downstream validates its analytic derivatives against
``fd_jacobian``, so this module stays deliberately small and boring.
"""

import numpy as np

# Norms below this are treated as a degenerate direction rather than being
# silently normalized into overflow/NaN.
DEGENERATE_NORM = 1e-12


def as_vector(x):
    """Coerce to a finite 1-d float64 array (copying only if needed)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def dot(a, b):
    a = as_vector(a)
    b = as_vector(b)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(a @ b)


def outer(a, b):
    """M[i, j] = a_i * b_j."""
    return np.outer(as_vector(a), as_vector(b))


def l2_normalize(v):
    v = as_vector(v)
    n = np.linalg.norm(v)
    if n < DEGENERATE_NORM:
        raise ValueError("cannot normalize a (near-)zero vector: direction is undefined")
    return v / n


def make_rng(seed):
    """Counter-based generator: equal seeds give bitwise-equal streams on any platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


def fd_jacobian(f, x, eps=1e-5):
    """Central-difference Jacobian of a vector-to-vector map.

    Column i holds (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps), so the entry
    [j, i] approximates the derivative of output j w.r.t. input i.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_vector(x)
    cols = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        hi = np.asarray(f(x + step), dtype=np.float64)
        lo = np.asarray(f(x - step), dtype=np.float64)
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise ValueError(f"f returned non-finite values near x[{i}]")
        cols.append((hi - lo) / (2.0 * eps))
    return np.stack(cols, axis=1)


def fd_grad(f, x, eps=1e-5):
    """Central-difference gradient of a scalar-valued function."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_vector(x)
    g = np.empty(x.size)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        hi = float(f(x + step))
        lo = float(f(x - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"f returned non-finite values near x[{i}]")
        g[i] = (hi - lo) / (2.0 * eps)
    return g


def max_rel_error(a, b, floor=1.0):
    """Max elementwise |a - b| / max(|a|, |b|, floor).

    The unit floor makes the score an absolute error for entries below the
    floor and a relative error above it; without it, finite-difference noise
    on near-zero entries would dominate the comparison.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
