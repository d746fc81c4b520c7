"""Kernel backend selection.

The compiled Cython core is used when the extension built; otherwise the
numpy implementation takes over with identical semantics. Set
SPHEREREG_BACKEND=numpy to force the fallback, or =cython to require the
compiled core (raising if it is missing).

Within one backend, results are bitwise reproducible run to run. Across
backends they agree only to rounding (different summation orders), so
bit-exact reproducibility requires sticking to one backend.
"""

import os

from . import _batch_numpy

_KERNELS = (
    "affine_fwd",
    "affine_bwd",
    "relu_fwd",
    "relu_bwd",
    "softmax_rows",
    "softmax_bwd_rows",
    "sexp_rows",
    "sexp_bwd_rows",
    "sflat_rows",
    "sflat_bwd_rows",
)

try:
    from . import _batchkern as _compiled
except ImportError:
    _compiled = None

BACKEND = None


def available_backends():
    names = ["numpy"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def use(name):
    """Switch the active kernel set. Mainly for tests and benchmarks."""
    global BACKEND
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel extension is not available")
        impl = _compiled
    elif name == "numpy":
        impl = _batch_numpy
    else:
        raise ValueError(f"unknown backend {name!r} (expected 'cython' or 'numpy')")
    for fn in _KERNELS:
        globals()[fn] = getattr(impl, fn)
    BACKEND = name
    return name


_requested = os.environ.get("SPHEREREG_BACKEND", "").strip().lower()
if _requested and _requested not in ("cython", "numpy"):
    raise ValueError(f"SPHEREREG_BACKEND={_requested!r} not recognized (use 'cython' or 'numpy')")
use(_requested or ("cython" if _compiled is not None else "numpy"))
