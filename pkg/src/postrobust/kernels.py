"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
reference is used.  ``POSTROBUST_BACKEND=python`` forces the fallback and
``POSTROBUST_BACKEND=cython`` makes a missing extension an import error.

In automatic mode ``loglik_grid`` stays on NumPy even when the extension is
present: its vectorised ``log1p`` beats the scalar C loop on grid-sized
inputs (see ``benchmarks/bench_kernels.py``).  The MCMC kernels are scalar
and gain most from compilation.
"""

import os

from . import _pykernels

_requested = os.environ.get("POSTROBUST_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"

loglik_grid = _impl.loglik_grid if _requested == "cython" else _pykernels.loglik_grid
log_target = _impl.log_target
rwm = _impl.rwm

COEF_PER_COORDINATE = _pykernels.COEF_PER_COORDINATE
COEF_MULTIVARIATE = _pykernels.COEF_MULTIVARIATE
SCALE_HALF_CAUCHY = _pykernels.SCALE_HALF_CAUCHY
SCALE_INVERSE_GAMMA = _pykernels.SCALE_INVERSE_GAMMA
SCALE_LOG_NORMAL = _pykernels.SCALE_LOG_NORMAL


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"cython"`` explicitly."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
