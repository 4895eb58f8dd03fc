"""Select the compiled kernels if they were built, else the NumPy fallback.

Set ``TWOHESSIAN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

_NAMES = ("monotone_eval", "naive_s2", "jacobi_sweep")

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TWOHESSIAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

monotone_eval = _impl.monotone_eval
naive_s2 = _impl.naive_s2
jacobi_sweep = _impl.jacobi_sweep


def get_backend(name: str):
    """Return the kernel module of a named backend ('python' or 'cython').

    The module exposes ``monotone_eval``, ``naive_s2`` and ``jacobi_sweep``.
    """
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
