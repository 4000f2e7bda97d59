"""Backend selection for the term-map kernels.

The compiled extension is used when it imports cleanly; setting
``KINTRAJ_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

from kintraj import _pykernels

if os.environ.get("KINTRAJ_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from kintraj import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
poly_mul = _impl.poly_mul
poly_axpy = _impl.poly_axpy
expand_minors = _impl.expand_minors

__all__ = ["BACKEND", "poly_mul", "poly_axpy", "expand_minors", "available_backends"]


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    found = {"python": _pykernels}
    try:
        from kintraj import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
