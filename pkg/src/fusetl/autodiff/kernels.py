"""Backend selection for the convolution inner loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is used.  Both produce identical bits, so the choice only affects
speed.  :func:`set_backend` switches explicitly (benchmarks, tests).
"""

import numpy as np

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ("cython", "python") if _ckernels is not None else ("python",)

_active = _ckernels if _ckernels is not None else _kernels_py


def backend():
    return "cython" if _active is _ckernels else "python"


def set_backend(name):
    global _active
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available; reinstall with Cython present")
        _active = _ckernels
    elif name == "python":
        _active = _kernels_py
    else:
        raise ValueError(f"unknown backend {name!r}")


def im2col(xp, k, stride, oh, ow):
    return _active.im2col(np.ascontiguousarray(xp), k, stride, oh, ow)


def col2im(cols, hp, wp, stride):
    return _active.col2im(np.ascontiguousarray(cols), hp, wp, stride)
