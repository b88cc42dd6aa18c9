"""Kernel backend selection.

The accelerated path compiles the model kernels with numba; the fallback is
vectorized numpy. Selection happens once at import time:

* `FEDIMB_NO_NUMBA` set to a non-empty value other than "0" forces numpy;
* otherwise numba is used when importable, numpy when not.

Both backends expose the same functions (logits, loss/grad, epoch training
for each model kind); see `_backend_numpy` for the contract. Within one
backend results are bit-reproducible; across backends they agree only to
floating-point reassociation (roughly 1e-12 relative on trained models).
"""
from __future__ import annotations

import os
from types import ModuleType


def _select() -> tuple[ModuleType, str]:
    flag = os.environ.get("FEDIMB_NO_NUMBA", "")
    if flag not in ("", "0"):
        from . import _backend_numpy

        return _backend_numpy, "numpy"
    try:
        from . import _backend_numba

        return _backend_numba, "numba"
    except ImportError:
        from . import _backend_numpy

        return _backend_numpy, "numpy"


_impl, BACKEND_NAME = _select()


def get_backend() -> ModuleType:
    """The active kernel module (chosen at import time)."""
    return _impl
