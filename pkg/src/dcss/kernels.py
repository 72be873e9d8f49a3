"""Backend selection for the batched consensus kernel.

The compiled extension is used when importable; set ``DCSS_PURE_PYTHON=1``
to force the NumPy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DCSS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
consensus_batch = _impl.consensus_batch
spread_db = _kernels_py.spread_db


def available_backends() -> dict:
    out = {"python": _kernels_py}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
