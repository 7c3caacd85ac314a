"""Selects the compiled kernel module when available, otherwise the numpy fallback.

Set RIFFLE_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("RIFFLE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

lehmer_index_batch = _impl.lehmer_index_batch
triplet_counts = _impl.triplet_counts
