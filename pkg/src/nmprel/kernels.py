"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``NMP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("NMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

pair_features = _impl.pair_features
threshold_edges = _impl.threshold_edges
segment_sum = _impl.segment_sum
max_matching = _impl.max_matching

__all__ = ["BACKEND", "pair_features", "threshold_edges", "segment_sum", "max_matching"]
