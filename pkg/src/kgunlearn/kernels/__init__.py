"""Numeric kernels for scoring, ranking, and gradient accumulation.

The compiled extension is preferred when present; otherwise the numpy
fallback is used.  Both expose the same functions with identical semantics
(results agree to floating-point rounding; set ``KGUNLEARN_NO_EXT=1`` to
force the fallback).
"""

import os

from . import _fallback

try:  # pragma: no cover - exercised indirectly via BACKEND
    from . import _core
except ImportError:  # pragma: no cover
    _core = None

if _core is not None and not os.environ.get("KGUNLEARN_NO_EXT"):
    BACKEND = "compiled"
    _impl = _core
else:
    BACKEND = "numpy"
    _impl = _fallback

all_entity_distances = _impl.all_entity_distances
pair_distances = _impl.pair_distances
rank_counts = _impl.rank_counts
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "all_entity_distances",
    "pair_distances",
    "rank_counts",
    "scatter_add_rows",
]
