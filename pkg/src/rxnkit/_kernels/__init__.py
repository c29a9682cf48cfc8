"""Numeric kernels with a numba fast path and a pure-numpy fallback.

The numba implementations are used by default. Set ``RXNKIT_NUMBA=0`` in the
environment (before import) to force the numpy fallback; the fallback is also
selected automatically when numba is not importable.
"""

import os

__all__ = [
    "BACKEND",
    "levenshtein_codes",
    "iou_matrix",
    "max_bipartite_matching",
    "spiral_first_fit",
]


def _numba_disabled() -> bool:
    return os.environ.get("RXNKIT_NUMBA", "1").lower() in ("0", "false", "off")


if _numba_disabled():
    BACKEND = "numpy"
else:
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"

if BACKEND == "numba":
    from .numba_impl import (  # noqa: F401
        iou_matrix,
        levenshtein_codes,
        max_bipartite_matching,
        spiral_first_fit,
    )
else:
    from .numpy_impl import (  # noqa: F401
        iou_matrix,
        levenshtein_codes,
        max_bipartite_matching,
        spiral_first_fit,
    )
