"""Kernel backend selection.

The batch pipeline's hot kernels exist twice: a numba ``@njit`` version and a
pure-numpy fallback.  ``TREEOOD_BACKEND`` picks one:

* ``auto``  (default): numba when it imports, numpy otherwise
* ``numba``: require the JIT path, fail loudly if numba is missing
* ``numpy``: force the fallback (useful for debugging and benchmarking)

Both implementations are importable directly for side-by-side testing
regardless of the selected default.
"""

from __future__ import annotations

import os

from . import codes  # noqa: F401  (re-export)

_choice = os.environ.get("TREEOOD_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"TREEOOD_BACKEND={_choice!r} not recognized (use auto, numba, or numpy)")

if _choice in ("auto", "numba"):
    try:
        from . import numba_backend as _impl
        _name = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import numpy_backend as _impl
        _name = "numpy"
else:
    from . import numpy_backend as _impl
    _name = "numpy"

compute_conditionals = _impl.compute_conditionals
compute_leaf_masses = _impl.compute_leaf_masses
minexp_decisions = _impl.minexp_decisions


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return _name
