"""Backend selection for the hot kernels.

The compiled extension is used when it imported cleanly; setting
``CAPINFER_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

from . import _purekernels as pure

compiled = None
if not os.environ.get("CAPINFER_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else pure
BACKEND = "cython" if compiled is not None else "python"

tokenize = _impl.tokenize
printable_runs = _impl.printable_runs
terms_from_bytes = _impl.terms_from_bytes
noisy_or = _impl.noisy_or

__all__ = [
    "BACKEND",
    "compiled",
    "pure",
    "tokenize",
    "printable_runs",
    "terms_from_bytes",
    "noisy_or",
]
