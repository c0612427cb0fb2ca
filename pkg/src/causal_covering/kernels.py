"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``CAUSAL_COVERING_PURE=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("CAUSAL_COVERING_PURE"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

sample_rows = _impl.sample_rows
run_plan = _impl.run_plan
