"""Kernel backend selection.

Imports the compiled Cython extension when present, otherwise the
pure-numpy fallback.  Set HYPFIELD_PURE=1 to force the fallback (used by
the benchmark and the backend-equivalence tests).
"""

import os

from . import pyfallback

if os.environ.get("HYPFIELD_PURE"):
    _impl = pyfallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pyfallback

BACKEND = _impl.BACKEND
hyp2f1_series = _impl.hyp2f1_series
gplus_array = _impl.gplus_array
image_sum_block = _impl.image_sum_block
image_sum_self = _impl.image_sum_self


def get_backend(name=None):
    """Return a kernel module by name ('compiled', 'python', or None for active)."""
    if name is None:
        return _impl
    if name == "python":
        return pyfallback
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
