"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting FRACSPHERE_PURE=1
forces the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("FRACSPHERE_PURE") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
advance_paths = _impl.advance_paths
legendre_table = _impl.legendre_table


def lm_index(l, m):
    """Column of (l, m>=0) in a legendre_table result."""
    return l * (l + 1) // 2 + m
