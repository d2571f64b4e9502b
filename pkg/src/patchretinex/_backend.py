"""Kernel backend selection.

The compiled Cython module is used when it imports; otherwise the numpy
fallback is used. Set ``PATCHRETINEX_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("PATCHRETINEX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

correlate_rows = _impl.correlate_rows
correlate2d = _impl.correlate2d
walk_paths = _impl.walk_paths
path_retinex = _impl.path_retinex
