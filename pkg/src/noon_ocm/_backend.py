"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``NOON_OCM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if not os.environ.get("NOON_OCM_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "kernels"]
