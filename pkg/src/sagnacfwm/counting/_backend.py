"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``SAGNACFWM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
deadtime_filter = _kernels_py.deadtime_filter
count_coincidences = _kernels_py.count_coincidences

if not os.environ.get("SAGNACFWM_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        deadtime_filter = _compiled.deadtime_filter
        count_coincidences = _compiled.count_coincidences
