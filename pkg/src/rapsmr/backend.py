"""Kernel backend selection.

``RAPS_NUMBA`` picks the implementation of the numeric inner loops:

  * unset or ``auto``: numba if it imports, else pure numpy
  * ``1`` / ``on`` / ``numba``: numba, raising if unavailable
  * ``0`` / ``off`` / ``numpy``: pure numpy

The active module is exposed as ``kernels``; ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

from . import _kernels_numpy

_FLAG = os.environ.get("RAPS_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "off", "false", "numpy"):
    kernels = _kernels_numpy
    BACKEND = "numpy"
elif _FLAG in ("1", "on", "true", "numba"):
    from . import _kernels_numba

    kernels = _kernels_numba
    BACKEND = "numba"
else:
    try:
        from . import _kernels_numba

        kernels = _kernels_numba
        BACKEND = "numba"
    except ImportError:
        kernels = _kernels_numpy
        BACKEND = "numpy"
