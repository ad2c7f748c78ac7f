"""Kernel backend selection.

``NNLD_BACKEND=numpy`` forces the pure-numpy kernels; otherwise the numba
kernels are used when numba imports cleanly.
"""

import logging
import os

from . import _kernels_numpy

log = logging.getLogger(__name__)


def _select():
    want = os.environ.get("NNLD_BACKEND", "numba").strip().lower()
    if want == "numpy":
        return _kernels_numpy
    if want != "numba":
        raise ValueError(f"NNLD_BACKEND must be 'numba' or 'numpy', got {want!r}")
    try:
        from . import _kernels_numba
    except ImportError:  # pragma: no cover
        log.warning("numba unavailable, falling back to numpy kernels")
        return _kernels_numpy
    return _kernels_numba


kernels = _select()
