"""Backend selection for the hot kernels.

The compiled extension is used when importable; ``FXPF_BACKEND=python`` forces
the numpy fallback and ``FXPF_BACKEND=cython`` makes a missing extension fatal.
"""

import os

from . import _kernels_py

_requested = os.environ.get("FXPF_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

ar_filter_rows = _impl.ar_filter_rows
ar_filter_bidirectional = _impl.ar_filter_bidirectional
accumulate_scatterers = _impl.accumulate_scatterers


def available_backends():
    """Map backend name -> kernel module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
