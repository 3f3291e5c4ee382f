"""Backend selection for the hot loops.

The compiled extension is used when importable; otherwise (or when
``SUBNAV_PURE_PYTHON=1``) the pure-Python twins run. Both produce identical
numbers for identical inputs.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SUBNAV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

ic_spreads = _impl.ic_spreads
rr_sets = _impl.rr_sets
greedy_max_coverage = _impl.greedy_max_coverage


def backends():
    """Return the available kernel implementations keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
