"""Kernel dispatch: the compiled extension when it was built, numpy otherwise.

``BACKEND`` names the active implementation. ``use_backend`` switches at
runtime (tests and the benchmark use it to compare both).
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_IMPLS = {"python": _pykernels}
if _ckernels is not None:
    _IMPLS["cython"] = _ckernels

BACKEND = "cython" if _ckernels is not None else "python"
_active = _IMPLS[BACKEND]


def available_backends():
    return sorted(_IMPLS)


def use_backend(name):
    """Select ``"cython"`` or ``"python"``; returns the previous backend name."""
    global BACKEND, _active
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    previous = BACKEND
    BACKEND, _active = name, _IMPLS[name]
    return previous


def segment_stats(values, bins, row_edges, col_edges, nbins):
    return _active.segment_stats(values, bins, row_edges, col_edges, nbins)


def idt_windows(t, x, y, dispersion, min_duration):
    return _active.idt_windows(t, x, y, dispersion, min_duration)
