"""Kernel backend selection.

The Cython extension is used when it was built; otherwise, or when the
environment variable ``DTSCATTER_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used.
"""
import os

import numpy as np

from . import _pykernels

_force_pure = os.environ.get("DTSCATTER_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure-python backend requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

_active = "cython" if _ckernels is not None else "python"


def active_backend():
    return _active


def set_backend(name):
    """Switch the kernel backend process-wide; returns the previous name."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}")
    previous, _active = _active, name
    return previous


def reflect_indices(start, stop, n):
    """Half-sample symmetric indices for positions ``start..stop-1`` of a
    length-``n`` signal (edge samples repeated, period ``2n``)."""
    idx = np.arange(start, stop) % (2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def filter_rows(x, taps, origin, out_step, tap_step, n_out):
    """Strided FIR along axis 0 of a 2-D array with symmetric extension.

    ``out[k] = sum_d taps[d] * xe[origin + out_step*k - tap_step*d]`` where
    ``xe`` is ``x`` extended by half-sample reflection.
    """
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    lo = origin - tap_step * (len(taps) - 1)
    hi = origin + out_step * (n_out - 1) + 1
    z = np.ascontiguousarray(x[reflect_indices(lo, hi, x.shape[0])], dtype=np.float64)
    return BACKENDS[_active].polyphase_filter(z, taps, origin - lo, out_step, tap_step, n_out)
