"""One-dimensional filtering stages of the dual-tree transform.

All functions work along one axis of an n-d float64 array and use
half-sample symmetric extension at the borders.  Level 1 filtering is
undecimated (odd-length filters); levels >= 2 operate on the interleaved
composite of the two trees, tree a on even and tree b on odd samples.
"""
import numpy as np

from .._backend import filter_rows
from ..errors import ShapeError


def _along(x, axis, fn):
    moved = np.moveaxis(np.asarray(x, dtype=np.float64), axis, 0)
    rest = moved.shape[1:]
    out = fn(moved.reshape(moved.shape[0], -1))
    return np.moveaxis(out.reshape((out.shape[0],) + rest), 0, axis)


def colfilter(x, h, axis=0):
    """Undecimated filtering with an odd-length filter; output aligned with
    input, same length."""
    h = np.asarray(h, dtype=np.float64)
    if len(h) % 2 != 1:
        raise ShapeError("colfilter needs an odd-length filter")
    centre = len(h) // 2

    def fn(x2):
        return filter_rows(x2, h, centre, 1, 1, x2.shape[0])

    return _along(x, axis, fn)


def _order_sign(ha, hb):
    return float(np.dot(ha, hb)) > 0


def coldfilt(x, ha, hb, axis=0):
    """Decimate the interleaved two-tree signal by 2.

    ``ha`` filters the even samples (tree a), ``hb`` the odd samples
    (tree b); ``ya[k] = sum_i ha[i] x[4k + m - 2i]`` and
    ``yb[k] = sum_i hb[i] x[4k + m + 1 - 2i]``.  The outputs are
    re-interleaved ``ya, yb`` when ``ha . hb > 0`` and ``yb, ya`` otherwise,
    which keeps the composite half-sample symmetric across the boundary.
    """
    ha = np.asarray(ha, dtype=np.float64)
    hb = np.asarray(hb, dtype=np.float64)
    m = len(ha)
    if len(hb) != m or m % 2:
        raise ShapeError("q-shift filters must have equal even lengths")
    n = np.shape(x)[axis]
    if n % 4:
        raise ShapeError(f"coldfilt needs a length divisible by 4, got {n}")
    first, second = (0, 1) if _order_sign(ha, hb) else (1, 0)

    def fn(x2):
        r = x2.shape[0]
        y = np.empty((r // 2, x2.shape[1]))
        y[first::2] = filter_rows(x2, ha, m, 4, 2, r // 4)
        y[second::2] = filter_rows(x2, hb, m + 1, 4, 2, r // 4)
        return y

    return _along(x, axis, fn)


def colifilt(x, ha, hb, axis=0):
    """Interpolate the interleaved two-tree signal by 2 (inverse of
    :func:`coldfilt` when given the synthesis filters)."""
    ha = np.asarray(ha, dtype=np.float64)
    hb = np.asarray(hb, dtype=np.float64)
    m = len(ha)
    if len(hb) != m or m % 2:
        raise ShapeError("q-shift filters must have equal even lengths")
    n = np.shape(x)[axis]
    if n % 2:
        raise ShapeError(f"colifilt needs an even length, got {n}")
    half = m // 2
    swap = not _order_sign(ha, hb)

    def fn(x2):
        r = x2.shape[0]
        y = np.empty((2 * r, x2.shape[1]))
        for e in (0, 1):
            phase = (e + half - 1) % 2
            base = e + half - 1 - phase
            base_a, base_b = (base + 1, base) if swap else (base, base + 1)
            y[2 * e::4] = filter_rows(x2, ha[phase::2], base_a, 2, 2, r // 2)
            y[2 * e + 1::4] = filter_rows(x2, hb[phase::2], base_b, 2, 2, r // 2)
        return y

    return _along(x, axis, fn)


_SQRT_HALF = np.sqrt(0.5)


def q2c(y):
    """Combine the four tree phases of each 2x2 block into two complex
    subbands: with a, b, c, d the (even,even), (even,odd), (odd,even),
    (odd,odd) samples, ``p = (a + jb)/sqrt2``, ``q = (d - jc)/sqrt2`` and the
    outputs are ``p - q`` and ``p + q``.  Works on the last two axes."""
    a = y[..., 0::2, 0::2]
    b = y[..., 0::2, 1::2]
    c = y[..., 1::2, 0::2]
    d = y[..., 1::2, 1::2]
    p = (a + 1j * b) * _SQRT_HALF
    q = (d - 1j * c) * _SQRT_HALF
    return p - q, p + q


def c2q(z1, z2):
    """Exact inverse of :func:`q2c`."""
    p = (z1 + z2) * _SQRT_HALF
    q = (z1 - z2) * _SQRT_HALF
    shape = z1.shape[:-2] + (2 * z1.shape[-2], 2 * z1.shape[-1])
    y = np.empty(shape)
    y[..., 0::2, 0::2] = p.real
    y[..., 0::2, 1::2] = p.imag
    y[..., 1::2, 0::2] = q.imag
    y[..., 1::2, 1::2] = -q.real
    return y
