"""Brute-force reference for single DTCWT subbands (tests only).

Each subband sample is computed as one explicit 2-D sum of the
symmetrically extended input against the separable *equivalent* filter of
its tree and level (the cascade of upsampled stage filters), followed by
sampling at the decimated position.  Nothing here calls the fast path.
"""
import numpy as np

from ..errors import ParameterError, ShapeError
from .filters import default_filters
from .transform import ORIENTATIONS, ComplexSubband

MAX_ORACLE_SIZE = 64

# orientation -> (row-axis band, column-axis band, which of the q2c pair)
_ORIENTATION_BANDS = {
    15: ("hi", "lo", 0), 165: ("hi", "lo", 1),
    75: ("lo", "hi", 0), 105: ("lo", "hi", 1),
    45: ("hi", "hi", 0), 135: ("hi", "hi", 1),
}


def _symmetric_index(i, n):
    i = np.mod(i, 2 * n)
    return np.where(i < n, i, 2 * n - 1 - i)


def _upsample(f, factor):
    out = np.zeros((len(f) - 1) * factor + 1)
    out[::factor] = f
    return out


def equivalent_filters(level, band, filters):
    """For the composite sequence of ``band`` at ``level``, return
    ``{parity: (g, offset)}`` with
    ``C[2k + parity] = sum_n g[n] * xe[2**level * k + offset - n]``."""
    h = {"lo": filters.level1_lowpass_a, "hi": filters.level1_highpass_a}
    q = {"lo": (filters.qshift_lowpass_a, filters.qshift_lowpass_b),
         "hi": (filters.qshift_highpass_a, filters.qshift_highpass_b)}

    def level1(b):
        g = h[b]
        centre = (len(g) - 1) // 2
        return {r: (g, r + centre) for r in (0, 1)}

    if level == 1:
        return level1(band)
    prev = level1("lo")
    for j in range(2, level + 1):
        b = band if j == level else "lo"
        fa, fb = q[b]
        keep_order = float(np.dot(fa, fb)) > 0
        m = len(fa)
        cur = {}
        for r, f in ((0, fa), (1, fb)):
            g_prev, off_prev = prev[r]
            g = np.convolve(_upsample(f, 2 ** (j - 1)), g_prev)
            s = r if keep_order else 1 - r
            cur[s] = (g, off_prev + 2 ** (j - 2) * m)
        prev = cur
    return prev


def _composite(x, level, row_band, col_band, filters):
    h, w = x.shape
    rows = equivalent_filters(level, row_band, filters)
    cols = equivalent_filters(level, col_band, filters)
    kh, kw = h // 2 ** level, w // 2 ** level
    out = np.zeros((2 * kh, 2 * kw))
    step = 2 ** level
    for sr, (gr, offr) in rows.items():
        ri = _symmetric_index(step * np.arange(kh)[:, None] + offr - np.arange(len(gr))[None, :], h)
        for sc, (gc, offc) in cols.items():
            ci = _symmetric_index(step * np.arange(kw)[:, None] + offc - np.arange(len(gc))[None, :], w)
            window = x[ri[:, :, None, None], ci[None, None, :, :]]
            out[sr::2, sc::2] = np.einsum("a,b,kalb->kl", gr, gc, window)
    return out


def oracle_direct_subband(plane, level, orientation, filters=None):
    """Compute one complex subband by explicit 2-D convolution.

    Refuses planes larger than 64x64: the cost is O(N^2 * filter^2).
    """
    filters = filters or default_filters()
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("oracle works on a single 2-D plane")
    if max(x.shape) > MAX_ORACLE_SIZE:
        raise ParameterError(
            f"oracle refuses planes larger than {MAX_ORACLE_SIZE}x{MAX_ORACLE_SIZE}; got {x.shape}")
    if level < 1:
        raise ParameterError("level must be >= 1")
    step = 2 ** level
    if x.shape[0] % step or x.shape[1] % step:
        raise ShapeError(f"plane {x.shape} not divisible by {step}")
    if orientation not in ORIENTATIONS:
        raise ParameterError(f"orientation must be one of {ORIENTATIONS}")
    row_band, col_band, which = _ORIENTATION_BANDS[orientation]
    y = _composite(x, level, row_band, col_band, filters)
    a, b = y[0::2, 0::2], y[0::2, 1::2]
    c, d = y[1::2, 0::2], y[1::2, 1::2]
    p = (a + 1j * b) / np.sqrt(2.0)
    q = (d - 1j * c) / np.sqrt(2.0)
    z = p + q if which else p - q
    return ComplexSubband(level, orientation, z.real, z.imag)
