"""Two-dimensional dual-tree complex wavelet transform."""
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ShapeError
from .filters import default_filters
from .lowlevel import c2q, coldfilt, colfilter, colifilt, q2c

#: Nominal subband orientations in degrees, in emission order.
ORIENTATIONS = (15, 45, 75, 105, 135, 165)

# (first, second) output of q2c for each separable band, as orientation index
_BAND_SLOTS = {"lohi": (0, 5), "hilo": (2, 3), "hihi": (1, 4)}


@dataclass(frozen=True)
class ComplexSubband:
    level: int
    orientation: int
    real_part: np.ndarray
    imag_part: np.ndarray

    def __post_init__(self):
        if np.shape(self.real_part) != np.shape(self.imag_part):
            raise ShapeError("real and imaginary parts differ in shape")
        if self.orientation not in ORIENTATIONS:
            raise ParameterError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def values(self):
        return self.real_part + 1j * self.imag_part


@dataclass(frozen=True)
class DtcwtPyramid:
    """Result of :func:`dtcwt_forward` for one plane or a stack of planes.

    ``highpasses[j-1]`` holds level ``j`` as a complex array shaped
    ``(..., 6, H/2**j, W/2**j)`` in :data:`ORIENTATIONS` order.
    ``lowpass_trees`` is the level-J lowpass of all four trees interleaved on
    a ``H/2**(J-1)`` grid, which the inverse needs.
    """

    highpasses: tuple
    lowpass_trees: np.ndarray

    @property
    def levels(self):
        return len(self.highpasses)

    @property
    def lowpass(self):
        """Level-J scaling output on the ``H/2**J`` grid (mean of the four
        trees' lowpass samples)."""
        t = self.lowpass_trees
        return 0.25 * (t[..., 0::2, 0::2] + t[..., 0::2, 1::2]
                       + t[..., 1::2, 0::2] + t[..., 1::2, 1::2])

    def subbands(self, level):
        """The six :class:`ComplexSubband` objects of one level (2-D input only)."""
        band = self.highpasses[level - 1]
        if band.ndim != 3:
            raise ShapeError("subbands() is only defined for single-plane pyramids")
        return [ComplexSubband(level, r, band[i].real.copy(), band[i].imag.copy())
                for i, r in enumerate(ORIENTATIONS)]

    def energy(self):
        """Coefficient energy normalised to the input scale: the four trees
        together carry ~4x the input energy, so this is ~||x||^2."""
        total = np.sum(self.lowpass_trees ** 2)
        for band in self.highpasses:
            total += np.sum(band.real ** 2 + band.imag ** 2)
        return total / 4.0


def _validate_shape(shape, levels):
    if levels < 1 or int(levels) != levels:
        raise ParameterError(f"levels must be an integer >= 1, got {levels!r}")
    if len(shape) < 2:
        raise ShapeError("expected at least a 2-D array")
    h, w = shape[-2:]
    step = 2 ** levels
    if h == 0 or w == 0 or h % step or w % step:
        raise ShapeError(f"plane {h}x{w} is not divisible by 2**{levels} = {step}")


def _assemble(fn, lo, hi, h_lo, h_hi):
    # lo/hi are already filtered along the row axis; fn filters the columns
    out = None
    for name, (src, h) in {"lohi": (hi, h_lo), "hilo": (lo, h_hi), "hihi": (hi, h_hi)}.items():
        z1, z2 = q2c(fn(src, h))
        if out is None:
            out = np.empty(z1.shape[:-2] + (6,) + z1.shape[-2:], dtype=np.complex128)
        i, k = _BAND_SLOTS[name]
        out[..., i, :, :] = z1
        out[..., k, :, :] = z2
    return out


def dtcwt_forward(plane, levels, filters=None):
    """Analyse a plane (or a stack ``(..., H, W)``) into six oriented complex
    subbands per level plus a lowpass residual.

    ``H`` and ``W`` must be divisible by ``2**levels``.
    """
    filters = filters or default_filters()
    x = np.asarray(plane, dtype=np.float64)
    _validate_shape(x.shape, levels)
    rows, cols = x.ndim - 2, x.ndim - 1

    h0o, h1o = filters.level1_lowpass_a, filters.level1_highpass_a
    lo = colfilter(x, h0o, rows)
    hi = colfilter(x, h1o, rows)
    highpasses = [_assemble(lambda a, h: colfilter(a, h, cols), lo, hi, h0o, h1o)]
    ll = colfilter(lo, h0o, cols)

    q0 = (filters.qshift_lowpass_a, filters.qshift_lowpass_b)
    q1 = (filters.qshift_highpass_a, filters.qshift_highpass_b)
    for _ in range(2, levels + 1):
        lo = coldfilt(ll, *q0, axis=rows)
        hi = coldfilt(ll, *q1, axis=rows)
        highpasses.append(_assemble(lambda a, h: coldfilt(a, *h, axis=cols), lo, hi, q0, q1))
        ll = coldfilt(lo, *q0, axis=cols)
    return DtcwtPyramid(tuple(highpasses), ll)


def _check_pyramid(pyramid):
    if pyramid.levels < 1:
        raise ShapeError("pyramid has no levels")
    lead = pyramid.lowpass_trees.shape[:-2]
    expect = np.array(pyramid.lowpass_trees.shape[-2:]) // 2
    for j in range(pyramid.levels, 0, -1):
        band = pyramid.highpasses[j - 1]
        if band.shape[:-3] != lead or band.shape[-3] != 6 or tuple(band.shape[-2:]) != tuple(expect):
            raise ShapeError(
                f"level {j} subbands have shape {band.shape}, expected {lead + (6,) + tuple(expect)}")
        expect = expect * 2


def dtcwt_inverse(pyramid, filters=None):
    """Reconstruct the plane(s) analysed by :func:`dtcwt_forward`."""
    filters = filters or default_filters()
    _check_pyramid(pyramid)
    z = np.asarray(pyramid.lowpass_trees, dtype=np.float64)
    rows, cols = z.ndim - 2, z.ndim - 1

    def bands(level):
        band = pyramid.highpasses[level - 1]
        return [c2q(band[..., i, :, :], band[..., k, :, :])
                for i, k in (_BAND_SLOTS["lohi"], _BAND_SLOTS["hilo"], _BAND_SLOTS["hihi"])]

    g0 = (filters.qshift_lowpass_a_synthesis, filters.qshift_lowpass_b_synthesis)
    g1 = (filters.qshift_highpass_a_synthesis, filters.qshift_highpass_b_synthesis)
    for level in range(pyramid.levels, 1, -1):
        lh, hl, hh = bands(level)
        y1 = colifilt(z, *g0, axis=rows) + colifilt(lh, *g1, axis=rows)
        y2 = colifilt(hl, *g0, axis=rows) + colifilt(hh, *g1, axis=rows)
        z = colifilt(y1, *g0, axis=cols) + colifilt(y2, *g1, axis=cols)

    g0o, g1o = filters.level1_lowpass_a_synthesis, filters.level1_highpass_a_synthesis
    lh, hl, hh = bands(1)
    y1 = colfilter(z, g0o, rows) + colfilter(lh, g1o, rows)
    y2 = colfilter(hl, g0o, rows) + colfilter(hh, g1o, rows)
    # undecimated level 1: each axis has gain 2 with sqrt(2)-normalised filters
    return (colfilter(y1, g0o, cols) + colfilter(y2, g1o, cols)) / 4.0


def complex_magnitude(subband):
    """Point-wise modulus sqrt(re^2 + im^2) of a subband or complex array."""
    if isinstance(subband, ComplexSubband):
        return np.hypot(subband.real_part, subband.imag_part)
    z = np.asarray(subband)
    return np.hypot(z.real, z.imag)
