# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled strided FIR kernel behind every DTCWT and smoothing stage."""
import numpy as np

cimport cython


def polyphase_filter(const double[:, ::1] z, const double[::1] taps,
                     Py_ssize_t base, Py_ssize_t out_step, Py_ssize_t tap_step,
                     Py_ssize_t n_out):
    """out[k, :] = sum_d taps[d] * z[base + out_step*k - tap_step*d, :]

    Index bounds are the caller's responsibility (checked in _backend).
    """
    cdef Py_ssize_t ncols = z.shape[1]
    cdef Py_ssize_t ntaps = taps.shape[0]
    out_arr = np.zeros((n_out, ncols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t k, d, c, row
    cdef double t
    with nogil:
        for k in range(n_out):
            for d in range(ntaps):
                t = taps[d]
                if t == 0.0:
                    continue
                row = base + out_step * k - tap_step * d
                for c in range(ncols):
                    out[k, c] += t * z[row, c]
    return out_arr
