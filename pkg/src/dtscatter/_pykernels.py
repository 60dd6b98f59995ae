"""Pure-numpy fallback for the compiled kernels in ``_ckernels``.

Semantics are identical, and the tap loop runs in the same order, so both
backends produce bit-identical output.
"""
import numpy as np


def polyphase_filter(z, taps, base, out_step, tap_step, n_out):
    """out[k, :] = sum_d taps[d] * z[base + out_step*k - tap_step*d, :]"""
    out = np.zeros((n_out, z.shape[1]), dtype=np.float64)
    stop_pad = out_step * (n_out - 1) + 1
    for d, t in enumerate(taps):
        if t == 0.0:
            continue
        start = base - tap_step * d
        out += t * z[start:start + stop_pad:out_step]
    return out
