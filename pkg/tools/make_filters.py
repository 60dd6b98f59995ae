"""Regenerate the shipped DTCWT coefficient file.

The level-1 pair is the (13,19)-tap near-symmetric biorthogonal pair and the
q-shift pair is the 14-tap quarter-shift design, both as commonly tabulated
(unit DC gain for level 1).  Both are rescaled to sqrt(2) DC gain.  The
tabulated q-shift lowpass is only orthonormal to ~1e-7 and leaks ~1e-6 at
Nyquist, so it is projected onto the nearest filter (least-norm Gauss-Newton)
that is exactly orthonormal with a zero at z = -1.

Usage: python tools/make_filters.py > src/dtscatter/data/near_sym_b_qshift_b.txt
"""
import sys

import numpy as np

NEAR_SYM_H0 = np.array([
    -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875,
    0.55546875,
    0.296875, -0.0482421875, -0.046875, 0.022265625, 0.0, -0.0017578125,
])
NEAR_SYM_G0 = np.array([
    7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
    0.007156808035714285, 0.023856026785714284, -0.05564313616071428,
    -0.05168805803571428, 0.29975760323660716, 0.5594308035714286,
    0.29975760323660716, -0.05168805803571428, -0.05564313616071428,
    0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
    -0.0013419015066964285, 0.0, 7.062639508928571e-05,
])
QSHIFT_H0 = np.array([
    0.003253142763653182, -0.00388321199915849, 0.03466034684485349,
    -0.03887280126882779, -0.11720388769911527, 0.27529538466888204,
    0.7561456438925225, 0.5688104207121227, 0.011866092033797,
    -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
    -0.005439475937274115, -0.004556895628475491,
])


def _constraints(h):
    n = len(h)
    rows = [np.dot(h[: n - 2 * k], h[2 * k:]) - (1.0 if k == 0 else 0.0)
            for k in range(n // 2)]
    rows.append(np.dot(h, (-1.0) ** np.arange(n)))
    return np.array(rows)


def _jacobian(h):
    n = len(h)
    jac = np.zeros((n // 2 + 1, n))
    for k in range(n // 2):
        s = 2 * k
        jac[k, : n - s] += h[s:]
        jac[k, s:] += h[: n - s]
    jac[-1] = (-1.0) ** np.arange(n)
    return jac


def refine_qshift(h, iters=20):
    h = h.copy()
    for _ in range(iters):
        c = _constraints(h)
        if np.max(np.abs(c)) < 1e-16:
            break
        h -= np.linalg.lstsq(_jacobian(h), c, rcond=None)[0]
    return h


def main(out=sys.stdout):
    r2 = np.sqrt(2.0)
    n = np.arange
    h0o = NEAR_SYM_H0 * r2
    g0o = NEAR_SYM_G0 * r2
    # modulation relations of the biorthogonal pair
    h1o = -((-1.0) ** n(len(g0o))) * g0o
    g1o = ((-1.0) ** n(len(h0o))) * h0o
    h0a = refine_qshift(QSHIFT_H0)
    h1a = ((-1.0) ** n(len(h0a))) * h0a[::-1]
    sections = {
        "level1_lowpass_a": h0o, "level1_highpass_a": h1o,
        "level1_lowpass_b": h0o, "level1_highpass_b": h1o,
        "level1_lowpass_a_synthesis": g0o, "level1_highpass_a_synthesis": g1o,
        "level1_lowpass_b_synthesis": g0o, "level1_highpass_b_synthesis": g1o,
        # tree a filters the even-phase samples of the interleaved lowpass
        "qshift_lowpass_a": h0a[::-1], "qshift_highpass_a": h1a[::-1],
        "qshift_lowpass_b": h0a, "qshift_highpass_b": h1a,
        "qshift_lowpass_a_synthesis": h0a, "qshift_highpass_a_synthesis": h1a,
        "qshift_lowpass_b_synthesis": h0a[::-1], "qshift_highpass_b_synthesis": h1a[::-1],
    }
    print("# DTCWT filter coefficients: near_sym_b (13,19) level 1, qshift_b (14) levels >= 2", file=out)
    print("# All lowpass filters normalised to DC gain sqrt(2).", file=out)
    print("# q-shift lowpass refined to exact orthonormality and a zero at Nyquist", file=out)
    print(f"# (max change from tabulated values: {np.max(np.abs(h0a - QSHIFT_H0)):.3e}).", file=out)
    for name, coeffs in sections.items():
        print(f"\n[{name}]", file=out)
        for c in coeffs:
            print(repr(float(c)), file=out)


if __name__ == "__main__":
    main()
