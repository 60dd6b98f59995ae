"""Compare the Cython and pure-Python kernel backends.

Times a forward DTCWT of a 3x64x64 image at two levels, a full inverse,
and one scattering feature extraction on a 32x32 image, and checks that
both backends give bit-identical output.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from dtscatter._backend import BACKENDS, set_backend
from dtscatter.dtcwt.transform import dtcwt_forward, dtcwt_inverse
from dtscatter.scatternet import extract_features


def cases(rng):
    plane = rng.random((3, 64, 64))
    image = rng.random((3, 32, 32))
    pyramid = dtcwt_forward(plane, 2)
    return {
        "forward 3x64x64 J=2": lambda: dtcwt_forward(plane, 2),
        "inverse 3x64x64 J=2": lambda: dtcwt_inverse(pyramid),
        "extract 3x32x32": lambda: extract_features(image),
    }


def _array(result):
    if isinstance(result, np.ndarray):
        return result
    if hasattr(result, "data"):
        return np.asarray(result.data)
    parts = [result.lowpass_trees.ravel()] + [b.ravel() for b in result.highpasses]
    return np.concatenate([p.view(np.float64) if p.dtype.kind == "c" else p for p in parts])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    if "cython" not in BACKENDS:
        print("Cython extension not built; only the python backend is available")
    work = cases(np.random.default_rng(0))
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in sorted(BACKENDS)) + "   identical")
    for name, fn in work.items():
        times, outputs = [], []
        for backend in sorted(BACKENDS):
            previous = set_backend(backend)
            try:
                outputs.append(_array(fn()))
                times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
            finally:
                set_backend(previous)
        same = all(np.array_equal(outputs[0], o) for o in outputs[1:])
        print(f"{name:<22}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"   {same}")


if __name__ == "__main__":
    main()
