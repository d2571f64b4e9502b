"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--size 512] [--sigma 80] [--repeat 3]

Each kernel is timed on both backends and the outputs are checked for
bit-identical agreement.
"""

import argparse
import time

import numpy as np

from patchretinex import _fallback
from patchretinex.retinex import RetinexParams, gaussian_weights, mirror_pad, surround_kernel
from patchretinex.synthetic import make_slide

try:
    from patchretinex import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def cases(size, sigma, path_side):
    gray = make_slide(size, rng=np.random.default_rng(0)).image.mean(axis=2)
    radius = RetinexParams(sigma=sigma).radius_for("gaussian", sigma)
    padded = mirror_pad(gray, radius)
    w = gaussian_weights(sigma, radius)
    # one separable surround: a row pass, then the same pass over the transpose
    def rows(mod):
        def run():
            first = mod.correlate_rows(padded, w)
            return mod.correlate_rows(np.ascontiguousarray(first.T), w).T
        return run

    small = mirror_pad(gray[:64, :64], 15)
    k2 = surround_kernel("cross_average", sigma, 15)

    p = RetinexParams(num_paths=16, path_length=32)
    crop = gray[:path_side, :path_side]
    logimg = np.log(crop + p.epsilon)
    draws = np.random.default_rng(1).random((path_side * path_side, p.num_paths, p.path_length - 1))

    def paths(mod):
        def run():
            out = np.empty(crop.shape)
            for i in range(crop.size):
                y, x = divmod(i, path_side)
                out[y, x] = mod.path_retinex(logimg, y, x, draws[i], p.threshold)
            return out
        return run

    return [
        (f"separable surround {size}x{size}, sigma {sigma:g}", rows),
        ("direct 2-D cross-average 64x64, radius 15", lambda mod: lambda: mod.correlate2d(small, k2)),
        (f"path retinex map {path_side}x{path_side}, N=16, L=32", paths),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--sigma", type=float, default=80.0)
    parser.add_argument("--path-side", type=int, default=48)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _kernels is None:
        parser.exit(1, "compiled extension not built; nothing to compare\n")

    print(f"{'kernel':<46} {'compiled s':>11} {'numpy s':>9} {'speedup':>8}  identical")
    for label, make in cases(args.size, args.sigma, args.path_side):
        t_c, out_c = best_of(make(_kernels), args.repeat)
        t_p, out_p = best_of(make(_fallback), args.repeat)
        same = np.array_equal(out_c, out_p)
        print(f"{label:<46} {t_c:>11.3f} {t_p:>9.3f} {t_p / t_c:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
