"""Benchmark: numba kernels vs the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py
(RXNKIT_NUMBA only controls which backend the package itself picks; this
script imports both implementations directly.)
"""

import random
import time

import numpy as np

from rxnkit._kernels import numba_impl, numpy_impl

rng = random.Random(0)


def timeit(fn, *args, repeat=5):
    fn(*args)  # warmup / JIT compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, args_fn, repeat=5):
    args = args_fn()
    t_np = timeit(getattr(numpy_impl, name), *args, repeat=repeat)
    t_nb = timeit(getattr(numba_impl, name), *args, repeat=repeat)
    print(f"{name:<24} numpy {t_np * 1e3:9.3f} ms   numba {t_nb * 1e3:9.3f} ms   speedup {t_np / t_nb:6.1f}x")


def levenshtein_args():
    a = np.array([rng.randrange(97, 123) for _ in range(2000)], dtype=np.int32)
    b = np.array([rng.randrange(97, 123) for _ in range(2000)], dtype=np.int32)
    return a, b


def iou_args():
    def boxes(n):
        out = np.empty((n, 4))
        for i in range(n):
            x, y = rng.uniform(0, 500), rng.uniform(0, 500)
            out[i] = (x, y, x + rng.uniform(5, 60), y + rng.uniform(5, 60))
        return out

    return boxes(400), boxes(400)


def matching_args():
    n = 300
    adj = np.array([[rng.random() < 0.02 for _ in range(n)] for _ in range(n)], dtype=bool)
    return (adj,)


def spiral_args():
    size = 1200
    mask = (np.array([[rng.random() for _ in range(size)] for _ in range(size)]) < 0.4).astype(float)
    integral = np.zeros((size + 1, size + 1))
    integral[1:, 1:] = mask.cumsum(0).cumsum(1)
    blocked = np.zeros((0, 4))
    # threshold low enough that the spiral has to walk far before it fits
    return (integral, size, size, 40, 14, size // 2, size // 2, 500, 2, 0.02, blocked)


if __name__ == "__main__":
    print(f"{'kernel':<24} {'numpy':>18} {'numba':>19}")
    bench("levenshtein_codes", levenshtein_args)
    bench("iou_matrix", iou_args)
    bench("max_bipartite_matching", matching_args)
    bench("spiral_first_fit", spiral_args)
