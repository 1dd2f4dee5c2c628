"""Time the numba and numpy implementations of the DP kernels.

    python benchmarks/bench_kernels.py [--repeat 20]

Both backends are imported side by side; with LCBNET_DISABLE_NUMBA=1 only the
numpy column is filled in.
"""
import argparse
import timeit

import numpy as np

from lcbnet import kernels
from lcbnet._accel import USE_NUMBA


def _log_probs(rng, frames, vocab):
    x = rng.normal(size=(frames, vocab))
    return x - np.log(np.exp(x).sum(-1, keepdims=True))


def cases(rng):
    for frames, labels, vocab in ((12, 6, 40), (100, 30, 200), (400, 120, 500)):
        lp = _log_probs(rng, frames, vocab)
        ext = kernels.extend_with_blanks(rng.integers(1, vocab, size=labels), 0)
        yield f"ctc T={frames} U={labels} V={vocab}", (kernels.ctc_forward_backward_numba,
                                                        kernels.ctc_forward_backward_numpy), (lp, ext)
    for n in (12, 100, 1000):
        ref, hyp = rng.integers(0, 5, size=n), rng.integers(0, 5, size=n)
        yield f"edit n={n}", (kernels.edit_distance_table_numba, kernels.edit_distance_table_numpy), (ref, hyp)


def best_time(fn, args, repeat):
    fn(*args)  # warm-up, includes JIT compilation
    number = 5
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, (fast, slow), fn_args in cases(rng):
        t_np = best_time(slow, fn_args, args.repeat)
        if USE_NUMBA:
            t_nb = best_time(fast, fn_args, args.repeat)
            print(f"{name:32s} {t_nb * 1e3:10.4f} {t_np * 1e3:10.4f} {t_np / t_nb:8.1f}")
        else:
            print(f"{name:32s} {'-':>10s} {t_np * 1e3:10.4f} {'-':>8s}")


if __name__ == "__main__":
    main()
