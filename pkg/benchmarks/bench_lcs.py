"""Timing comparison of the two common-subsequence kernels.

Runs the compiled extension (when built) and the pure-Python fallback
over the same synthetic token sequences and prints best-of-N wall
times.  Run as a script:

    python benchmarks/bench_lcs.py
"""

from __future__ import annotations

import random
import time

from rulechat.kernels import _py_lcs_length, _py_lcs_pairs, backend_name

try:
    from rulechat import _lcs_native as native
except ImportError:
    native = None


def make_pairs(count: int, length: int, vocab: int, seed: int) -> list[tuple[list[int], list[int]]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        a = [rng.randrange(vocab) for _ in range(length)]
        b = [rng.randrange(vocab) for _ in range(length)]
        out.append((a, b))
    return out


def best_of(fn, pairs, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> None:
    print(f"selected backend: {backend_name()}")
    workloads = [
        ("short (len 10)", make_pairs(2000, 10, 30, seed=1)),
        ("medium (len 60)", make_pairs(400, 60, 60, seed=2)),
        ("long (len 200)", make_pairs(40, 200, 120, seed=3)),
    ]
    rows = []
    for name, pairs in workloads:
        pure_pairs_t = best_of(_py_lcs_pairs, pairs)
        pure_len_t = best_of(_py_lcs_length, pairs)
        if native is not None:
            native_pairs_t = best_of(native.lcs_pairs, pairs)
            native_len_t = best_of(native.lcs_length, pairs)
            for a, b in pairs[:20]:
                assert native.lcs_pairs(a, b) == _py_lcs_pairs(a, b)
                assert native.lcs_length(a, b) == _py_lcs_length(a, b)
        else:
            native_pairs_t = native_len_t = None
        rows.append((name, pure_pairs_t, native_pairs_t, pure_len_t, native_len_t))

    def fmt(seconds: float | None) -> str:
        return "    n/a" if seconds is None else f"{seconds * 1000:7.1f}"

    print(f"{'workload':<18} {'pairs/pure':>10} {'pairs/native':>12} "
          f"{'len/pure':>10} {'len/native':>12}   (ms, best of 5)")
    for name, pp, np_, lp, ln in rows:
        speedup = ""
        if np_ is not None and np_ > 0:
            speedup = f"   pairs speedup {pp / np_:4.1f}x"
        print(f"{name:<18} {fmt(pp):>10} {fmt(np_):>12} {fmt(lp):>10} {fmt(ln):>12}{speedup}")


if __name__ == "__main__":
    main()
