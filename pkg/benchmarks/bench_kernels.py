#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times conv1d and LSTM forward/backward at three representative shapes:
single-trace inference, a full training batch, and the tiny gradient-check
configuration. Run from a checkout with the package installed:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

import vidprint.kernels as kernels

SHAPES = [
    ("inference  B=1   L=60  H=128", 1, 60, 128),
    ("training   B=128 L=60  H=128", 128, 60, 128),
    ("grad-check B=6   L=12  H=8", 6, 12, 8),
]


def _time(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(batch, length, hidden, repeats):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, length))
    wc = rng.normal(size=(8, 3))
    bc = rng.normal(size=8)
    dconv = rng.normal(size=(batch, length - 2, 8))
    wx = rng.normal(size=4 * hidden)
    wh = rng.normal(size=(hidden, 4 * hidden)) * 0.3
    bl = rng.normal(size=4 * hidden)
    dh = rng.normal(size=(batch, hidden))

    def conv_fwd():
        kernels.conv1d_forward(x, wc, bc)

    def conv_bwd():
        kernels.conv1d_backward(x, wc, dconv)

    def lstm_fwd():
        kernels.lstm_forward(x, wx, wh, bl)

    _, cache = kernels.lstm_forward(x, wx, wh, bl)

    def lstm_bwd():
        kernels.lstm_backward(x, wx, wh, cache, dh)

    return {
        "conv1d fwd": _time(conv_fwd, repeats),
        "conv1d bwd": _time(conv_bwd, repeats),
        "lstm fwd": _time(lstm_fwd, repeats),
        "lstm bwd": _time(lstm_bwd, repeats),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = ["pure"] + (["compiled"] if kernels.HAVE_COMPILED else [])
    if not kernels.HAVE_COMPILED:
        print("compiled kernels not built; timing the pure backend only\n")

    for label, batch, length, hidden in SHAPES:
        results = {}
        for backend in backends:
            kernels.set_backend(backend)
            results[backend] = bench_case(batch, length, hidden, args.repeats)
        print(label)
        for op in results[backends[0]]:
            line = f"  {op:11s}"
            for backend in backends:
                line += f"  {backend}: {results[backend][op] * 1e3:8.3f} ms"
            if len(backends) == 2:
                ratio = results["pure"][op] / results["compiled"][op]
                line += f"  speedup: {ratio:5.2f}x"
            print(line)
        print()


if __name__ == "__main__":
    main()
