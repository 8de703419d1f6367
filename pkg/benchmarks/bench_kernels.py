#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Times the three hot kernels on realistic workloads, plus the full pitch
estimator through whichever backend is active in this process.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from singdec import _kernels
from singdec._kernels import _fallback
from singdec.audio import AudioClip
from singdec.pitch import estimate_f0

try:
    from singdec._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)
    sr = 22050
    n_frames = 1 + (5 * sr) // 256
    signal = np.concatenate([rng.standard_normal(5 * sr), np.zeros(551 + 368)])

    def nccf_pass(impl):
        # one full-rate candidate pass over every 4th frame of a 5 s clip
        def run():
            for t in range(0, n_frames, 4):
                impl.nccf(signal, t * 256, 551, 22, 368)
        return run

    cost = rng.random((420, 30))

    def viterbi(impl):
        return lambda: impl.viterbi_path(cost)

    f0 = np.where(rng.random(258) > 0.2, 180 + 200 * rng.random(258), 0.0)
    amps = rng.random((258, 60))
    kmax = np.full(258, 60, dtype=np.int64)

    def synth(impl):
        return lambda: impl.harmonic_synth(f0, amps, kmax, 256, 22050.0, 0.0)

    return [("nccf (5 s clip, full rate)", nccf_pass),
            ("viterbi (420 frames x 30)", viterbi),
            ("harmonic synth (3 s, 60 part.)", synth)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = [("fallback", _fallback)]
    if _core is not None:
        backends.append(("compiled", _core))
    print(f"active package backend: {_kernels.backend()}\n")
    header = f"{'kernel':<32}" + "".join(f"{name:>12}" for name, _ in backends)
    print(header + ("     speedup" if _core is not None else ""))
    print("-" * len(header) + ("-" * 12 if _core is not None else ""))
    for label, make in workloads():
        times = [timeit(make(impl), args.repeat) for _, impl in backends]
        row = f"{label:<32}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)

    clip = AudioClip(0.7 * np.sin(2 * np.pi * 220 *
                                  np.arange(5 * 22050) / 22050), 22050)
    t = timeit(lambda: estimate_f0(clip), args.repeat)
    print(f"\nestimate_f0, 5 s clip, {_kernels.backend()} backend: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
