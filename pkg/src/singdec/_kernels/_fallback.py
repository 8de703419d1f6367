"""Numpy reference implementations of the hot kernels.

These mirror the compiled core in `_core.pyx` exactly (same formulas, same
tie-breaking) so either backend can serve the rest of the package.
"""
import math

import numpy as np

ENERGY_FLOOR = 1e-20


def nccf(x, start, window, lag_min, lag_max):
    """Normalized cross-correlation of one frame over an inclusive lag range.

    `x` must already be padded so that x[start : start+window+lag_max] is in
    bounds. Returns correlations for lags lag_min..lag_max; lags where either
    windowed energy underflows report 0.
    """
    x = np.asarray(x, dtype=np.float64)
    frame = x[start:start + window]
    seg = x[start:start + window + lag_max]
    num = np.correlate(seg, frame, mode="valid")[lag_min:lag_max + 1]
    csum = np.concatenate(([0.0], np.cumsum(seg * seg)))
    e0 = csum[window]
    elag = csum[lag_min + window:lag_max + window + 1] - csum[lag_min:lag_max + 1]
    out = np.zeros(lag_max - lag_min + 1)
    ok = (e0 > ENERGY_FLOOR) & (elag > ENERGY_FLOOR)
    out[ok] = num[ok] / np.sqrt(e0 * elag[ok])
    return out


def viterbi_path(cost):
    """Monotone min-cost frame-to-state path over a (T, N) cost matrix.

    States must be visited in order 0..N-1, each for at least one frame
    (requires T >= N). Ties prefer staying in the current state.
    """
    cost = np.asarray(cost, dtype=np.float64)
    T, N = cost.shape
    if T < N:
        raise ValueError(f"need at least as many frames as states ({T} < {N})")
    dp = np.full(N, np.inf)
    dp[0] = cost[0, 0]
    advanced = np.zeros((T, N), dtype=np.uint8)
    for t in range(1, T):
        shifted = np.concatenate(([np.inf], dp[:-1]))
        adv = shifted < dp
        advanced[t] = adv
        dp = np.where(adv, shifted, dp) + cost[t]
    path = np.empty(T, dtype=np.int64)
    n = N - 1
    for t in range(T - 1, 0, -1):
        path[t] = n
        if advanced[t, n]:
            n -= 1
    path[0] = n
    return path


def harmonic_synth(f0, amps, kmax, hop, sample_rate, phase0):
    """Phase-accumulating harmonic synthesis.

    f0:    per-frame fundamental in Hz (0 = silent frame, phase frozen)
    amps:  (T, K) per-frame harmonic amplitudes (harmonic k+1 in column k)
    kmax:  per-frame number of active harmonics
    Returns (samples, final_phase); frame t renders samples [t*hop, (t+1)*hop).
    """
    f0 = np.asarray(f0, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    T = len(f0)
    y = np.zeros(T * hop)
    two_pi = 2.0 * math.pi
    phase = float(phase0)
    idx = np.arange(hop, dtype=np.float64)
    for t in range(T):
        K = int(kmax[t])
        if f0[t] > 0.0 and K > 0:
            w = two_pi * f0[t] / sample_rate
            base = phase + idx * w
            k = np.arange(1, K + 1, dtype=np.float64)
            y[t * hop:(t + 1) * hop] = np.sin(base[:, None] * k) @ amps[t, :K]
            phase = math.fmod(phase + hop * w, two_pi)
    return y, phase
