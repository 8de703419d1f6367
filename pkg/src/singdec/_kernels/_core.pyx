# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: NCCF, monotone Viterbi, harmonic synthesis.

Must stay formula-for-formula identical to `_fallback.py`.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fmod, sin, sqrt
from scipy.linalg.cython_blas cimport ddot

cnp.import_array()

DEF ENERGY_FLOOR = 1e-20
DEF TWO_PI = 6.283185307179586476925287


def nccf(x, Py_ssize_t start, Py_ssize_t window,
         Py_ssize_t lag_min, Py_ssize_t lag_max):
    """Normalized cross-correlation of one frame over an inclusive lag range."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n_lags = lag_max - lag_min + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_lags)
    cdef double[:] xv = xa
    cdef double[:] ov = out
    cdef double* base = &xv[0]
    cdef Py_ssize_t j, lag, i
    cdef double e0 = 0.0, elag, num
    cdef int w = <int> window
    cdef int one = 1

    for j in range(start, start + window):
        e0 += xv[j] * xv[j]
    if e0 <= ENERGY_FLOOR:
        return out
    # running energy of the lagged window
    elag = 0.0
    for j in range(start + lag_min, start + lag_min + window):
        elag += xv[j] * xv[j]
    for i in range(n_lags):
        lag = lag_min + i
        if i > 0:
            elag += xv[start + lag - 1 + window] * xv[start + lag - 1 + window]
            elag -= xv[start + lag - 1] * xv[start + lag - 1]
        if elag > ENERGY_FLOOR:
            num = ddot(&w, base + start, &one, base + start + lag, &one)
            ov[i] = num / sqrt(e0 * elag)
    return out


def viterbi_path(cost):
    """Monotone min-cost frame-to-state path over a (T, N) cost matrix."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t T = c.shape[0]
    cdef Py_ssize_t N = c.shape[1]
    if T < N:
        raise ValueError(f"need at least as many frames as states ({T} < {N})")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dp = np.full(N, np.inf)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] advanced = np.zeros((T, N), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path = np.empty(T, dtype=np.int64)
    cdef double[:] dpv = dp
    cdef double[:, :] cv = c
    cdef cnp.uint8_t[:, :] av = advanced
    cdef cnp.int64_t[:] pv = path
    cdef Py_ssize_t t, n
    cdef double prev

    dpv[0] = cv[0, 0]
    for t in range(1, T):
        # sweep right-to-left so dpv[n-1] is still the previous frame's value
        for n in range(N - 1, 0, -1):
            prev = dpv[n - 1]
            if prev < dpv[n]:
                av[t, n] = 1
                dpv[n] = prev + cv[t, n]
            else:
                dpv[n] = dpv[n] + cv[t, n]
        dpv[0] = dpv[0] + cv[t, 0]
    n = N - 1
    for t in range(T - 1, 0, -1):
        pv[t] = n
        if av[t, n]:
            n -= 1
    pv[0] = n
    return path


def harmonic_synth(f0, amps, kmax, Py_ssize_t hop, double sample_rate,
                   double phase0):
    """Phase-accumulating harmonic synthesis; see the fallback for the contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.ascontiguousarray(f0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] km = np.ascontiguousarray(kmax, dtype=np.int64)
    cdef Py_ssize_t T = f.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.zeros(T * hop)
    cdef double[:] yv = y
    cdef double[:] fv = f
    cdef double[:, :] av = a
    cdef cnp.int64_t[:] kv = km
    cdef Py_ssize_t t, i, k, K
    cdef double phase = phase0, w, base, acc

    for t in range(T):
        K = kv[t]
        if fv[t] > 0.0 and K > 0:
            w = TWO_PI * fv[t] / sample_rate
            for i in range(hop):
                base = phase + i * w
                acc = 0.0
                for k in range(1, K + 1):
                    acc += sin(base * k) * av[t, k - 1]
                yv[t * hop + i] = acc
            phase = fmod(phase + hop * w, TWO_PI)
    return y, phase
