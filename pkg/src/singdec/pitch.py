"""RAPT-style fundamental frequency estimation and pitch edits.

Per-frame candidates come from the normalized cross-correlation function
(NCCF); a dynamic program with an explicit unvoiced state picks the track.
Frames are locked to the mel hop (one F0 value per mel frame, centered on
the same sample), so contours align index-for-index with spectrograms.

The estimator runs two passes for speed: candidate lags are located on a 4x
decimated signal, then refined at the full rate. `compute_nccf` is the
single-pass full-rate statistic, kept both as a public probe and as the
oracle the two-pass path is tested against.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .audio import AudioClip
from .errors import ValidationError

ANALYSIS_RATE = 22050
DECIMATION = 4
COARSE_THRESHOLD_RATIO = 0.8
REFINE_HALF_WIDTH = 6  # full-rate lags searched around each coarse peak


@dataclass(frozen=True)
class RaptConfig:
    """Estimator parameters. Defaults follow common RAPT practice."""

    f0_min: float = 60.0
    f0_max: float = 1000.0
    frame_step: int = 256          # locked to the mel hop
    nccf_window: int = 551         # ~25 ms at 22050 Hz
    voicing_bias: float = 0.2      # per-frame cost of staying unvoiced
    transition_cost_weight: float = 0.35   # cost per octave of voiced jump
    candidates_per_frame: int = 12
    nccf_threshold: float = 0.3
    octave_bias: float = 0.02      # small preference for shorter lags

    def __post_init__(self):
        if not (0 < self.f0_min < self.f0_max <= ANALYSIS_RATE / 2):
            raise ValidationError("need 0 < f0_min < f0_max <= rate/2")
        if self.frame_step <= 0 or self.nccf_window <= 0:
            raise ValidationError("frame_step and nccf_window must be positive")
        if self.candidates_per_frame < 1:
            raise ValidationError("need at least one candidate per frame")

    def lag_bounds(self, sample_rate: int):
        return (int(math.floor(sample_rate / self.f0_max)),
                int(math.ceil(sample_rate / self.f0_min)))


def _padded_signal(samples: np.ndarray, window: int, lag_max: int):
    """Zero-pad so any window centered on a frame sample stays in bounds."""
    head = window
    pad = np.concatenate([np.zeros(head), samples, np.zeros(window + lag_max)])
    return pad, head


def _parabolic_refine(corrs: np.ndarray, i: int):
    """Fractional peak position and height from three points around i."""
    left, mid, right = corrs[i - 1], corrs[i], corrs[i + 1]
    denom = left - 2.0 * mid + right
    if denom >= 0.0 or abs(denom) < 1e-12:
        return 0.0, mid
    shift = 0.5 * (left - right) / denom
    height = mid - 0.25 * (left - right) * shift
    return float(shift), float(min(height, 1.0))


def _peaks_to_candidates(corrs, lag_min, threshold, sample_rate, cfg):
    """Local maxima above threshold -> (fractional lag, correlation) list."""
    out = []
    interior = np.nonzero(
        (corrs[1:-1] > corrs[:-2]) & (corrs[1:-1] >= corrs[2:])
        & (corrs[1:-1] > threshold))[0] + 1
    for i in interior:
        shift, height = _parabolic_refine(corrs, i)
        lag = lag_min + i + shift
        f0 = sample_rate / lag
        if cfg.f0_min <= f0 <= cfg.f0_max:
            out.append((lag, height))
    return out


def compute_nccf(clip: AudioClip, frame_index: int,
                 cfg: RaptConfig = RaptConfig()) -> list:
    """Full-rate NCCF candidates for one frame.

    The frame is centered on sample frame_index*frame_step. Returns up to
    `candidates_per_frame` (lag, correlation) pairs, lags fractional via
    parabolic interpolation, sorted by correlation descending. An all-zero
    frame has no candidates.
    """
    n_frames = 1 + len(clip) // cfg.frame_step
    if not (0 <= frame_index < n_frames):
        raise ValidationError(
            f"frame {frame_index} out of bounds (clip has {n_frames} frames)")
    lag_min, lag_max = cfg.lag_bounds(clip.sample_rate)
    padded, head = _padded_signal(clip.samples, cfg.nccf_window, lag_max)
    start = frame_index * cfg.frame_step - cfg.nccf_window // 2 + head
    corrs = _kernels.nccf(padded, start, cfg.nccf_window, lag_min, lag_max)
    cands = _peaks_to_candidates(corrs, lag_min, cfg.nccf_threshold,
                                 clip.sample_rate, cfg)
    cands.sort(key=lambda c: -c[1])
    return cands[:cfg.candidates_per_frame]


def _two_pass_candidates(samples, sample_rate, n_frames, cfg):
    """Per-frame candidate lists via decimated scan plus full-rate refinement."""
    lag_min, lag_max = cfg.lag_bounds(sample_rate)
    padded, head = _padded_signal(samples, cfg.nccf_window, lag_max)

    dec = samples[:len(samples) - len(samples) % DECIMATION]
    dec = dec.reshape(-1, DECIMATION).mean(axis=1)
    window_d = max(32, cfg.nccf_window // DECIMATION)
    lag_min_d = max(2, lag_min // DECIMATION)
    lag_max_d = int(math.ceil(lag_max / DECIMATION))
    padded_d, head_d = _padded_signal(dec, window_d, lag_max_d)
    coarse_thr = COARSE_THRESHOLD_RATIO * cfg.nccf_threshold

    all_candidates = []
    for t in range(n_frames):
        center = t * cfg.frame_step
        start_d = center // DECIMATION - window_d // 2 + head_d
        coarse = _kernels.nccf(padded_d, start_d, window_d, lag_min_d, lag_max_d)
        peaks = np.nonzero(
            (coarse[1:-1] > coarse[:-2]) & (coarse[1:-1] >= coarse[2:])
            & (coarse[1:-1] > coarse_thr))[0] + 1 + lag_min_d

        cands = {}
        start = center - cfg.nccf_window // 2 + head
        for lag_d in peaks:
            lo = max(lag_min, lag_d * DECIMATION - REFINE_HALF_WIDTH)
            hi = min(lag_max, lag_d * DECIMATION + REFINE_HALF_WIDTH)
            if hi - lo < 2:
                continue
            corrs = _kernels.nccf(padded, start, cfg.nccf_window, lo, hi)
            for lag, corr in _peaks_to_candidates(corrs, lo, cfg.nccf_threshold,
                                                  sample_rate, cfg):
                key = round(lag)
                if key not in cands or corr > cands[key][1]:
                    cands[key] = (lag, corr)
        ranked = sorted(cands.values(), key=lambda c: -c[1])
        all_candidates.append(ranked[:cfg.candidates_per_frame])
    return all_candidates


def _select_track(candidates, sample_rate, cfg):
    """Dynamic program over per-frame candidates plus an unvoiced state.

    Local cost: (1 - correlation) + octave_bias * log2(lag / lag_min) for a
    voiced candidate, voicing_bias for unvoiced. Transition cost between
    voiced states: transition_cost_weight * |log2(f_t / f_{t-1})|.
    """
    lag_min, _ = cfg.lag_bounds(sample_rate)
    n_frames = len(candidates)
    states = []       # per frame: list of f0 values, 0.0 = unvoiced
    local_costs = []
    for cands in candidates:
        f0s = [0.0]
        costs = [cfg.voicing_bias]
        for lag, corr in cands:
            f0s.append(sample_rate / lag)
            costs.append((1.0 - corr)
                         + cfg.octave_bias * math.log2(lag / lag_min))
        states.append(f0s)
        local_costs.append(costs)

    total = [list(local_costs[0])]
    back = [[-1] * len(states[0])]
    w = cfg.transition_cost_weight
    for t in range(1, n_frames):
        prev_f, prev_c = states[t - 1], total[t - 1]
        row_c, row_b = [], []
        for f in states[t]:
            best, best_j = math.inf, 0
            for j, (pf, pc) in enumerate(zip(prev_f, prev_c)):
                c = pc
                if f > 0.0 and pf > 0.0:
                    c += w * abs(math.log2(f / pf))
                if c < best:
                    best, best_j = c, j
            row_c.append(best)
            row_b.append(best_j)
        total.append([rc + lc for rc, lc in zip(row_c, local_costs[t])])
        back.append(row_b)

    track = np.zeros(n_frames)
    j = int(np.argmin(total[-1]))
    for t in range(n_frames - 1, -1, -1):
        track[t] = states[t][j]
        j = back[t][j]
    return track


def estimate_f0(clip: AudioClip, cfg: RaptConfig = RaptConfig()) -> np.ndarray:
    """Per-frame F0 in Hz (0 = unvoiced), one value per mel frame."""
    if clip.sample_rate != ANALYSIS_RATE:
        raise ValidationError(
            f"estimator expects {ANALYSIS_RATE} Hz, got {clip.sample_rate}")
    if len(clip) < cfg.nccf_window:
        raise ValidationError(
            f"clip of {len(clip)} samples shorter than one "
            f"analysis window ({cfg.nccf_window})")
    n_frames = 1 + len(clip) // cfg.frame_step
    candidates = _two_pass_candidates(clip.samples, clip.sample_rate,
                                      n_frames, cfg)
    return _select_track(candidates, clip.sample_rate, cfg)


def shift_semitones(contour: np.ndarray, semitones: float,
                    f0_max: float = RaptConfig().f0_max) -> np.ndarray:
    """Scale voiced values by 2^(semitones/12); zeros stay zero.

    Values pushed past `f0_max` are clamped there with a warning.
    """
    contour = np.asarray(contour, dtype=np.float64)
    out = contour * (2.0 ** (semitones / 12.0))
    out[contour == 0.0] = 0.0
    over = out > f0_max
    if np.any(over):
        warnings.warn(f"{int(over.sum())} shifted values clamped at {f0_max} Hz")
        out[over] = f0_max
    return out


def zero_pitch(contour: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Set frames [start, stop) to unvoiced; everything else unchanged."""
    contour = np.asarray(contour, dtype=np.float64)
    if not (0 <= start <= stop <= len(contour)):
        raise ValidationError(
            f"span [{start}, {stop}) outside contour of length {len(contour)}")
    out = contour.copy()
    out[start:stop] = 0.0
    return out


def save_contour(contour: np.ndarray, path) -> None:
    """CSV export: header line, then `frame_index,f0_hz` per frame."""
    lines = ["frame_index,f0_hz"]
    lines.extend(f"{i},{repr(float(v))}" for i, v in enumerate(contour))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_contour(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != "frame_index,f0_hz":
        raise ValidationError(f"{path}: missing contour CSV header")
    values = []
    for n, line in enumerate(text[1:]):
        if not line.strip():
            continue
        idx, value = line.split(",")
        if int(idx) != len(values):
            raise ValidationError(f"{path}: non-consecutive frame index on line {n + 2}")
        values.append(float(value))
    return np.asarray(values, dtype=np.float64)
