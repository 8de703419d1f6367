"""Monotonic forced alignment of mel frames to a phoneme sequence.

A segmental k-means aligner: flat-start uniform segmentation, then rounds of
(mean re-estimation, monotone Viterbi re-segmentation) against per-phoneme
mel envelope templates. The output alignment is hard (one row-stochastic
one-hot row per frame), which makes every downstream edit exactly checkable;
the file format also round-trips soft alignments produced elsewhere.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dsp import MelSpectrogram
from .errors import InvariantError, ValidationError
from .text import BLANK, SPACE, PhonemeSequence

ALIGNMENT_MAGIC = b"ALN1"
ROW_SUM_TOLERANCE = 1e-4

# Log-power envelopes the structural symbols are pinned to during alignment:
# both low enough to absorb silence, SPACE a notch above silence.
SPACE_LOG_OFFSET = 2.3  # ~10 dB above the floor


@dataclass(frozen=True)
class Span:
    """Half-open frame range [start, stop) owned by phoneme `phoneme`."""

    phoneme: int
    start: int
    stop: int

    @property
    def empty(self) -> bool:
        return self.stop <= self.start

    @property
    def length(self) -> int:
        return max(0, self.stop - self.start)


@dataclass
class Template:
    """Mean log-mel envelope for one phoneme, plus a voicing prior."""

    envelope: np.ndarray
    voicing: float = 0.0


def structural_templates(n_mels: int, floor_log: float) -> dict:
    """Pinned templates for BLANK (silence) and SPACE (near-silence)."""
    return {
        BLANK: Template(np.full(n_mels, floor_log), 0.0),
        SPACE: Template(np.full(n_mels, floor_log + SPACE_LOG_OFFSET), 0.0),
    }


def uniform_path(n_frames: int, n_phonemes: int) -> np.ndarray:
    """Flat-start segmentation: phoneme i covers [floor(iT/N), floor((i+1)T/N))."""
    return (np.arange(n_frames, dtype=np.int64) * n_phonemes) // n_frames


def _one_hot(path: np.ndarray, n_phonemes: int) -> np.ndarray:
    a = np.zeros((len(path), n_phonemes))
    a[np.arange(len(path)), path] = 1.0
    return a


def bootstrap_template_bank(mel: MelSpectrogram, seq: PhonemeSequence) -> dict:
    """Initial templates taken from the clip itself, under uniform segmentation.

    Structural symbols stay pinned to their silence envelopes so leading and
    trailing quiet aligns to them instead of distorting vowel spans.
    """
    path = uniform_path(mel.frames, len(seq))
    bank = {}
    for i, symbol in enumerate(seq.phonemes):
        rows = mel.data[path == i]
        if symbol in bank:
            bank[symbol] = np.vstack([bank[symbol], rows])
        else:
            bank[symbol] = rows
    out = {sym: Template(rows.mean(axis=0), 0.5)
           for sym, rows in bank.items() if len(rows)}
    out.update(structural_templates(mel.config.n_mels, mel.config.floor_log))
    return out


def _position_means(seq: PhonemeSequence, bank: dict, n_mels: int) -> np.ndarray:
    means = np.empty((len(seq), n_mels))
    for i, symbol in enumerate(seq.phonemes):
        if symbol not in bank:
            raise ValidationError(f"no template for phoneme: {symbol}")
        means[i] = bank[symbol].envelope
    return means


def _frame_costs(mel_data: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Squared euclidean distance between every frame and every position mean."""
    sq_f = np.sum(mel_data ** 2, axis=1)[:, None]
    sq_m = np.sum(means ** 2, axis=1)[None, :]
    return sq_f + sq_m - 2.0 * (mel_data @ means.T)


def force_align(mel: MelSpectrogram, seq: PhonemeSequence, bank: dict,
                iterations: int = 3, callback=None) -> np.ndarray:
    """Hard monotone alignment matrix, shape (frames, len(seq)).

    The first Viterbi pass segments against the given bank's envelopes;
    every following round re-estimates per-symbol means from the previous
    segmentation (structural symbols stay pinned) and re-segments. With a
    bank bootstrapped from the clip itself this is plain segmental k-means
    from a flat start. `callback(round, total_cost)` observes the descent;
    round 0 is the flat start scored with the given bank.
    """
    T, N = mel.frames, len(seq)
    if T < N:
        raise ValidationError(
            f"sequence of {N} phonemes needs at least {N} frames, clip has {T}")
    if iterations < 0:
        raise ValidationError("iterations must be >= 0")

    path = uniform_path(T, N)
    if iterations == 0:
        return _one_hot(path, N)

    pinned = structural_templates(mel.config.n_mels, mel.config.floor_log)
    means = _position_means(seq, bank, mel.config.n_mels)
    if callback is not None:
        cost = _frame_costs(mel.data, means)
        callback(0, float(cost[np.arange(T), path].sum()))

    for it in range(iterations):
        if it > 0:
            # re-estimate per-symbol means from the current segmentation
            new_means = means.copy()
            for symbol in set(seq.phonemes):
                positions = [i for i, s in enumerate(seq.phonemes)
                             if s == symbol]
                if symbol in pinned:
                    env = pinned[symbol].envelope
                else:
                    frames = mel.data[np.isin(path, positions)]
                    if len(frames) == 0:
                        continue
                    env = frames.mean(axis=0)
                new_means[positions] = env
            means = new_means
        # monotone re-segmentation
        cost = _frame_costs(mel.data, means)
        path = _kernels.viterbi_path(cost)
        if callback is not None:
            callback(it + 1, float(cost[np.arange(T), path].sum()))
    return _one_hot(path, N)


def segment_phonemes(alignment: np.ndarray) -> list:
    """Per-row argmax runs as spans; phonemes never winning get empty spans."""
    alignment = np.asarray(alignment, dtype=np.float64)
    T, N = alignment.shape
    winners = np.argmax(alignment, axis=1)
    if np.any(np.diff(winners) < 0):
        raise InvariantError("alignment argmax sequence is not monotone")

    spans = []
    t = 0
    for p in range(N):
        start = t
        while t < T and winners[t] == p:
            t += 1
        spans.append(Span(p, start, t))
    if t != T:
        raise InvariantError("alignment argmax runs do not cover all frames")
    return spans


def project_text(alignment: np.ndarray, encoding: np.ndarray) -> np.ndarray:
    """Frame-level linguistic features: alignment (T,N) x encoding (N,D)."""
    alignment = np.asarray(alignment, dtype=np.float64)
    encoding = np.asarray(encoding, dtype=np.float64)
    if alignment.ndim != 2 or encoding.ndim != 2 \
            or alignment.shape[1] != encoding.shape[0]:
        raise ValidationError(
            f"cannot multiply {alignment.shape} by {encoding.shape}")
    return alignment @ encoding


def validate_alignment(a: np.ndarray) -> None:
    """Row-stochastic within tolerance, entries in [0,1], monotone argmax."""
    if not np.all(np.isfinite(a)):
        raise ValidationError("alignment entries must be finite")
    if np.any(a < -1e-6) or np.any(a > 1.0 + 1e-6):
        raise ValidationError("alignment entries must lie in [0, 1]")
    sums = a.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
    if len(bad):
        raise ValidationError(
            f"alignment not row-stochastic: row {bad[0]} sums to {sums[bad[0]]:.6f}")
    if np.any(np.diff(np.argmax(a, axis=1)) < 0):
        raise ValidationError("alignment argmax sequence is not monotone")


def save_alignment(a: np.ndarray, path) -> None:
    """Binary format: 'ALN1', T and N as u32 little-endian, float32 row-major."""
    a = np.asarray(a)
    validate_alignment(a)
    T, N = a.shape
    payload = ALIGNMENT_MAGIC + struct.pack("<II", T, N)
    payload += a.astype("<f4").tobytes()
    Path(path).write_bytes(payload)


def load_alignment(path) -> np.ndarray:
    """Read an 'ALN1' file; invariants are re-checked on load."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ValidationError(f"{path}: truncated alignment file")
    if raw[:4] != ALIGNMENT_MAGIC:
        raise ValidationError(f"{path}: bad alignment magic {raw[:4]!r}")
    T, N = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * T * N
    if len(raw) < expected:
        raise ValidationError(
            f"{path}: alignment declares {T}x{N}, file too short")
    a = np.frombuffer(raw[12:expected], dtype="<f4").reshape(T, N).astype(np.float64)
    validate_alignment(a)
    return a
