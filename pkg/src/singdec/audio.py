"""Mono WAV reading/writing and band-limited resampling.

Everything downstream works on float64 samples in [-1, 1] at a single fixed
rate, so this module is the only place that touches containers or rates.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import TruncatedWavError, UnsupportedWavError, ValidationError
from .util import iround

PCM16_SCALE = 32768.0

# Windowed-sinc resampler constants (Kaiser window). The filter spans
# RESAMPLE_TAPS_PER_PHASE taps per polyphase branch of the larger of the
# up/down factors; the cutoff sits at the smaller Nyquist, and beta is sized
# so the transition band stays inside the top 10% of the passband.
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 9.0


@dataclass
class AudioClip:
    """Mono sample sequence plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValidationError("AudioClip samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("AudioClip samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _parse_fmt_chunk(body: bytes):
    if len(body) < 16:
        raise TruncatedWavError("fmt chunk shorter than 16 bytes")
    fmt, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
    return fmt, channels, rate, bits


def read_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file (PCM16 or IEEE float32, mono or stereo).

    Stereo is averaged to mono; PCM16 values are scaled by 1/32768. Float
    samples outside [-1, 1] are clipped with a warning.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedWavError(f"{path}: not a RIFF file (too short)")
    if raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise UnsupportedWavError(f"{path}: missing RIFF/WAVE signature")

    fmt_info = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = raw[pos:pos + 4], struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise TruncatedWavError(
                f"{path}: chunk {cid!r} declares {size} bytes, {len(body)} present")
        if cid == b"fmt ":
            fmt_info = _parse_fmt_chunk(body)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt_info is None:
        raise UnsupportedWavError(f"{path}: no fmt chunk")
    if data is None:
        raise TruncatedWavError(f"{path}: no data chunk")
    fmt, channels, rate, bits = fmt_info
    if channels not in (1, 2):
        raise UnsupportedWavError(f"{path}: {channels} channels (only 1 or 2 supported)")

    if fmt == 1 and bits == 16:
        frames = np.frombuffer(data[:len(data) - len(data) % (2 * channels)],
                               dtype="<i2").astype(np.float64) / PCM16_SCALE
    elif fmt == 3 and bits == 32:
        frames = np.frombuffer(data[:len(data) - len(data) % (4 * channels)],
                               dtype="<f4").astype(np.float64)
        if np.any(np.abs(frames) > 1.0):
            warnings.warn(f"{path}: float samples beyond [-1, 1] clipped")
            frames = np.clip(frames, -1.0, 1.0)
    else:
        raise UnsupportedWavError(
            f"{path}: format {fmt} at {bits} bits (PCM16 or IEEE float32 only)")

    if channels == 2:
        frames = frames.reshape(-1, 2).mean(axis=1)
    return AudioClip(frames, rate)


def write_wav(clip: AudioClip, path) -> None:
    """Write a mono PCM16 WAV. Out-of-range samples saturate with a warning."""
    if len(clip) == 0:
        raise ValidationError("cannot write an empty clip")
    samples = clip.samples
    if np.any(np.abs(samples) > 1.0):
        warnings.warn(f"{path}: samples beyond [-1, 1] saturated before quantization")
        samples = np.clip(samples, -1.0, 1.0)
    pcm = np.clip(np.rint(samples * PCM16_SCALE), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate,
                                    clip.sample_rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(data))
    Path(path).write_bytes(header + data)


@lru_cache(maxsize=32)
def _resample_filter(up: int, down: int) -> np.ndarray:
    phases = max(up, down)
    half = (RESAMPLE_TAPS_PER_PHASE * phases) // 2
    n = np.arange(2 * half + 1, dtype=np.float64) - half
    cutoff = 0.5 / phases
    h = 2.0 * cutoff * np.sinc(2.0 * cutoff * n) * np.kaiser(2 * half + 1,
                                                             RESAMPLE_KAISER_BETA)
    # unity DC gain; resample_poly itself applies the `up` gain
    return h / h.sum()


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Polyphase windowed-sinc resampling to `target_rate`.

    Output length is round(len * target_rate / input_rate) with halves
    rounding up. A matching rate returns the input samples unchanged.
    """
    if int(target_rate) <= 0:
        raise ValidationError(f"target rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), target_rate)
    ratio = Fraction(target_rate, clip.sample_rate)
    up, down = ratio.numerator, ratio.denominator
    out = resample_poly(clip.samples, up, down, window=_resample_filter(up, down))
    n_out = iround(len(clip) * target_rate / clip.sample_rate)
    if len(out) < n_out:
        out = np.concatenate([out, np.zeros(n_out - len(out))])
    return AudioClip(out[:n_out], target_rate)


def mix(a: AudioClip, b: AudioClip, gain_a: float = 1.0,
        gain_b: float = 1.0) -> AudioClip:
    """Sample-wise weighted mix; the shorter clip is zero-padded.

    If the mix would clip, it is scaled down to peak at -1 dBFS.
    """
    if a.sample_rate != b.sample_rate:
        raise ValidationError(
            f"sample rates differ: {a.sample_rate} vs {b.sample_rate}")
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[:len(a)] = gain_a * a.samples
    out[:len(b)] += gain_b * b.samples
    peak = np.max(np.abs(out)) if n else 0.0
    if peak > 1.0:
        out *= 10.0 ** (-1.0 / 20.0) / peak
    return AudioClip(out, a.sample_rate)


def sine(frequency: float, duration: float, sample_rate: int = 22050,
         amplitude: float = 0.8) -> AudioClip:
    """Constant-frequency sine generator, handy for self-tests and demos."""
    n = int(math.floor(duration * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    return AudioClip(amplitude * np.sin(2.0 * np.pi * frequency * t), sample_rate)
