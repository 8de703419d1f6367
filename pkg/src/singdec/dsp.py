"""Spectral analysis and reconstruction.

Provides the STFT front end, the 80-band log-mel representation used as the
acoustic working format, Griffin-Lim inversion back to audio, grayscale
spectrogram images, and a per-band difference report for inspecting
reconstruction artifacts.

Conventions (all declared here so tests can rely on them):

* frames are taken every `hop` samples from a reflect-padded signal, so the
  frame count is always ``1 + len(x) // hop`` and frame t is centered on
  sample ``t * hop``;
* the analysis window is a periodic Hann of `window_size` samples, centered
  inside `fft_size`;
* mel energies are power (magnitude squared) pooled by Slaney-style
  area-normalized triangular filters, then natural-log compressed with the
  linear floor `log_floor`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioClip
from .errors import ValidationError


@dataclass(frozen=True)
class DspConfig:
    """STFT and mel filterbank parameters."""

    fft_size: int = 1024
    window_size: int = 1024
    hop: int = 256
    n_mels: int = 80
    sample_rate: int = 22050
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if not (0 < self.window_size <= self.fft_size):
            raise ValidationError("need 0 < window_size <= fft_size")
        if not (0 < self.hop <= self.window_size):
            raise ValidationError("need 0 < hop <= window_size")
        if self.n_mels < 1:
            raise ValidationError("need at least one mel band")
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise ValidationError("need 0 <= fmin < fmax <= sample_rate/2")
        if self.log_floor <= 0:
            raise ValidationError("log_floor must be positive")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def floor_log(self) -> float:
        return float(np.log(self.log_floor))


@dataclass
class MelSpectrogram:
    """frames x n_mels matrix of natural-log mel power."""

    data: np.ndarray
    config: DspConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != self.config.n_mels:
            raise ValidationError(
                f"mel data must be (frames, {self.config.n_mels})")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("mel data must be finite")
        if self.data.size and self.data.min() < self.config.floor_log - 1e-9:
            raise ValidationError("mel data below the configured log floor")

    @property
    def frames(self) -> int:
        return self.data.shape[0]


@dataclass
class ArtifactReport:
    """Per-band mean absolute log-power difference between two spectrograms."""

    band_delta: np.ndarray
    flagged_bands: tuple
    threshold: float


def frame_count(n_samples: int, hop: int) -> int:
    return 1 + n_samples // hop


def hann_window(size: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(size) / size)


@lru_cache(maxsize=8)
def _padded_window(cfg: DspConfig) -> np.ndarray:
    w = hann_window(cfg.window_size)
    if cfg.window_size == cfg.fft_size:
        return w
    out = np.zeros(cfg.fft_size)
    lo = (cfg.fft_size - cfg.window_size) // 2
    out[lo:lo + cfg.window_size] = w
    return out


def _frame(padded: np.ndarray, n_frames: int, cfg: DspConfig) -> np.ndarray:
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft(clip: AudioClip, cfg: DspConfig = DspConfig()) -> np.ndarray:
    """Complex spectrogram, shape (frames, fft_size // 2 + 1)."""
    if clip.sample_rate != cfg.sample_rate:
        raise ValidationError(
            f"clip rate {clip.sample_rate} != config rate {cfg.sample_rate}")
    if len(clip) < 1:
        raise ValidationError("cannot analyze an empty clip")
    pad = cfg.fft_size // 2
    padded = np.pad(clip.samples, pad, mode="reflect")
    n_frames = frame_count(len(clip), cfg.hop)
    frames = _frame(padded, n_frames, cfg) * _padded_window(cfg)
    return np.fft.rfft(frames, n=cfg.fft_size, axis=1)


def _hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3.0
    logstep = np.log(6.4) / 27.0
    return np.where(f >= 1000.0,
                    15.0 + np.log(np.maximum(f, 1e-12) / 1000.0) / logstep,
                    f / f_sp)


def _mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3.0
    logstep = np.log(6.4) / 27.0
    return np.where(m >= 15.0, 1000.0 * np.exp(logstep * (m - 15.0)), f_sp * m)


@lru_cache(maxsize=8)
def _mel_points(cfg: DspConfig) -> np.ndarray:
    mels = np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    return _mel_to_hz(mels)


def mel_center_frequencies(cfg: DspConfig = DspConfig()) -> np.ndarray:
    """Center frequency in Hz of each triangular filter."""
    return _mel_points(cfg)[1:-1].copy()


@lru_cache(maxsize=8)
def mel_filterbank(cfg: DspConfig = DspConfig()) -> np.ndarray:
    """(n_mels, n_bins) area-normalized triangular filter matrix."""
    pts = _mel_points(cfg)
    bin_freqs = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size
    lower = pts[:-2][:, None]
    center = pts[1:-1][:, None]
    upper = pts[2:][:, None]
    rising = (bin_freqs[None, :] - lower) / (center - lower)
    falling = (upper - bin_freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb *= (2.0 / (upper - lower))
    return fb


def mel_spectrogram(clip: AudioClip, cfg: DspConfig = DspConfig()) -> MelSpectrogram:
    """80-band natural-log mel power spectrogram of a clip."""
    power = np.abs(stft(clip, cfg)) ** 2
    mel_power = power @ mel_filterbank(cfg).T
    return MelSpectrogram(np.log(np.maximum(mel_power, cfg.log_floor)), cfg)


def _istft(spec: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Least-squares overlap-add inverse of `_frame`-domain spectra.

    Returns the padded-domain signal of length (frames-1)*hop + fft_size.
    """
    window = _padded_window(cfg)
    frames = np.fft.irfft(spec, n=cfg.fft_size, axis=1) * window
    n_frames = spec.shape[0]
    out = np.zeros((n_frames - 1) * cfg.hop + cfg.fft_size)
    norm = np.zeros_like(out)
    wsq = window * window
    for t in range(n_frames):
        lo = t * cfg.hop
        out[lo:lo + cfg.fft_size] += frames[t]
        norm[lo:lo + cfg.fft_size] += wsq
    good = norm > 1e-12
    out[good] /= norm[good]
    return out


def _stft_of_padded(padded: np.ndarray, n_frames: int, cfg: DspConfig) -> np.ndarray:
    frames = _frame(padded, n_frames, cfg) * _padded_window(cfg)
    return np.fft.rfft(frames, n=cfg.fft_size, axis=1)


def mel_to_magnitude(mel: MelSpectrogram) -> np.ndarray:
    """Approximate linear magnitude via the filterbank pseudo-inverse."""
    fb = mel_filterbank(mel.config)
    power = np.exp(mel.data) @ np.linalg.pinv(fb).T
    return np.sqrt(np.maximum(power, 0.0))


def _progressive_phase(target: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Single-pass phase estimate used to initialize the projection loop.

    Each frame's spectral peaks get a parabolic frequency refinement; the
    peak's phase advances from the previous frame by the refined frequency
    times the hop, and the bins between surrounding valleys follow their
    peak. Deterministic, and a far better starting point for tonal content
    than zero phase, which parks tones at bin-center frequencies.
    """
    n_frames, n_bins = target.shape
    phases = np.zeros((n_frames, n_bins))
    accumulated = np.zeros(n_bins)
    two_pi_hop = 2.0 * np.pi * cfg.hop / cfg.fft_size
    for t in range(n_frames):
        m = target[t]
        interior = (m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])
        peaks = np.nonzero(interior)[0] + 1
        if len(peaks) == 0:
            phases[t] = accumulated
            continue
        new_acc = accumulated.copy()
        boundaries = np.empty(len(peaks) + 1, dtype=int)
        boundaries[0], boundaries[-1] = 0, n_bins
        for i in range(len(peaks) - 1):
            lo, hi = peaks[i], peaks[i + 1]
            boundaries[i + 1] = lo + int(np.argmin(m[lo:hi]))
        for i, k in enumerate(peaks):
            denom = m[k - 1] - 2.0 * m[k] + m[k + 1]
            shift = 0.5 * (m[k - 1] - m[k + 1]) / denom if denom < 0 else 0.0
            advance = (k + shift) * two_pi_hop
            new_acc[boundaries[i]:boundaries[i + 1]] = accumulated[k] + advance
        accumulated = new_acc
        phases[t] = accumulated
    return phases


def griffin_lim(mel_or_mag, iterations: int, cfg: DspConfig | None = None,
                callback=None) -> AudioClip:
    """Recover audio from a mel spectrogram or a linear magnitude spectrogram.

    Alternating projection between the consistent-spectrogram set and the
    target-magnitude set, starting from zero phase (deterministic). The
    squared error between the target magnitude and the running estimate's
    magnitude is non-increasing; `callback(iteration, objective)` observes it.

    Parameters
    ----------
    mel_or_mag : MelSpectrogram or (frames, n_bins) magnitude array
    iterations : number of projection rounds, >= 1
    cfg : required when passing a bare magnitude array
    """
    if isinstance(mel_or_mag, MelSpectrogram):
        cfg = mel_or_mag.config
        target = mel_to_magnitude(mel_or_mag)
    else:
        cfg = cfg or DspConfig()
        target = np.asarray(mel_or_mag, dtype=np.float64)
        if target.ndim != 2 or target.shape[1] != cfg.n_bins:
            raise ValidationError(f"magnitude must be (frames, {cfg.n_bins})")
    if target.shape[0] == 0:
        raise ValidationError("cannot invert an empty spectrogram")
    if iterations < 1:
        raise ValidationError("need at least one iteration")

    n_frames = target.shape[0]
    spec = target * np.exp(1j * _progressive_phase(target, cfg))
    signal = _istft(spec, cfg)
    for it in range(iterations):
        estimate = _stft_of_padded(signal, n_frames, cfg)
        mag = np.abs(estimate)
        if callback is not None:
            callback(it, float(np.sum((target - mag) ** 2)))
        phase = np.where(mag > 1e-12, estimate / np.where(mag > 1e-12, mag, 1.0), 1.0)
        signal = _istft(target * phase, cfg)

    pad = cfg.fft_size // 2
    return AudioClip(signal[pad:pad + n_frames * cfg.hop], cfg.sample_rate)


def render_spectrogram_image(mel: MelSpectrogram, path) -> None:
    """8-bit grayscale PNG: one column per frame, low band at the bottom.

    Intensity is linear min-max over the whole matrix; a constant input maps
    to mid-gray (0.5).
    """
    from PIL import Image

    if mel.frames == 0:
        raise ValidationError("cannot render an empty spectrogram")
    lo, hi = float(mel.data.min()), float(mel.data.max())
    if hi > lo:
        norm = (mel.data - lo) / (hi - lo)
    else:
        norm = np.full_like(mel.data, 0.5)
    pixels = np.floor(norm * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(pixels.T[::-1], mode="L").save(path, format="PNG")


def artifact_report(a: MelSpectrogram, b: MelSpectrogram,
                    threshold: float) -> ArtifactReport:
    """Flag mel bands whose mean absolute log-power difference exceeds `threshold`."""
    if a.data.shape != b.data.shape:
        raise ValidationError(
            f"spectrogram shapes differ: {a.data.shape} vs {b.data.shape}")
    delta = np.mean(np.abs(a.data - b.data), axis=0)
    flagged = tuple(int(i) for i in np.nonzero(delta > threshold)[0])
    return ArtifactReport(delta, flagged, threshold)
