"""Deterministic rendering: attribute assembly and harmonic-plus-noise audio.

`assemble_frames` turns an edited decomposition back into a mel spectrogram;
`synthesize` renders a mel spectrogram plus pitch contour to audio. Voiced
frames are a phase-continuous stack of sinusoids at multiples of F0 with
amplitudes read off the mel envelope; unvoiced frames are envelope-shaped
noise built from random-phase spectra (seeded 64-bit LCG), so repeated runs
are bitwise identical.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .align import Template, segment_phonemes
from .audio import AudioClip
from .dsp import DspConfig, MelSpectrogram, _istft, mel_center_frequencies
from .errors import ValidationError
from .text import BLANK, BLANK_INDEX, INVENTORY, SYMBOL_INDEX, PhonemeSequence

TEMPLATE_MAGIC = b"TPL1"

# Knuth's MMIX linear congruential constants; states consumed row-major
# (frame-major) when drawing noise phases.
LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
LCG_MASK = (1 << 64) - 1

NOISE_GAIN = 4.0          # scales the stochastic component against harmonics
NOISE_SMOOTH_BANDS = 9    # boxcar over band powers before shaping noise
TILT_PIVOT_HZ = 1000.0    # spectral tilt is zero at this frequency


@dataclass(frozen=True)
class SynthConfig:
    """Renderer parameters."""

    max_harmonics: int = 60
    noise_floor_db: float = -60.0
    voiced_noise_mix: float = 0.15
    render_mode: str = "resynthesis"   # or "template"
    noise_seed: int = 20210607

    def __post_init__(self):
        if self.max_harmonics < 1:
            raise ValidationError("need at least one harmonic")
        if not (0.0 <= self.voiced_noise_mix <= 1.0):
            raise ValidationError("voiced_noise_mix must lie in [0, 1]")
        if self.render_mode not in ("resynthesis", "template"):
            raise ValidationError(f"unknown render mode: {self.render_mode}")


def extract_template_bank(mel: MelSpectrogram, alignment: np.ndarray,
                          seq: PhonemeSequence, contour=None) -> dict:
    """Per-phoneme mean envelopes over argmax spans.

    The voicing prior is the voiced fraction of the pooled frames when a
    contour is supplied. BLANK is always the floor envelope with voicing 0;
    phonemes that never win a frame get no template, and later lookups fail
    naming them.
    """
    alignment = np.asarray(alignment, dtype=np.float64)
    if alignment.shape != (mel.frames, len(seq)):
        raise ValidationError(
            f"alignment {alignment.shape} does not match "
            f"{mel.frames} frames x {len(seq)} phonemes")
    if contour is not None and len(contour) != mel.frames:
        raise ValidationError("contour length does not match frame count")

    pooled: dict = {}
    for span in segment_phonemes(alignment):
        if span.empty:
            continue
        symbol = seq.phonemes[span.phoneme]
        pooled.setdefault(symbol, []).append((span.start, span.stop))

    bank = {}
    for symbol, ranges in pooled.items():
        frames = np.vstack([mel.data[a:b] for a, b in ranges])
        voicing = 0.0
        if contour is not None:
            voiced = np.concatenate([np.asarray(contour[a:b]) > 0
                                     for a, b in ranges])
            voicing = float(voiced.mean())
        bank[symbol] = Template(frames.mean(axis=0), voicing)
    bank[BLANK] = Template(np.full(mel.config.n_mels, mel.config.floor_log), 0.0)
    return bank


def save_template_bank(bank: dict, path) -> None:
    """Binary format: 'TPL1', u32 count, u32 n_mels, then per symbol a u16
    length-prefixed name, float32 envelope, float32 voicing."""
    symbols = sorted(bank)
    n_mels = len(bank[symbols[0]].envelope)
    payload = TEMPLATE_MAGIC + struct.pack("<II", len(symbols), n_mels)
    for symbol in symbols:
        raw = symbol.encode("utf-8")
        payload += struct.pack("<H", len(raw)) + raw
        payload += bank[symbol].envelope.astype("<f4").tobytes()
        payload += struct.pack("<f", bank[symbol].voicing)
    Path(path).write_bytes(payload)


def load_template_bank(path) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != TEMPLATE_MAGIC:
        raise ValidationError(f"{path}: not a template bank file")
    count, n_mels = struct.unpack("<II", raw[4:12])
    pos = 12
    bank = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", raw[pos:pos + 2])
        pos += 2
        symbol = raw[pos:pos + name_len].decode("utf-8")
        pos += name_len
        envelope = np.frombuffer(raw[pos:pos + 4 * n_mels], dtype="<f4")
        if len(envelope) < n_mels:
            raise ValidationError(f"{path}: truncated template bank")
        pos += 4 * n_mels
        (voicing,) = struct.unpack("<f", raw[pos:pos + 4])
        pos += 4
        bank[symbol] = Template(envelope.astype(np.float64), float(voicing))
    return bank


def _template_matrix(bank: dict, needed: set, n_mels: int,
                     floor_log: float) -> np.ndarray:
    """(inventory, n_mels) envelope matrix; fails on a needed missing symbol."""
    matrix = np.full((len(INVENTORY), n_mels), floor_log)
    for symbol in needed:
        if symbol not in bank:
            raise ValidationError(f"missing template for phoneme: {symbol}")
        matrix[SYMBOL_INDEX[symbol]] = bank[symbol].envelope
    return matrix


def _apply_timbre(data: np.ndarray, timbre, cfg: DspConfig) -> np.ndarray:
    """Frequency-axis warp plus spectral tilt, in the log-mel domain."""
    centers = mel_center_frequencies(cfg)
    if timbre.formant_warp != 1.0:
        source = np.interp(centers / timbre.formant_warp, centers,
                           np.arange(cfg.n_mels, dtype=np.float64))
        i0 = np.floor(source).astype(int)
        frac = source - i0
        i1 = np.minimum(i0 + 1, cfg.n_mels - 1)
        data = data[:, i0] * (1.0 - frac) + data[:, i1] * frac
    if timbre.spectral_tilt != 0.0:
        octaves = np.log2(np.maximum(centers, 1.0) / TILT_PIVOT_HZ)
        data = data + timbre.spectral_tilt * octaves * (np.log(10.0) / 10.0)
    return data


def assemble_frames(decomp, bank: dict, cfg: SynthConfig) -> MelSpectrogram:
    """Mel spectrogram realizing the decomposition's current attributes.

    resynthesis mode starts from the decomposition's own source envelopes and
    overrides only frames whose linguistic content was edited: BLANK-dominant
    frames become the floor envelope, substituted phonemes take the template
    envelope blended by alignment weight. template mode renders every frame
    from templates alone. Identical inputs give bitwise-identical output.
    """
    decomp.validate()
    mel_cfg = decomp.mel_source.config
    floor = mel_cfg.floor_log
    ling = decomp.frame_linguistic

    if cfg.render_mode == "template":
        needed = {INVENTORY[i] for i in np.nonzero(ling.max(axis=0) > 1e-12)[0]}
        data = ling @ _template_matrix(bank, needed, mel_cfg.n_mels, floor)
    else:
        data = decomp.mel_source.data.copy()
        positions = np.argmax(decomp.alignment, axis=1)
        blank_rows = np.argmax(ling, axis=1) == BLANK_INDEX
        current = decomp.phonemes.phonemes
        original = decomp.phonemes_source.phonemes
        changed = np.array([current[p] != original[p] for p in positions])
        substituted = changed & ~blank_rows
        if np.any(substituted):
            needed = {INVENTORY[i] for i in
                      np.nonzero(ling[substituted].max(axis=0) > 1e-12)[0]}
            matrix = _template_matrix(bank, needed, mel_cfg.n_mels, floor)
            data[substituted] = ling[substituted] @ matrix
        data[blank_rows] = floor

    data = _apply_timbre(data, decomp.timbre, mel_cfg)
    return MelSpectrogram(np.maximum(data, floor), mel_cfg)


def _lcg_uniforms(seed: int, rows: int, cols: int) -> np.ndarray:
    """(rows, cols) uniforms in [0, 1) from one LCG stream, row-major order."""
    a_pow = np.empty(cols, dtype=np.uint64)
    c_acc = np.empty(cols, dtype=np.uint64)
    a, c = 1, 0
    for k in range(cols):
        a_pow[k] = a
        c_acc[k] = c
        a = (a * LCG_A) & LCG_MASK
        c = (c * LCG_A + LCG_C) & LCG_MASK
    row_jump_a, row_jump_c = a, c

    states = np.empty((rows, cols), dtype=np.uint64)
    s = (seed * LCG_A + LCG_C) & LCG_MASK
    for r in range(rows):
        states[r] = a_pow * np.uint64(s) + c_acc
        s = (row_jump_a * s + row_jump_c) & LCG_MASK
    return (states >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _noise_band_amps(data: np.ndarray) -> np.ndarray:
    """Band amplitudes for the noise path: power smoothed across bands.

    Whisper is the vocal tract without glottal periodicity, so the noise
    excitation follows a smoothed envelope; without the smoothing, harmonic
    comb structure in the envelope would make the noise itself periodic.
    """
    power = np.exp(data)
    half = NOISE_SMOOTH_BANDS // 2
    padded = np.pad(power, ((0, 0), (half, half)), mode="edge")
    kernel = np.ones(NOISE_SMOOTH_BANDS) / NOISE_SMOOTH_BANDS
    smoothed = np.apply_along_axis(
        lambda row: np.convolve(row, kernel, mode="valid"), 1, padded)
    return np.sqrt(smoothed)


def _band_amp_interp(band_amps: np.ndarray, cfg: DspConfig):
    """Vectorized linear interpolation of band amplitudes onto FFT bins."""
    centers = mel_center_frequencies(cfg)
    bin_freqs = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size
    floor_amp = np.exp(cfg.floor_log / 2.0)
    out = np.empty((band_amps.shape[0], cfg.n_bins))
    for t in range(band_amps.shape[0]):
        out[t] = np.interp(bin_freqs, centers, band_amps[t],
                           left=band_amps[t][0], right=floor_amp)
    return out


def synthesize(mel: MelSpectrogram, contour, cfg: SynthConfig = SynthConfig(),
               dsp_cfg: DspConfig | None = None,
               breathiness: float = 0.0) -> AudioClip:
    """Render audio of length frames*hop from a mel spectrogram and contour."""
    dsp_cfg = dsp_cfg or mel.config
    contour = np.asarray(contour, dtype=np.float64)
    if len(contour) != mel.frames:
        raise ValidationError(
            f"contour has {len(contour)} frames, mel has {mel.frames}")
    sr, hop = dsp_cfg.sample_rate, dsp_cfg.hop
    nyquist = sr / 2.0
    T = mel.frames
    centers = mel_center_frequencies(dsp_cfg)
    band_amps = np.exp(mel.data / 2.0)
    floor_amp = np.exp(dsp_cfg.floor_log / 2.0)

    # harmonic component: amplitudes sampled from the envelope at k*F0
    kmax = np.zeros(T, dtype=np.int64)
    voiced = contour > 0.0
    kmax[voiced] = np.minimum(cfg.max_harmonics,
                              np.ceil(nyquist / contour[voiced]).astype(np.int64) - 1)
    kmax = np.maximum(kmax, 0)
    k_global = max(1, int(kmax.max()))
    amps = np.zeros((T, k_global))
    for t in np.nonzero(voiced & (kmax > 0))[0]:
        freqs = contour[t] * np.arange(1, kmax[t] + 1)
        amps[t, :kmax[t]] = np.interp(freqs, centers, band_amps[t],
                                      left=band_amps[t][0], right=floor_amp)
    harmonic, _ = _kernels.harmonic_synth(contour, amps, kmax, hop, sr, 0.0)

    # stochastic component: random-phase spectra shaped by the envelope
    mags = _band_amp_interp(_noise_band_amps(mel.data), dsp_cfg)
    mags = np.maximum(mags, 10.0 ** (cfg.noise_floor_db / 20.0))
    phases = 2.0 * np.pi * _lcg_uniforms(cfg.noise_seed, T, dsp_cfg.n_bins)
    phases[:, 0] = 0.0
    phases[:, -1] = 0.0
    spec = mags * np.exp(1j * phases)
    pad = dsp_cfg.fft_size // 2
    noise = _istft(spec, dsp_cfg)[pad:pad + T * hop] * NOISE_GAIN

    mix = min(1.0, max(0.0, cfg.voiced_noise_mix + breathiness))
    noise_gain = np.where(voiced, mix, 1.0)
    harm_gain = np.where(voiced, 1.0 - mix, 0.0)
    samples = (np.repeat(harm_gain, hop) * harmonic
               + np.repeat(noise_gain, hop) * noise)
    return AudioClip(samples, sr)


def render_decomposition(decomp, bank: dict,
                         cfg: SynthConfig = SynthConfig()):
    """Assemble the mel for a decomposition and render it to audio."""
    mel = assemble_frames(decomp, bank, cfg)
    clip = synthesize(mel, decomp.contour, cfg,
                      breathiness=decomp.timbre.breathiness)
    return mel, clip
