"""Shared fixtures: synthetic clips and a fully known 'mini song'."""
import numpy as np
import pytest

from singdec.align import segment_phonemes
from singdec.audio import AudioClip, write_wav
from singdec.dsp import DspConfig, MelSpectrogram
from singdec.edit import IDENTITY_PROFILE, Decomposition
from singdec.synth import SynthConfig, extract_template_bank, synthesize
from singdec.text import INVENTORY, SPACE, PhonemeSequence, default_lexicon, encode_phonemes, g2p

SONG_LYRICS = "oh dear what can the matter be"


def sine_clip(freq, seconds, sample_rate=22050, amplitude=0.8):
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), sample_rate)


def band_for(symbol):
    """Deterministic envelope position for a phoneme symbol."""
    return 8 + (INVENTORY.index(symbol) * 7) % 30


def gaussian_envelope(cfg, center_band, width=6.0, height=10.0):
    bands = np.arange(cfg.n_mels, dtype=np.float64)
    return cfg.floor_log + height * np.exp(-0.5 * ((bands - center_band) / width) ** 2)


def phoneme_envelope(cfg, symbol):
    """Formant-like envelope: two resonances over a raised broadband base."""
    lead = band_for(symbol)
    env = np.full(cfg.n_mels, cfg.floor_log + 2.5)
    env = np.maximum(env, gaussian_envelope(cfg, lead, 4.0, 10.0))
    env = np.maximum(env, gaussian_envelope(cfg, lead + 18, 5.0, 7.5))
    return env


def build_song(cfg, lyrics=SONG_LYRICS, frames_per_phoneme=12, space_frames=4):
    """A decomposition with exactly known attributes, plus its rendered clip.

    Envelopes are wide Gaussian bumps (one per phoneme symbol), the contour
    steps through a small scale, frame spans are constructed, not estimated.
    """
    seq = g2p(lyrics, default_lexicon())
    notes = [220.0, 246.94, 261.63, 293.66, 329.63, 293.66, 261.63, 246.94]
    rows, f0, path = [], [], []
    note_index = 0  # one note per word; unvoiced gaps separate the steps
    for i, symbol in enumerate(seq.phonemes):
        if symbol == SPACE:
            env, n, freq = np.full(cfg.n_mels, cfg.floor_log + 1.0), space_frames, 0.0
            note_index += 1
        else:
            env = phoneme_envelope(cfg, symbol)
            n, freq = frames_per_phoneme, notes[note_index % len(notes)]
        rows.extend([env] * n)
        f0.extend([freq] * n)
        path.extend([i] * n)
    mel = MelSpectrogram(np.array(rows), cfg)
    contour = np.array(f0)
    alignment = np.zeros((len(path), len(seq)))
    alignment[np.arange(len(path)), path] = 1.0
    decomp = Decomposition(
        frame_linguistic=alignment @ encode_phonemes(seq),
        contour=contour,
        alignment=alignment,
        spans=segment_phonemes(alignment),
        timbre=IDENTITY_PROFILE,
        mel_source=mel,
        phonemes=seq,
    )
    bank = extract_template_bank(mel, alignment, seq, contour)
    clip = synthesize(mel, contour, SynthConfig())
    peak = np.max(np.abs(clip.samples))
    if peak > 0.9:
        clip = AudioClip(clip.samples * (0.9 / peak), clip.sample_rate)
    return decomp, bank, clip


@pytest.fixture(scope="session")
def dsp_cfg():
    return DspConfig()


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def mini_song(dsp_cfg):
    decomp, bank, clip = build_song(dsp_cfg)
    return {"decomp": decomp, "bank": bank, "clip": clip}


@pytest.fixture(scope="session")
def song_files(tmp_path_factory, mini_song):
    root = tmp_path_factory.mktemp("song")
    wav = root / "song.wav"
    lyrics = root / "lyrics.txt"
    write_wav(mini_song["clip"], wav)
    lyrics.write_text(SONG_LYRICS + "\n", encoding="utf-8")
    return {"wav": wav, "lyrics": lyrics}
