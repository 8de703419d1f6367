"""Frame assembly, timbre application, and harmonic-plus-noise rendering."""
import numpy as np
import pytest

from singdec.align import segment_phonemes
from singdec.dsp import DspConfig, MelSpectrogram, mel_center_frequencies
from singdec.edit import (IDENTITY_PROFILE, TimbreProfile, apply_edit_script,
                          parse_edit_script)
from singdec.errors import ValidationError
from singdec.pitch import estimate_f0
from singdec.synth import (SynthConfig, assemble_frames, extract_template_bank,
                           load_template_bank, save_template_bank, synthesize)
from singdec.text import PhonemeSequence, encode_phonemes

from test_edit import tiny_decomposition

CFG = DspConfig()
SYNTH = SynthConfig()


def zero_crossings(samples):
    return int(np.sum(np.abs(np.diff(np.signbit(samples)))))


class TestAssembleFrames:
    def test_identity_is_bitwise(self, mini_song):
        out = assemble_frames(mini_song["decomp"], mini_song["bank"], SYNTH)
        assert np.array_equal(out.data, mini_song["decomp"].mel_source.data)

    def test_blank_all_with_zero_pitch_is_floor(self, mini_song):
        d = apply_edit_script(mini_song["decomp"], parse_edit_script(
            f'[{{"op": "blank_all"}},'
            f' {{"op": "zero_pitch", "from_frame": 0,'
            f' "to_frame": {mini_song["decomp"].frames}}}]'), {})
        out = assemble_frames(d, mini_song["bank"], SYNTH)
        assert np.all(out.data == CFG.floor_log)
        assert np.all(d.contour == 0.0)

    def test_substituted_phoneme_uses_template(self, mini_song):
        d = apply_edit_script(mini_song["decomp"], parse_edit_script(
            '[{"op": "substitute", "from_phoneme": 2, "to_phoneme": 2,'
            ' "phonemes": ["G"]}]'), {})
        bank = dict(mini_song["bank"])
        with pytest.raises(ValidationError, match="G"):
            assemble_frames(d, bank, SYNTH)  # no template for G yet
        from singdec.align import Template
        g_env = np.full(80, CFG.floor_log + 5.0)
        bank["G"] = Template(g_env)
        out = assemble_frames(d, bank, SYNTH)
        span = d.spans[2]
        assert np.allclose(out.data[span.start:span.stop], g_env)
        outside = np.ones(d.frames, dtype=bool)
        outside[span.start:span.stop] = False
        assert np.array_equal(out.data[outside],
                              d.mel_source.data[outside])

    def test_spectral_tilt_offsets(self):
        # oracle: hand-computed per-band offsets against the tilt-0 render
        d = tiny_decomposition(np.full((6, 80), CFG.floor_log + 10.0),
                               np.full(6, 220.0), np.zeros(6, dtype=int), ("AA",))
        bank = extract_template_bank(d.mel_source, d.alignment, d.phonemes)
        base = assemble_frames(d, bank, SYNTH)
        from dataclasses import replace
        tilted = replace(d, timbre=TimbreProfile("tilted", spectral_tilt=6.0))
        out = assemble_frames(tilted, bank, SYNTH)
        centers = mel_center_frequencies(CFG)
        offsets = 6.0 * np.log2(np.maximum(centers, 1.0) / 1000.0) * np.log(10) / 10
        assert np.allclose(out.data - base.data, offsets[None, :], atol=1e-9)
        assert np.all(np.diff(out.data[0] - base.data[0]) > 0)

    def test_formant_warp_moves_peak_up(self):
        env = np.full(80, CFG.floor_log)
        env[20:27] += np.array([2.0, 5.0, 8.0, 9.0, 8.0, 5.0, 2.0])
        d = tiny_decomposition(np.tile(env, (4, 1)), np.full(4, 220.0),
                               np.zeros(4, dtype=int), ("AA",))
        bank = extract_template_bank(d.mel_source, d.alignment, d.phonemes)
        from dataclasses import replace
        warped = replace(d, timbre=TimbreProfile("up", formant_warp=1.3))
        out = assemble_frames(warped, bank, SYNTH)
        centers = mel_center_frequencies(CFG)
        target = centers[23] * 1.3
        expected_band = int(np.argmin(np.abs(centers - target)))
        assert abs(int(np.argmax(out.data[0])) - expected_band) <= 1

    def test_template_mode_renders_from_attributes_alone(self, mini_song):
        d = mini_song["decomp"]
        out = assemble_frames(d, mini_song["bank"],
                              SynthConfig(render_mode="template"))
        assert out.frames == d.frames
        # frames of one phoneme match its template exactly (constant rows)
        span = d.spans[2]
        template = mini_song["bank"][d.phonemes.phonemes[2]].envelope
        assert np.allclose(out.data[span.start:span.stop], template)


class TestSynthesize:
    def test_flat_envelope_pitch_round_trip(self):
        mel = MelSpectrogram(np.full((173, 80), np.log(1e-2)), CFG)
        contour = np.full(173, 220.0)
        clip = synthesize(mel, contour, SYNTH)
        assert len(clip) == 173 * 256
        back = estimate_f0(clip)
        voiced = back[back > 0]
        cents = 1200 * np.log2(voiced / 220.0)
        assert len(voiced) / len(back) >= 0.95
        assert np.mean(np.abs(cents) <= 20.0) >= 0.95

    def test_silence(self):
        mel = MelSpectrogram(np.full((40, 80), CFG.floor_log), CFG)
        clip = synthesize(mel, np.zeros(40), SYNTH)
        assert np.sqrt(np.mean(clip.samples ** 2)) < 1e-3

    def test_whisper_is_noise(self):
        # zero contour with a loud envelope: zero-crossing rate above any
        # harmonic signal at or below 1 kHz
        mel = MelSpectrogram(np.full((86, 80), np.log(1e-2)), CFG)
        clip = synthesize(mel, np.zeros(86), SYNTH)
        assert np.sqrt(np.mean(clip.samples ** 2)) > 1e-4
        t = np.arange(len(clip)) / 22050
        harmonic_1k = np.sin(2 * np.pi * 1000.0 * t)
        assert zero_crossings(clip.samples) > zero_crossings(harmonic_1k)

    def test_deterministic_bitwise(self):
        mel = MelSpectrogram(np.full((30, 80), np.log(1e-3)), CFG)
        contour = np.where(np.arange(30) % 3 == 0, 0.0, 247.0)
        a = synthesize(mel, contour, SYNTH)
        b = synthesize(mel, contour, SYNTH)
        assert np.array_equal(a.samples, b.samples)

    def test_seed_changes_noise(self):
        mel = MelSpectrogram(np.full((30, 80), np.log(1e-3)), CFG)
        a = synthesize(mel, np.zeros(30), SynthConfig(noise_seed=1))
        b = synthesize(mel, np.zeros(30), SynthConfig(noise_seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_frame_count_mismatch(self):
        mel = MelSpectrogram(np.full((10, 80), CFG.floor_log), CFG)
        with pytest.raises(ValidationError):
            synthesize(mel, np.zeros(9), SYNTH)

    def test_breathiness_drowns_the_harmonics(self):
        # at full breathiness the voiced mix is all noise: pitch disappears
        mel = MelSpectrogram(np.full((120, 80), np.log(1e-2)), CFG)
        contour = np.full(120, 220.0)
        clean = synthesize(mel, contour, SYNTH, breathiness=0.0)
        breathy = synthesize(mel, contour, SYNTH, breathiness=0.85)
        clean_voiced = np.mean(estimate_f0(clean) > 0)
        breathy_voiced = np.mean(estimate_f0(breathy) > 0)
        assert clean_voiced >= 0.9
        assert breathy_voiced <= 0.1


class TestTemplateBank:
    def test_single_phoneme_mean(self):
        rng = np.random.default_rng(21)
        data = CFG.floor_log + 8 * rng.random((12, 80))
        d = tiny_decomposition(data, np.full(12, 200.0),
                               np.zeros(12, dtype=int), ("AA",))
        bank = extract_template_bank(d.mel_source, d.alignment, d.phonemes,
                                     d.contour)
        assert np.allclose(bank["AA"].envelope, data.mean(axis=0))
        assert bank["AA"].voicing == 1.0

    def test_two_constant_phonemes_exact(self):
        env_a = np.full(80, -4.0)
        env_b = np.full(80, -2.0)
        data = np.vstack([np.tile(env_a, (5, 1)), np.tile(env_b, (7, 1))])
        d = tiny_decomposition(data, np.zeros(12),
                               np.repeat([0, 1], [5, 7]), ("AA", "B"))
        bank = extract_template_bank(d.mel_source, d.alignment, d.phonemes)
        assert np.array_equal(bank["AA"].envelope, env_a)
        assert np.array_equal(bank["B"].envelope, env_b)

    def test_empty_span_symbol_absent(self):
        a = np.zeros((4, 3))
        a[[0, 1], 0] = 1.0
        a[[2, 3], 2] = 1.0
        seq = PhonemeSequence(("AA", "B", "D"))
        mel = MelSpectrogram(np.full((4, 80), -3.0), CFG)
        bank = extract_template_bank(mel, a, seq)
        assert "B" not in bank
        assert "AA" in bank and "D" in bank

    def test_blank_always_floor(self, mini_song):
        bank = mini_song["bank"]
        assert np.all(bank["BLANK"].envelope == CFG.floor_log)
        assert bank["BLANK"].voicing == 0.0

    def test_file_round_trip(self, tmp_path, mini_song):
        path = tmp_path / "bank.bin"
        save_template_bank(mini_song["bank"], path)
        loaded = load_template_bank(path)
        assert set(loaded) == set(mini_song["bank"])
        for symbol, template in mini_song["bank"].items():
            assert np.allclose(loaded[symbol].envelope, template.envelope,
                               atol=1e-6)

    def test_load_rejects_junk(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValidationError):
            load_template_bank(path)


class TestPitchFidelityBySynthesis:
    def test_contour_driven_synthesis_re_estimates(self, mini_song):
        # synthesize from the decomposition contour, re-estimate, compare
        d = mini_song["decomp"]
        clip = synthesize(d.mel_source, d.contour, SYNTH)
        back = estimate_f0(clip)
        n = min(len(back), len(d.contour))
        voiced = (d.contour[:n] > 0) & (back[:n] > 0)
        cents = 1200 * np.log2(back[:n][voiced] / d.contour[:n][voiced])
        assert voiced.sum() >= 0.9 * np.sum(d.contour[:n] > 0)
        assert np.mean(np.abs(cents) <= 20.0) >= 0.9
