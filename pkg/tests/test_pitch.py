"""NCCF candidates, the tracking dynamic program, and contour edits."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singdec.audio import AudioClip
from singdec.errors import ValidationError
from singdec.pitch import (RaptConfig, compute_nccf, estimate_f0, load_contour,
                           save_contour, shift_semitones, zero_pitch)

from conftest import sine_clip

CFG = RaptConfig()


def brute_force_nccf(samples, start, window, lag):
    """Oracle: direct normalized cross-correlation at one lag."""
    a = samples[start:start + window]
    b = samples[start + lag:start + lag + window]
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


class TestComputeNccf:
    def test_sine_top_candidate_at_period(self):
        clip = sine_clip(220.0, 1.0)
        candidates = compute_nccf(clip, 40, CFG)
        assert candidates, "expected at least one candidate"
        top_lag, top_corr = candidates[0]
        assert top_lag == pytest.approx(22050 / 220, abs=1.0)
        assert top_corr > 0.95
        # oracle: the brute-force NCCF peaks at the same integer lag
        samples = np.concatenate([np.zeros(551), clip.samples, np.zeros(1000)])
        start = 40 * 256 - 551 // 2 + 551
        scores = [brute_force_nccf(samples, start, 551, lag)
                  for lag in range(22, 369)]
        assert 22 + int(np.argmax(scores)) == pytest.approx(round(top_lag), abs=1)

    def test_white_noise_low_correlation(self):
        rng = np.random.default_rng(99)
        clip = AudioClip(0.5 * rng.standard_normal(22050), 22050)
        for frame in (10, 30, 50):
            for _, corr in compute_nccf(clip, frame, CFG):
                assert corr < 0.9

    def test_zero_frame_no_candidates(self):
        clip = AudioClip(np.zeros(22050), 22050)
        assert compute_nccf(clip, 5, CFG) == []

    def test_frame_out_of_bounds(self):
        clip = sine_clip(220.0, 0.5)
        with pytest.raises(ValidationError):
            compute_nccf(clip, 10_000, CFG)

    def test_candidates_sorted_and_capped(self):
        clip = sine_clip(110.0, 1.0)  # low pitch -> several lag multiples
        candidates = compute_nccf(clip, 40, CFG)
        corrs = [c for _, c in candidates]
        assert corrs == sorted(corrs, reverse=True)
        assert len(candidates) <= CFG.candidates_per_frame


class TestEstimateF0:
    def test_sine_440(self):
        contour = estimate_f0(sine_clip(440.0, 2.0))
        voiced = contour[contour > 0]
        assert len(voiced) / len(contour) >= 0.95
        assert np.all(np.abs(voiced / 440.0 - 1.0) < 0.01)

    def test_silence_all_unvoiced(self):
        contour = estimate_f0(AudioClip(np.zeros(2 * 22050), 22050))
        assert np.all(contour == 0.0)

    def test_sweep_tracks_generator(self):
        sr = 22050
        t = np.arange(2 * sr) / sr
        inst = 100.0 + 150.0 * t
        phase = 2 * np.pi * np.cumsum(inst) / sr
        contour = estimate_f0(AudioClip(0.7 * np.sin(phase), sr))
        voiced = np.nonzero(contour > 0)[0]
        oracle = 100.0 + 150.0 * (voiced * 256 / sr)
        assert np.all(np.abs(contour[voiced] / oracle - 1.0) <= 0.03)
        steps = np.diff(contour[voiced])
        assert np.all(steps >= -0.03 * contour[voiced][:-1])

    def test_length_matches_mel_frames(self):
        for n in (22050, 33000, 40001):
            contour = estimate_f0(AudioClip(0.5 * np.sin(
                2 * np.pi * 220 * np.arange(n) / 22050), 22050))
            assert len(contour) == 1 + n // 256

    def test_rate_mismatch(self):
        with pytest.raises(ValidationError):
            estimate_f0(sine_clip(220.0, 1.0, 44100))

    def test_too_short(self):
        with pytest.raises(ValidationError):
            estimate_f0(AudioClip(np.zeros(100), 22050))


class TestShiftSemitones:
    def test_one_semitone(self):
        out = shift_semitones(np.array([220.0]), 1.0)
        assert out[0] == pytest.approx(220.0 * 2 ** (1 / 12))
        assert out[0] == pytest.approx(233.0819, abs=1e-3)

    def test_down_octave_halves(self):
        contour = np.array([440.0, 0.0, 392.0])
        out = shift_semitones(contour, -12.0)
        assert out[0] == pytest.approx(220.0)
        assert out[2] == pytest.approx(196.0)

    def test_unvoiced_preserved(self):
        contour = np.array([0.0, 300.0, 0.0])
        out = shift_semitones(contour, 7.3)
        assert out[0] == 0.0 and out[2] == 0.0

    def test_zero_shift_exact(self):
        contour = np.array([0.0, 217.3, 881.1])
        assert np.array_equal(shift_semitones(contour, 0.0), contour)

    def test_clamped_with_warning(self):
        with pytest.warns(UserWarning, match="clamped"):
            out = shift_semitones(np.array([900.0]), 12.0)
        assert out[0] == 1000.0

    @given(st.floats(-6, 6), st.floats(-6, 6))
    @settings(max_examples=40, deadline=None)
    def test_shift_additivity(self, a, b):
        contour = np.array([0.0, 110.0, 220.0, 330.0])
        lhs = shift_semitones(shift_semitones(contour, a), b)
        rhs = shift_semitones(contour, a + b)
        assert np.allclose(lhs, rhs, rtol=1e-9)

    def test_voicing_partition_invariant(self):
        rng = np.random.default_rng(2)
        contour = np.where(rng.random(50) > 0.4, 100 + 400 * rng.random(50), 0.0)
        out = shift_semitones(contour, 3.7)
        assert np.array_equal(out > 0, contour > 0)


class TestZeroPitch:
    def test_full_range(self):
        contour = np.array([100.0, 200.0, 300.0])
        assert np.all(zero_pitch(contour, 0, 3) == 0.0)

    def test_empty_span_identity(self):
        contour = np.array([100.0, 200.0])
        assert np.array_equal(zero_pitch(contour, 1, 1), contour)

    def test_idempotent(self):
        contour = np.array([100.0, 200.0, 300.0, 400.0])
        once = zero_pitch(contour, 1, 3)
        assert np.array_equal(zero_pitch(once, 1, 3), once)

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            zero_pitch(np.zeros(4), 2, 9)


class TestContourCsv:
    def test_round_trip(self, tmp_path):
        contour = np.array([0.0, 220.123456789, 440.0000001])
        path = tmp_path / "c.csv"
        save_contour(contour, path)
        text = path.read_text()
        assert text.splitlines()[0] == "frame_index,f0_hz"
        assert np.array_equal(load_contour(path), contour)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,100.0\n")
        with pytest.raises(ValidationError):
            load_contour(path)
