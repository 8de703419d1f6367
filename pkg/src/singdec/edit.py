"""Declarative edits over a decomposition: lyrics, rhythm, pitch, timbre.

A `Decomposition` bundles the four attributes extracted from one clip plus
the source mel needed for analysis-resynthesis. All edit functions return
new decompositions; inputs are never mutated.

Rhythm changes resample the frame axis by linear interpolation, with two
declared rules: contour interpolation touching an unvoiced frame yields
unvoiced (no interpolating through the zero code), and the alignment is
carried by nearest-neighbor through the same time map so its rows stay
valid one-hot/stochastic rows.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .align import Span, project_text, segment_phonemes
from .dsp import MelSpectrogram
from .errors import ValidationError
from .pitch import shift_semitones, zero_pitch
from .text import LyricEdit, PhonemeSequence, apply_lyric_edit, encode_phonemes
from .util import iround


@dataclass(frozen=True)
class TimbreProfile:
    """Interpretable voice parameters applied at render time."""

    name: str
    formant_warp: float = 1.0      # frequency-axis scale
    spectral_tilt: float = 0.0     # dB per octave
    breathiness: float = 0.0       # additive noise mix in [0, 1]

    def __post_init__(self):
        if not (0.5 <= self.formant_warp <= 2.0):
            raise ValidationError("formant_warp must lie in [0.5, 2.0]")
        if not (0.0 <= self.breathiness <= 1.0):
            raise ValidationError("breathiness must lie in [0, 1]")


IDENTITY_PROFILE = TimbreProfile("identity")


@dataclass
class Decomposition:
    """The four attributes of one clip plus resynthesis context.

    `phonemes_source` keeps the sequence the clip was analyzed with, so the
    renderer can tell edited frames from untouched ones.
    """

    frame_linguistic: np.ndarray    # (T, inventory)
    contour: np.ndarray             # (T,)
    alignment: np.ndarray           # (T, N)
    spans: list                     # per-phoneme frame spans
    timbre: TimbreProfile
    mel_source: MelSpectrogram      # (T, n_mels)
    phonemes: PhonemeSequence
    phonemes_source: PhonemeSequence = None  # defaults to `phonemes`

    def __post_init__(self):
        if self.phonemes_source is None:
            self.phonemes_source = self.phonemes
        self.validate()

    def validate(self):
        T = self.mel_source.frames
        if len(self.contour) != T or len(self.frame_linguistic) != T \
                or len(self.alignment) != T:
            raise ValidationError("decomposition frame counts disagree")
        if self.alignment.shape[1] != len(self.phonemes):
            raise ValidationError("alignment width != phoneme count")
        if len(self.phonemes) != len(self.phonemes_source):
            raise ValidationError("edited and source sequences differ in length")

    @property
    def frames(self) -> int:
        return self.mel_source.frames


def _interp_rows(arr: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Linear interpolation along the frame axis; integer positions copy rows."""
    i0 = np.floor(positions).astype(int)
    frac = positions - i0
    i0 = np.clip(i0, 0, len(arr) - 1)
    i1 = np.clip(i0 + 1, 0, len(arr) - 1)
    exact = frac < 1e-12
    if arr.ndim == 2:
        out = arr[i0] * (1.0 - frac)[:, None] + arr[i1] * frac[:, None]
    else:
        out = arr[i0] * (1.0 - frac) + arr[i1] * frac
    out[exact] = arr[i0[exact]]
    return out


def _interp_contour(contour: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Voicing-aware interpolation: touching an unvoiced frame yields 0."""
    i0 = np.floor(positions).astype(int)
    frac = positions - i0
    i0 = np.clip(i0, 0, len(contour) - 1)
    i1 = np.clip(i0 + 1, 0, len(contour) - 1)
    exact = frac < 1e-12
    out = contour[i0] * (1.0 - frac) + contour[i1] * frac
    out[exact] = contour[i0[exact]]
    both_voiced = (contour[i0] > 0) & (contour[i1] > 0)
    out[~exact & ~both_voiced] = 0.0
    return out


def _nearest_rows(arr: np.ndarray, positions: np.ndarray) -> np.ndarray:
    idx = np.clip(np.floor(positions + 0.5).astype(int), 0, len(arr) - 1)
    return arr[idx].copy()


def _span_positions(start: int, length: int, new_length: int) -> np.ndarray:
    """Endpoint-preserving sample positions for one resampled segment."""
    if new_length == 1:
        return np.array([start + (length - 1) / 2.0])
    return start + np.arange(new_length) * ((length - 1) / (new_length - 1))


def _rebuild(d: Decomposition, positions: np.ndarray) -> Decomposition:
    alignment = _nearest_rows(d.alignment, positions)
    return Decomposition(
        frame_linguistic=_interp_rows(d.frame_linguistic, positions),
        contour=_interp_contour(d.contour, positions),
        alignment=alignment,
        spans=segment_phonemes(alignment),
        timbre=d.timbre,
        mel_source=MelSpectrogram(_interp_rows(d.mel_source.data, positions),
                                  d.mel_source.config),
        phonemes=d.phonemes,
        phonemes_source=d.phonemes_source,
    )


def stretch_utterance(d: Decomposition, factor: float) -> Decomposition:
    """Resample every frame-indexed attribute to round(factor * T) frames."""
    if factor <= 0:
        raise ValidationError(f"stretch factor must be positive, got {factor}")
    new_T = iround(factor * d.frames)
    if new_T < 1:
        raise ValidationError(f"factor {factor} collapses the clip to zero frames")
    return _rebuild(d, _span_positions(0, d.frames, new_T))


def stretch_phoneme(d: Decomposition, phoneme_index: int,
                    factor: float) -> Decomposition:
    """Resample one phoneme's span; every frame outside it is untouched."""
    if factor <= 0:
        raise ValidationError(f"stretch factor must be positive, got {factor}")
    if not (0 <= phoneme_index < len(d.phonemes)):
        raise ValidationError(
            f"phoneme index {phoneme_index} outside sequence "
            f"of length {len(d.phonemes)}")
    span = d.spans[phoneme_index]
    if span.empty:
        warnings.warn(f"phoneme {phoneme_index} has an empty span; "
                      "stretch is a no-op")
        return _rebuild(d, np.arange(d.frames, dtype=np.float64))
    new_len = max(1, iround(factor * span.length))
    positions = np.concatenate([
        np.arange(span.start, dtype=np.float64),
        _span_positions(span.start, span.length, new_len),
        np.arange(span.stop, d.frames, dtype=np.float64),
    ])
    return _rebuild(d, positions)


# --- edit scripts -----------------------------------------------------------

_EDIT_KINDS = ("pitch_shift", "zero_pitch", "stretch", "stretch_phoneme",
               "substitute", "delete", "blank_all", "timbre")


@dataclass(frozen=True)
class EditScript:
    """Ordered, validated list of edit operations."""

    edits: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.edits)


def parse_edit_script(source) -> EditScript:
    """Parse a JSON array of edit objects (see README for the op forms)."""
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"edit script is not valid JSON: {exc}") from exc
    if not isinstance(source, list):
        raise ValidationError("edit script must be a JSON array")

    edits = []
    for i, raw in enumerate(source):
        kind = raw.get("op") if isinstance(raw, dict) else None
        if kind not in _EDIT_KINDS:
            raise ValidationError(f"edit {i}: unknown op {kind!r}")
        try:
            edits.append(_parse_one(kind, raw))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"edit {i} ({kind}): {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"edit {i} ({kind}): {exc}") from exc
    return EditScript(tuple(edits))


def _parse_one(kind: str, raw: dict):
    if kind == "pitch_shift":
        return ("pitch_shift", float(raw["semitones"]))
    if kind == "zero_pitch":
        return ("zero_pitch", int(raw["from_frame"]), int(raw["to_frame"]))
    if kind == "stretch":
        factor = float(raw["factor"])
        if factor <= 0:
            raise ValidationError(f"factor must be positive, got {factor}")
        return ("stretch", factor)
    if kind == "stretch_phoneme":
        factor = float(raw["factor"])
        if factor <= 0:
            raise ValidationError(f"factor must be positive, got {factor}")
        return ("stretch_phoneme", int(raw["index"]), factor)
    if kind == "substitute":
        return ("lyric", LyricEdit("substitute", int(raw["from_phoneme"]),
                                   int(raw["to_phoneme"]) + 1,
                                   tuple(raw["phonemes"])))
    if kind == "delete":
        return ("lyric", LyricEdit("delete", int(raw["from_phoneme"]),
                                   int(raw["to_phoneme"]) + 1))
    if kind == "blank_all":
        return ("lyric", LyricEdit("blank_all"))
    return ("timbre", str(raw["profile"]))


def _apply_lyric(d: Decomposition, lyric_edit: LyricEdit) -> Decomposition:
    new_seq, zeroed = apply_lyric_edit(d.phonemes, lyric_edit)
    linguistic = project_text(d.alignment, encode_phonemes(new_seq))
    contour = d.contour
    for index in zeroed:
        span = d.spans[index]
        if not span.empty:
            contour = zero_pitch(contour, span.start, span.stop)
    return replace(d, phonemes=new_seq, frame_linguistic=linguistic,
                   contour=contour)


def apply_edit_script(d: Decomposition, script: EditScript,
                      profiles: dict) -> Decomposition:
    """Apply edits in script order; the first failure aborts with its index."""
    out = d
    for i, edit in enumerate(script.edits):
        try:
            kind = edit[0]
            if kind == "pitch_shift":
                out = replace(out, contour=shift_semitones(out.contour, edit[1]))
            elif kind == "zero_pitch":
                out = replace(out, contour=zero_pitch(out.contour, edit[1], edit[2]))
            elif kind == "stretch":
                out = stretch_utterance(out, edit[1])
            elif kind == "stretch_phoneme":
                out = stretch_phoneme(out, edit[1], edit[2])
            elif kind == "lyric":
                out = _apply_lyric(out, edit[1])
            else:  # timbre
                if edit[1] not in profiles:
                    raise ValidationError(f"unknown timbre profile: {edit[1]}")
                out = replace(out, timbre=profiles[edit[1]])
        except ValidationError as exc:
            raise ValidationError(f"edit {i} ({edit[0]}): {exc}") from exc
    return out


def describe_edit(edit) -> str:
    """One human-readable line per edit, for the CLI diff summary."""
    kind = edit[0]
    if kind == "pitch_shift":
        return f"pitch shift {edit[1]:+g} semitones"
    if kind == "zero_pitch":
        return f"pitch zeroed on frames [{edit[1]}, {edit[2]})"
    if kind == "stretch":
        return f"utterance stretched x{edit[1]:g}"
    if kind == "stretch_phoneme":
        return f"phoneme {edit[1]} stretched x{edit[2]:g}"
    if kind == "lyric":
        e = edit[1]
        if e.kind == "blank_all":
            return "all phonemes blanked (pitch kept)"
        if e.kind == "delete":
            return f"phonemes [{e.start}, {e.stop}) deleted (blank + zero pitch)"
        return (f"phonemes [{e.start}, {e.stop}) replaced with "
                + " ".join(e.replacement))
    return f"timbre profile -> {edit[1]}"
