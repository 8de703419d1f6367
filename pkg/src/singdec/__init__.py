"""Singing-voice decomposition and attribute editing.

Decomposes a recording plus its lyrics into four interpretable attributes
(linguistic content, rhythm, pitch, timbre), applies declarative edits to
each, and deterministically resynthesizes audio so every edit can be
verified by re-analysis.
"""
from ._kernels import backend as kernel_backend
from .audio import AudioClip, mix, read_wav, resample, write_wav
from .dsp import (ArtifactReport, DspConfig, MelSpectrogram, artifact_report,
                  griffin_lim, mel_spectrogram, render_spectrogram_image, stft)
from .align import (Span, Template, bootstrap_template_bank, force_align,
                    load_alignment, project_text, save_alignment,
                    segment_phonemes)
from .edit import (Decomposition, EditScript, TimbreProfile, apply_edit_script,
                   parse_edit_script, stretch_phoneme, stretch_utterance)
from .errors import (AudioIOError, InvariantError, OovError, SingdecError,
                     TruncatedWavError, UnsupportedWavError, ValidationError)
from .pitch import (RaptConfig, compute_nccf, estimate_f0, load_contour,
                    save_contour, shift_semitones, zero_pitch)
from .synth import (SynthConfig, assemble_frames, extract_template_bank,
                    load_template_bank, render_decomposition,
                    save_template_bank, synthesize)
from .text import (ARPABET, BLANK, INVENTORY, SPACE, LyricEdit,
                   PhonemeSequence, apply_lyric_edit, default_lexicon,
                   encode_phonemes, g2p, load_lexicon)

__version__ = "0.1.0"
