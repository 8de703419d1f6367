"""Command-line surface: analyze, edit, render, plot, duet.

Each stage reads and writes an on-disk bundle (a directory of small files),
so externally produced alignments or contours can be dropped in and every
stage stays independently testable. All commands are deterministic: given
identical inputs they produce byte-identical outputs.

Exit codes: 0 success, 1 I/O problems, 2 validation problems (including
out-of-vocabulary words), 3 broken internal invariants.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import tomli

from . import align as align_mod
from . import dsp as dsp_mod
from . import edit as edit_mod
from . import pitch as pitch_mod
from . import synth as synth_mod
from .audio import AudioClip, mix, read_wav, resample, write_wav
from .errors import AudioIOError, InvariantError, SingdecError, ValidationError
from .text import PhonemeSequence, WordSpan, default_lexicon, encode_phonemes, g2p, load_lexicon

CONFIG_ENV_VAR = "SINGDEC_CONFIG"
MIN_ANALYZABLE_SECONDS = 0.5
RECOMMENDED_RANGE_SECONDS = (1.0, 12.0)
MAX_ANALYZABLE_SECONDS = 60.0
ALIGN_ITERATIONS = 3


@dataclass
class ProjectConfig:
    dsp: dsp_mod.DspConfig
    rapt: pitch_mod.RaptConfig
    synth: synth_mod.SynthConfig
    lexicon_path: str | None = None
    profiles_path: str | None = None


def _build_section(cls, table: dict, section: str):
    try:
        return cls(**table)
    except TypeError as exc:
        raise ValidationError(f"config section [{section}]: {exc}") from exc


def load_project_config(path=None) -> ProjectConfig:
    """TOML config; falls back to $SINGDEC_CONFIG, then to defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is None:
        return ProjectConfig(dsp_mod.DspConfig(), pitch_mod.RaptConfig(),
                             synth_mod.SynthConfig())
    table = tomli.loads(Path(path).read_text(encoding="utf-8"))
    known = {"dsp", "rapt", "synth", "lexicon_path", "profiles_path"}
    unknown = set(table) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    cfg = ProjectConfig(
        dsp=_build_section(dsp_mod.DspConfig, table.get("dsp", {}), "dsp"),
        rapt=_build_section(pitch_mod.RaptConfig, table.get("rapt", {}), "rapt"),
        synth=_build_section(synth_mod.SynthConfig, table.get("synth", {}), "synth"),
        lexicon_path=table.get("lexicon_path"),
        profiles_path=table.get("profiles_path"),
    )
    for ref in (cfg.lexicon_path, cfg.profiles_path):
        if ref is not None and not Path(ref).exists():
            raise ValidationError(f"config references missing file: {ref}")
    return cfg


def load_profiles(path=None) -> dict:
    """Timbre profiles from a TOML file; 'identity' is always available."""
    profiles = {"identity": edit_mod.IDENTITY_PROFILE}
    if path is not None:
        for name, table in tomli.loads(Path(path).read_text(encoding="utf-8")).items():
            try:
                profiles[name] = edit_mod.TimbreProfile(name=name, **table)
            except TypeError as exc:
                raise ValidationError(f"profile [{name}]: {exc}") from exc
    return profiles


def _lexicon_for(cfg: ProjectConfig) -> dict:
    if cfg.lexicon_path is not None:
        return load_lexicon(cfg.lexicon_path)
    return default_lexicon()


# --- pipeline ---------------------------------------------------------------

def analyze_clip(clip: AudioClip, lyrics: str, lexicon: dict,
                 dsp_cfg: dsp_mod.DspConfig,
                 rapt_cfg: pitch_mod.RaptConfig,
                 align_iterations: int = ALIGN_ITERATIONS):
    """Full decomposition of one clip; returns (decomposition, template bank)."""
    if clip.sample_rate != dsp_cfg.sample_rate:
        clip = resample(clip, dsp_cfg.sample_rate)
    seq = g2p(lyrics, lexicon)
    mel = dsp_mod.mel_spectrogram(clip, dsp_cfg)
    contour = pitch_mod.estimate_f0(clip, rapt_cfg)
    bootstrap = align_mod.bootstrap_template_bank(mel, seq)
    alignment = align_mod.force_align(mel, seq, bootstrap, align_iterations)
    bank = synth_mod.extract_template_bank(mel, alignment, seq, contour)
    decomp = edit_mod.Decomposition(
        frame_linguistic=align_mod.project_text(alignment, encode_phonemes(seq)),
        contour=contour,
        alignment=alignment,
        spans=align_mod.segment_phonemes(alignment),
        timbre=edit_mod.IDENTITY_PROFILE,
        mel_source=mel,
        phonemes=seq,
    )
    return decomp, bank


# --- bundle I/O -------------------------------------------------------------

def save_bundle(directory, decomp: edit_mod.Decomposition, bank: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    align_mod.save_alignment(decomp.alignment, directory / "alignment.aln")
    pitch_mod.save_contour(decomp.contour, directory / "contour.csv")
    (directory / "phonemes.txt").write_text(str(decomp.phonemes) + "\n",
                                            encoding="utf-8")
    (directory / "phonemes_source.txt").write_text(
        str(decomp.phonemes_source) + "\n", encoding="utf-8")
    synth_mod.save_template_bank(bank, directory / "templates.bin")
    np.save(directory / "mel_source.npy", decomp.mel_source.data)
    np.save(directory / "linguistic.npy", decomp.frame_linguistic)
    dsp_mod.render_spectrogram_image(decomp.mel_source, directory / "mel.png")
    meta = {
        "sample_rate": decomp.mel_source.config.sample_rate,
        "frames": decomp.frames,
        "dsp": asdict(decomp.mel_source.config),
        "timbre": asdict(decomp.timbre),
        "word_spans": [[s.word, s.start, s.stop]
                       for s in decomp.phonemes_source.word_spans],
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_sequence(path, spans) -> PhonemeSequence:
    symbols = Path(path).read_text(encoding="utf-8").split()
    return PhonemeSequence(tuple(symbols), spans)


def load_bundle(directory):
    """Rebuild (decomposition, bank) from a bundle directory."""
    directory = Path(directory)
    for name in ("meta.json", "alignment.aln", "contour.csv", "phonemes.txt",
                 "phonemes_source.txt", "templates.bin", "mel_source.npy"):
        if not (directory / name).exists():
            raise ValidationError(f"incomplete bundle: missing {name}")
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    cfg = dsp_mod.DspConfig(**meta["dsp"])
    spans = tuple(WordSpan(w, a, b) for w, a, b in meta.get("word_spans", []))
    phonemes = _read_sequence(directory / "phonemes.txt", spans)
    phonemes_source = _read_sequence(directory / "phonemes_source.txt", spans)
    alignment = align_mod.load_alignment(directory / "alignment.aln")
    mel = dsp_mod.MelSpectrogram(np.load(directory / "mel_source.npy"), cfg)
    if (directory / "linguistic.npy").exists():
        linguistic = np.load(directory / "linguistic.npy")
    else:
        linguistic = align_mod.project_text(alignment, encode_phonemes(phonemes))
    decomp = edit_mod.Decomposition(
        frame_linguistic=linguistic,
        contour=pitch_mod.load_contour(directory / "contour.csv"),
        alignment=alignment,
        spans=align_mod.segment_phonemes(alignment),
        timbre=edit_mod.TimbreProfile(**meta["timbre"]),
        mel_source=mel,
        phonemes=phonemes,
        phonemes_source=phonemes_source,
    )
    bank = synth_mod.load_template_bank(directory / "templates.bin")
    return decomp, bank


# --- commands ---------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = load_project_config(args.config)
    clip = read_wav(args.audio)
    duration = clip.duration
    if duration < MIN_ANALYZABLE_SECONDS:
        raise ValidationError(
            f"clip is {duration:.2f} s, below the minimum analyzable length "
            f"({MIN_ANALYZABLE_SECONDS} s)")
    if duration > MAX_ANALYZABLE_SECONDS:
        raise ValidationError(
            f"clip is {duration:.1f} s, above the {MAX_ANALYZABLE_SECONDS:.0f} s limit")
    lo, hi = RECOMMENDED_RANGE_SECONDS
    if not (lo <= duration <= hi):
        print(f"warning: clip is {duration:.2f} s, outside the recommended "
              f"{lo:.0f}-{hi:.0f} s range", file=sys.stderr)
    lyrics = Path(args.lyrics).read_text(encoding="utf-8")
    decomp, bank = analyze_clip(clip, lyrics, _lexicon_for(cfg),
                                cfg.dsp, cfg.rapt)
    save_bundle(args.out, decomp, bank)
    voiced = float(np.mean(decomp.contour > 0))
    print(f"analyzed {args.audio}: {decomp.frames} frames, "
          f"{len(decomp.phonemes)} phonemes, {voiced:.0%} voiced")
    return 0


def cmd_edit(args) -> int:
    cfg = load_project_config(args.config)
    script = edit_mod.parse_edit_script(
        Path(args.script).read_text(encoding="utf-8"))
    profiles = load_profiles(cfg.profiles_path)
    decomp, bank = load_bundle(args.bundle)
    before = decomp.frames
    edited = edit_mod.apply_edit_script(decomp, script, profiles)
    save_bundle(args.out, edited, bank)
    for i, edit in enumerate(script.edits):
        print(f"edit {i}: {edit_mod.describe_edit(edit)}")
    print(f"frames {before} -> {edited.frames}")
    return 0


def cmd_render(args) -> int:
    cfg = load_project_config(args.config)
    decomp, bank = load_bundle(args.bundle)
    synth_cfg = cfg.synth
    if args.mode is not None:
        synth_cfg = replace(synth_cfg, render_mode=args.mode)
    mel, clip = synth_mod.render_decomposition(decomp, bank, synth_cfg)
    write_wav(clip, args.out)
    image_path = Path(args.out).with_suffix(".png")
    dsp_mod.render_spectrogram_image(mel, image_path)
    print(f"rendered {len(clip)} samples ({clip.duration:.2f} s) "
          f"to {args.out} (+ {image_path.name})")
    return 0


def _plot_panels(decomp: edit_mod.Decomposition) -> np.ndarray:
    """Stack mel, contour, and alignment panels into one grayscale image."""
    def norm_to_u8(m):
        lo, hi = float(m.min()), float(m.max())
        scaled = (m - lo) / (hi - lo) if hi > lo else np.full_like(m, 0.5)
        return np.floor(scaled * 255.0 + 0.5).astype(np.uint8)

    T = decomp.frames
    mel_panel = norm_to_u8(decomp.mel_source.data).T[::-1]
    pitch_panel = np.zeros((64, T), dtype=np.uint8)
    top = max(1.0, float(decomp.contour.max()) * 1.1)
    for t in np.nonzero(decomp.contour > 0)[0]:
        row = int((decomp.contour[t] / top) * 63)
        pitch_panel[63 - row, t] = 255
    align_panel = norm_to_u8(decomp.alignment).T
    sep = np.full((2, T), 96, dtype=np.uint8)
    return np.vstack([mel_panel, sep, pitch_panel, sep, align_panel])


def cmd_plot(args) -> int:
    from PIL import Image

    decomp, _ = load_bundle(args.bundle)
    Image.fromarray(_plot_panels(decomp), mode="L").save(args.out, format="PNG")
    print(f"wrote {args.out}")
    return 0


def cmd_duet(args) -> int:
    a = read_wav(args.audio_a)
    b = read_wav(args.audio_b)
    mixed = mix(a, b, args.gain_a, args.gain_b)
    write_wav(mixed, args.out)
    print(f"mixed {args.audio_a} + {args.audio_b} -> {args.out} "
          f"({mixed.duration:.2f} s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singdec",
        description="Decompose a singing voice into lyrics, rhythm, pitch and "
                    "timbre; edit the attributes; resynthesize audio.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="decompose a WAV + lyrics into a bundle")
    p.add_argument("audio")
    p.add_argument("lyrics")
    p.add_argument("-o", "--out", required=True, help="output bundle directory")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("edit", help="apply a JSON edit script to a bundle")
    p.add_argument("bundle")
    p.add_argument("script")
    p.add_argument("-o", "--out", required=True, help="output bundle directory")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("render", help="synthesize audio from a bundle")
    p.add_argument("bundle")
    p.add_argument("-o", "--out", required=True, help="output WAV path")
    p.add_argument("--mode", choices=("resynthesis", "template"), default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("plot", help="visualize a bundle as one PNG")
    p.add_argument("bundle")
    p.add_argument("-o", "--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("duet", help="mix two WAV files sample-wise")
    p.add_argument("audio_a")
    p.add_argument("audio_b")
    p.add_argument("-o", "--out", required=True, help="output WAV path")
    p.add_argument("--gain-a", type=float, default=1.0)
    p.add_argument("--gain-b", type=float, default=1.0)
    p.set_defaults(func=cmd_duet)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AudioIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except SingdecError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
