"""Lexicon-based grapheme-to-phoneme conversion and phoneme-sequence edits.

The inventory is stress-stripped ARPABET plus two structural symbols: BLANK
(deleted content, synthesized as silence) and SPACE (word boundary). Symbol
indexing is fixed: BLANK is index 0, everything else sorted alphabetically.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import OovError, ValidationError

BLANK = "BLANK"
SPACE = "SPACE"

ARPABET = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER",
    "EY", "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW",
    "OY", "P", "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z",
    "ZH",
)

INVENTORY: tuple = (BLANK,) + tuple(sorted(ARPABET + (SPACE,)))
SYMBOL_INDEX = {symbol: i for i, symbol in enumerate(INVENTORY)}
INVENTORY_SIZE = len(INVENTORY)
BLANK_INDEX = SYMBOL_INDEX[BLANK]

_WORD_CLEAN = re.compile(r"[^A-Z']+")
_STRESS = re.compile(r"[0-9]+$")


@dataclass(frozen=True)
class WordSpan:
    word: str
    start: int
    stop: int  # half-open phoneme index range


@dataclass(frozen=True)
class PhonemeSequence:
    phonemes: tuple
    word_spans: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.phonemes:
            raise ValidationError("phoneme sequence must be non-empty")
        for symbol in self.phonemes:
            if symbol not in SYMBOL_INDEX:
                raise ValidationError(f"unknown phoneme symbol: {symbol}")

    def __len__(self) -> int:
        return len(self.phonemes)

    def __str__(self) -> str:
        return " ".join(self.phonemes)


def load_lexicon(path) -> dict:
    """Parse a pronouncing dictionary: `WORD  PH1 PH2 ...` per line.

    Lines starting with ';;;' are comments; stress digits are stripped;
    parenthesized alternate entries like `WORD(2)` are ignored.
    """
    lexicon = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith(";;;"):
            continue
        parts = line.split()
        word, phones = parts[0].upper(), parts[1:]
        if "(" in word or not phones:
            continue
        lexicon.setdefault(word, tuple(_STRESS.sub("", p) for p in phones))
    return lexicon


def default_lexicon() -> dict:
    """The small pronouncing dictionary shipped with the package."""
    with resources.as_file(resources.files("singdec") / "data" / "lexicon.txt") as p:
        return load_lexicon(p)


def g2p(lyrics: str, lexicon: dict) -> PhonemeSequence:
    """Convert lyric text to phonemes with SPACE between words.

    Unknown words raise `OovError` naming the word; there is no fallback.
    """
    words = []
    for token in lyrics.upper().split():
        word = _WORD_CLEAN.sub("", token).strip("'")
        if word:
            words.append(word)
    if not words:
        raise ValidationError("empty lyrics")

    phonemes = []
    spans = []
    for i, word in enumerate(words):
        if word not in lexicon:
            raise OovError(word)
        if i > 0:
            phonemes.append(SPACE)
        start = len(phonemes)
        phonemes.extend(lexicon[word])
        spans.append(WordSpan(word, start, len(phonemes)))
    return PhonemeSequence(tuple(phonemes), tuple(spans))


def encode_phonemes(seq: PhonemeSequence) -> np.ndarray:
    """(N, inventory) one-hot matrix, row i encoding phoneme i."""
    enc = np.zeros((len(seq), INVENTORY_SIZE))
    for i, symbol in enumerate(seq.phonemes):
        enc[i, SYMBOL_INDEX[symbol]] = 1.0
    return enc


@dataclass(frozen=True)
class LyricEdit:
    """Positional lyric edit: substitute, delete, or blank_all.

    `start:stop` is a half-open phoneme index range. Substitution keeps the
    sequence length (replacement must match the span length); delete turns
    the span into BLANK and reports the affected indices so the caller can
    zero the matching pitch; blank_all blanks everything but reports nothing
    (pitch is kept).
    """

    kind: str
    start: int = 0
    stop: int = 0
    replacement: tuple = ()

    def __post_init__(self):
        if self.kind not in ("substitute", "delete", "blank_all"):
            raise ValidationError(f"unknown lyric edit kind: {self.kind}")


def apply_lyric_edit(seq: PhonemeSequence, edit: LyricEdit):
    """Apply one lyric edit; returns (new sequence, phoneme indices to zero)."""
    n = len(seq)
    if edit.kind == "blank_all":
        return PhonemeSequence((BLANK,) * n, seq.word_spans), ()

    if not (0 <= edit.start <= edit.stop <= n):
        raise ValidationError(
            f"edit span [{edit.start}, {edit.stop}) outside sequence of length {n}")
    phonemes = list(seq.phonemes)
    if edit.kind == "delete":
        zeroed = tuple(range(edit.start, edit.stop))
        for i in zeroed:
            phonemes[i] = BLANK
        return PhonemeSequence(tuple(phonemes), seq.word_spans), zeroed

    span = edit.stop - edit.start
    if len(edit.replacement) != span:
        raise ValidationError(
            f"substitute needs {span} phonemes, got {len(edit.replacement)}")
    if span == 0:
        raise ValidationError("substitute replacement must be non-empty")
    phonemes[edit.start:edit.stop] = list(edit.replacement)
    return PhonemeSequence(tuple(phonemes), seq.word_spans), ()
