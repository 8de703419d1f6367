"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: file problems (including the builtin
OSError family) exit 1, validation problems exit 2, broken internal
invariants exit 3.
"""


class SingdecError(Exception):
    """Base class for all toolkit errors."""


class AudioIOError(SingdecError):
    """A WAV file could not be read or written."""


class UnsupportedWavError(AudioIOError):
    """Valid RIFF container, but an encoding this reader does not handle."""


class TruncatedWavError(AudioIOError):
    """The container ends before the data it declares."""


class ValidationError(SingdecError):
    """An input violates a documented precondition."""


class OovError(ValidationError):
    """A lyric word is missing from the lexicon."""

    def __init__(self, word: str):
        super().__init__(f"word not in lexicon: {word}")
        self.word = word


class InvariantError(SingdecError):
    """An internal consistency check failed."""
