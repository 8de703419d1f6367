"""Grapheme-to-phoneme conversion, one-hot encoding, and lyric edits."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singdec.errors import OovError, ValidationError
from singdec.text import (ARPABET, BLANK, BLANK_INDEX, INVENTORY, SPACE,
                          LyricEdit, PhonemeSequence, apply_lyric_edit,
                          encode_phonemes, g2p)


class TestInventory:
    def test_blank_is_index_zero(self):
        assert INVENTORY[0] == BLANK

    def test_rest_sorted(self):
        rest = INVENTORY[1:]
        assert list(rest) == sorted(rest)
        assert SPACE in rest
        assert len(INVENTORY) == len(ARPABET) + 2


class TestG2p:
    def test_white_as_snow(self, lexicon):
        seq = g2p("white as snow", lexicon)
        assert seq.phonemes == ("W", "AY", "T", SPACE, "AE", "Z", SPACE,
                                "S", "N", "OW")
        assert [s.word for s in seq.word_spans] == ["WHITE", "AS", "SNOW"]

    def test_empty_lyrics(self, lexicon):
        with pytest.raises(ValidationError):
            g2p("", lexicon)
        with pytest.raises(ValidationError):
            g2p("  ...  ", lexicon)

    def test_oov_names_word(self, lexicon):
        with pytest.raises(OovError) as err:
            g2p("qzxqzx", lexicon)
        assert err.value.word == "QZXQZX"

    def test_punctuation_and_case(self, lexicon):
        a = g2p("Oh, dear! What can the matter be?", lexicon)
        b = g2p("oh dear what can the matter be", lexicon)
        assert a.phonemes == b.phonemes

    def test_deterministic(self, lexicon):
        a = g2p("little lamb little lamb", lexicon)
        b = g2p("little lamb little lamb", lexicon)
        assert a == b

    def test_word_spans_cover_words(self, lexicon):
        seq = g2p("he promised to bring me a bunch of red roses", lexicon)
        for span in seq.word_spans:
            assert 0 <= span.start < span.stop <= len(seq)
            assert SPACE not in seq.phonemes[span.start:span.stop]


class TestEncode:
    def test_one_hot_shape_and_rows(self):
        seq = PhonemeSequence(("W", "AY", "T"))
        enc = encode_phonemes(seq)
        assert enc.shape == (3, len(INVENTORY))
        assert np.count_nonzero(enc) == 3
        assert np.all(enc.sum(axis=1) == 1.0)

    def test_blank_row(self):
        enc = encode_phonemes(PhonemeSequence((BLANK,)))
        assert enc[0, BLANK_INDEX] == 1.0
        assert enc[0].sum() == 1.0

    def test_equal_symbols_equal_rows(self):
        enc = encode_phonemes(PhonemeSequence(("AA", "B", "AA")))
        assert np.array_equal(enc[0], enc[2])
        assert not np.array_equal(enc[0], enc[1])


class TestLyricEdits:
    def test_delete_returns_zero_indices(self, lexicon):
        seq = g2p("oh dear what can the matter be", lexicon)
        # the word "what" occupies three phonemes: W AH T
        span = next(s for s in seq.word_spans if s.word == "WHAT")
        out, zeroed = apply_lyric_edit(seq, LyricEdit("delete", span.start, span.stop))
        assert zeroed == tuple(range(span.start, span.stop))
        assert out.phonemes[span.start:span.stop] == (BLANK,) * 3
        assert out.phonemes[:span.start] == seq.phonemes[:span.start]
        assert out.phonemes[span.stop:] == seq.phonemes[span.stop:]

    def test_blank_all_keeps_pitch(self, lexicon):
        seq = g2p("little lamb", lexicon)
        out, zeroed = apply_lyric_edit(seq, LyricEdit("blank_all"))
        assert out.phonemes == (BLANK,) * len(seq)
        assert zeroed == ()

    def test_substitute_equal_length(self, lexicon):
        seq = g2p("oh dear what can the matter be", lexicon)
        span = next(s for s in seq.word_spans if s.word == "MATTER")
        assert seq.phonemes[span.start:span.stop] == ("M", "AE", "T", "ER")
        edit = LyricEdit("substitute", span.start, span.stop,
                         ("B", "AA", "DH", "ER"))
        out, zeroed = apply_lyric_edit(seq, edit)
        assert zeroed == ()
        assert out.phonemes[span.start:span.stop] == ("B", "AA", "DH", "ER")
        assert len(out) == len(seq)

    def test_substitute_length_mismatch(self, lexicon):
        seq = g2p("white as snow", lexicon)
        with pytest.raises(ValidationError):
            apply_lyric_edit(seq, LyricEdit("substitute", 0, 3, ("AA",)))

    def test_span_out_of_range(self, lexicon):
        seq = g2p("white", lexicon)
        with pytest.raises(ValidationError):
            apply_lyric_edit(seq, LyricEdit("delete", 0, 99))

    def test_delete_then_encode_equals_encode_then_overwrite(self, lexicon):
        seq = g2p("its fleece was white as snow", lexicon)
        out, _ = apply_lyric_edit(seq, LyricEdit("delete", 2, 5))
        via_edit = encode_phonemes(out)
        via_rows = encode_phonemes(seq).copy()
        blank_row = np.zeros(len(INVENTORY))
        blank_row[BLANK_INDEX] = 1.0
        via_rows[2:5] = blank_row
        assert np.array_equal(via_edit, via_rows)

    @given(st.integers(0, 9), st.integers(0, 9))
    @settings(max_examples=40, deadline=None)
    def test_edits_never_change_length(self, a, b):
        seq = PhonemeSequence(tuple(ARPABET[:10]))
        lo, hi = min(a, b), max(a, b) + 1
        for edit in (LyricEdit("delete", lo, hi),
                     LyricEdit("substitute", lo, hi, ("AA",) * (hi - lo)),
                     LyricEdit("blank_all")):
            out, _ = apply_lyric_edit(seq, edit)
            assert len(out) == len(seq)


class TestSequenceValidation:
    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            PhonemeSequence(())

    def test_unknown_symbol_rejected(self):
        with pytest.raises(ValidationError):
            PhonemeSequence(("XX",))
