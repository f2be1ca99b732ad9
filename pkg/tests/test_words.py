from __future__ import annotations

import pytest

from renormlab.words import C, V, Word, scan_word, word_successor


def test_little_endian_index() -> None:
    w = Word.parse("cvc")
    assert w.bits == (C, V, C)
    assert w.index == 5
    assert Word.from_index(5, 3) == w
    assert str(Word()) == "-"


def test_successor_is_an_odometer() -> None:
    assert word_successor(Word.parse("vv")) == Word.parse("cv")
    assert word_successor(Word.parse("cv")) == Word.parse("vc")
    assert word_successor(Word.parse("cc")) == Word.parse("vv")
    seen = set()
    w = Word((V,) * 4)
    for _ in range(16):
        seen.add(w)
        w = word_successor(w)
    assert len(seen) == 16 and w == Word((V,) * 4)


def test_scan_word() -> None:
    assert str(scan_word(2, 4)) == "vvcv"
    with pytest.raises(ValueError):
        scan_word(3, 3)


def test_bad_letters() -> None:
    with pytest.raises(ValueError, match="Unknown word letter"):
        Word.parse("vx")
