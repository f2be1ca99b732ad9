"""Dyadic words over {v, c} and the adding machine."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from renormlab import config

V, C = 0, 1
_LETTERS = {"v": V, "c": C}


@dataclass(frozen=True, order=True)
class Word:
    """Letters w_1 ... w_n with v = 0, c = 1; w_1 is the least significant digit."""

    bits: tuple[int, ...] = ()

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (V, C) for b in bits):
            raise ValueError(f"word letters must be 0 (v) or 1 (c), got {bits}")
        if len(bits) > config.DEPTH_BUDGET + 1:
            raise ValueError(f"word length {len(bits)} exceeds depth budget {config.DEPTH_BUDGET}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def parse(cls, text: str) -> "Word":
        try:
            return cls(tuple(_LETTERS[ch] for ch in text.strip().lower()))
        except KeyError as e:
            raise ValueError(f"Unknown word letter: {e.args[0]}") from None

    @classmethod
    def from_index(cls, index: int, length: int) -> "Word":
        return cls(tuple((index >> j) & 1 for j in range(length)))

    @classmethod
    def all(cls, length: int) -> Iterator["Word"]:
        for i in range(2**length):
            yield cls.from_index(i, length)

    @property
    def index(self) -> int:
        return sum(b << j for j, b in enumerate(self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.bits + other.bits)

    def __str__(self) -> str:
        return "".join("vc"[b] for b in self.bits) or "-"


def word_successor(w: Word) -> Word:
    """Increment with carry modulo 2^n."""
    if not w.bits:
        return w
    return Word.from_index((w.index + 1) % 2 ** len(w), len(w))


def scan_word(k: int, n: int) -> Word:
    """v^k c v^(n-k-1), the word whose piece sits next to the critical region at depth k."""
    if not 0 <= k < n:
        raise ValueError(f"scan word needs 0 <= k < n, got k={k}, n={n}")
    return Word((V,) * k + (C,) + (V,) * (n - k - 1))
