"""Character-level vocabulary with two reserved ids (end-of-sequence, sentinel)."""

from __future__ import annotations

from dataclasses import dataclass, field

EOS_SYMBOL = "<|eos|>"
SENTINEL_SYMBOL = "<|sep|>"

# printable ASCII plus newline; 96 ordinary symbols
DEFAULT_ALPHABET = "\n" + "".join(chr(c) for c in range(32, 127))


@dataclass(frozen=True)
class Vocabulary:
    """Ordinary symbols get ids ``0..n-1``; eos is ``n`` and the sentinel ``n+1``."""

    symbols: tuple[str, ...]
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("vocabulary symbols must be unique")
        if any(len(s) != 1 for s in self.symbols):
            raise ValueError("character-level vocabulary: every symbol must be one character")
        if len(self.symbols) + 2 > 512:
            raise ValueError("vocabulary larger than 512 ids")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @classmethod
    def default(cls) -> "Vocabulary":
        return cls(tuple(DEFAULT_ALPHABET))

    @classmethod
    def synthetic(cls, size: int) -> "Vocabulary":
        """A vocabulary of exactly ``size`` ids (including the two reserved ones)."""
        if size < 3:
            raise ValueError("size must leave room for at least one ordinary symbol")
        return cls(tuple(chr(0x4E00 + i) for i in range(size - 2)))

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        return cls(tuple(sorted(set(text))))

    @property
    def size(self) -> int:
        return len(self.symbols) + 2

    @property
    def eos_id(self) -> int:
        return len(self.symbols)

    @property
    def sentinel_id(self) -> int:
        return len(self.symbols) + 1

    @property
    def reserved_ids(self) -> frozenset[int]:
        return frozenset((self.eos_id, self.sentinel_id))

    @property
    def n_ordinary(self) -> int:
        return len(self.symbols)

    def token_to_id(self, tok: str) -> int:
        if tok == EOS_SYMBOL:
            return self.eos_id
        if tok == SENTINEL_SYMBOL:
            return self.sentinel_id
        return self._index[tok]

    def id_to_token(self, i: int) -> str:
        if i == self.eos_id:
            return EOS_SYMBOL
        if i == self.sentinel_id:
            return SENTINEL_SYMBOL
        return self.symbols[i]

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[c] for c in text]
        except KeyError as e:
            raise ValueError(f"character {e.args[0]!r} is not in the vocabulary") from None

    def decode(self, ids) -> str:
        return "".join(self.id_to_token(int(i)) for i in ids)

    def to_json(self) -> dict:
        return {"symbols": "".join(self.symbols)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(tuple(obj["symbols"]))

