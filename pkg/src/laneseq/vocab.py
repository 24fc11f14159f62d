"""Token id layout shared by the codec, prompts, and constrained decoding.

Coordinate tokens occupy ids 0..base-1 where base = max(x_bins, y_bins);
slot position decides whether an id is read as an x bin, a y bin, or a
connection index. The nine special tokens sit directly above the
coordinate range, so the default 200x100 grid yields 209 ids total.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import CodecConfig

#: order of the class tokens; index in this tuple == class code
CLASS_NAMES = ("ancestor", "lineal", "offshoot", "clone")

ANCESTOR, LINEAL, OFFSHOOT, CLONE = range(4)


@dataclass(frozen=True)
class Vocabulary:
    x_bins: int
    y_bins: int

    @classmethod
    def from_config(cls, cfg: CodecConfig) -> "Vocabulary":
        return cls(cfg.x_bins, cfg.y_bins)

    @property
    def base(self) -> int:
        return max(self.x_bins, self.y_bins)

    @property
    def ancestor(self) -> int:
        return self.base

    @property
    def lineal(self) -> int:
        return self.base + 1

    @property
    def offshoot(self) -> int:
        return self.base + 2

    @property
    def clone(self) -> int:
        return self.base + 3

    @property
    def ncls(self) -> int:
        return self.base + 4

    @property
    def start(self) -> int:
        return self.base + 5

    @property
    def eok(self) -> int:
        return self.base + 6

    @property
    def eos(self) -> int:
        return self.base + 7

    @property
    def pad(self) -> int:
        return self.base + 8

    @property
    def size(self) -> int:
        return self.base + 9

    @property
    def class_tokens(self) -> tuple[int, int, int, int]:
        return (self.ancestor, self.lineal, self.offshoot, self.clone)

    def class_token(self, code: int) -> int:
        if not 0 <= code < 4:
            raise ValueError(f"class code must be 0..3, got {code}")
        return self.base + code

    def class_code(self, token: int) -> int:
        """Inverse of class_token; raises if the token is not a class."""
        code = token - self.base
        if not 0 <= code < 4:
            raise ValueError(f"token {token} is not a class token")
        return code

    def is_class(self, token: int) -> bool:
        return self.base <= token < self.base + 4

    def is_coordinate(self, token: int) -> bool:
        return 0 <= token < self.base

    def name(self, token: int) -> str:
        """Readable form for messages: bin ids as digits, specials tagged."""
        if self.is_coordinate(token):
            return str(token)
        specials = (*CLASS_NAMES, "ncls", "start", "eok", "eos", "pad")
        if token < self.size:
            return f"<{specials[token - self.base]}>"
        return f"<invalid:{token}>"
