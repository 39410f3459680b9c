"""Bitstring helpers.

Bitstrings are plain ``str`` objects over ``"0"``/``"1"`` with the most
significant bit first. Everything in the package that talks about messages,
attributes, identities or register contents uses this representation.
"""

from __future__ import annotations

import numpy as np

_BITS = frozenset("01")


def check_bits(s: str, width: int | None = None, what: str = "bitstring") -> str:
    if not isinstance(s, str) or not _BITS.issuperset(s):
        raise ValueError(f"{what} must be a string over '0'/'1', got {s!r}")
    if width is not None and len(s) != width:
        raise ValueError(f"{what} has width {len(s)}, expected {width}")
    return s


def random_bits(rng: np.random.Generator, n: int) -> str:
    if n == 0:
        return ""
    return (rng.integers(0, 2, size=n, dtype=np.uint8) + ord("0")).tobytes().decode()


def xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        return ""
    return format(int(a, 2) ^ int(b, 2), f"0{len(a)}b")


def bits_to_int(s: str) -> int:
    return int(s, 2) if s else 0


def int_to_bits(v: int, width: int) -> str:
    if v < 0 or v >> width:
        raise ValueError(f"value {v} does not fit in {width} bits")
    return format(v, f"0{width}b") if width else ""


def bits_to_hex(s: str) -> str:
    """Hex digits for ``s``, zero-padded to ceil(len/4) digits."""
    digits = max(1, (len(s) + 3) // 4)
    return format(bits_to_int(s), f"0{digits}x")


def hex_to_bits(h: str, width: int) -> str:
    return int_to_bits(int(h, 16), width)


def inner_product_bits(x: str, r: str) -> int:
    """XOR of the bitwise AND of ``x`` and ``r``."""
    if len(x) != len(r):
        raise ValueError(f"length mismatch: {len(x)} vs {len(r)}")
    return (bits_to_int(x) & bits_to_int(r)).bit_count() & 1 if x else 0


def split_blocks(m: str, blocks: int, block_len: int) -> list[str]:
    if len(m) != blocks * block_len:
        raise ValueError(
            f"message has {len(m)} bits, expected {blocks} blocks of {block_len}"
        )
    return [m[i * block_len:(i + 1) * block_len] for i in range(blocks)]
