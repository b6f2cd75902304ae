"""Per-frame randomness: 160 keystream bits split into ten mixed-modulus integers.

The default generator is AES-256 in counter mode keyed by the 32-byte seed.
Anything that yields a deterministic byte stream can stand in for it, which
is how tests inject hand-made bitstrings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

NU_BITS = (16, 16, 15, 16, 16, 16, 16, 16, 16, 17)
NU_MODULI = tuple(1 << b for b in NU_BITS)
FRAME_BITS = sum(NU_BITS)
FRAME_BYTES = FRAME_BITS // 8
SEED_BYTES = 32


@dataclass(frozen=True)
class Seed:
    value: bytes

    def __post_init__(self):
        if not isinstance(self.value, (bytes, bytearray)) or len(self.value) != SEED_BYTES:
            raise ValueError(f"seed must be exactly {SEED_BYTES} bytes")
        object.__setattr__(self, "value", bytes(self.value))

    @classmethod
    def from_hex(cls, text: str) -> "Seed":
        text = text.strip()
        if len(text) != 2 * SEED_BYTES or any(c not in "0123456789abcdef" for c in text.lower()):
            raise ValueError("seed must be 64 hexadecimal characters")
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class FrameRandoms:
    """``nu[0]`` shifts pitch, ``nu[1]`` energy, ``nu[2:]`` the timbre coset."""

    nu: tuple

    def __post_init__(self):
        nu = tuple(int(v) for v in self.nu)
        if len(nu) != len(NU_MODULI):
            raise ValueError("expected ten values")
        for v, m in zip(nu, NU_MODULI):
            if not 0 <= v < m:
                raise ValueError(f"value {v} outside [0, {m})")
        object.__setattr__(self, "nu", nu)

    @classmethod
    def zero(cls) -> "FrameRandoms":
        return cls((0,) * len(NU_MODULI))

    @property
    def pitch(self) -> int:
        return self.nu[0]

    @property
    def energy(self) -> int:
        return self.nu[1]

    @property
    def timbre(self) -> tuple:
        return self.nu[2:]

    def __add__(self, other: "FrameRandoms") -> "FrameRandoms":
        return FrameRandoms(tuple((a + b) % m for a, b, m in zip(self.nu, other.nu, NU_MODULI)))


def split_block(block: bytes) -> FrameRandoms:
    """Read the ten chunks of a 20-byte block, most significant bit first."""
    if len(block) != FRAME_BYTES:
        raise ValueError(f"block must be {FRAME_BYTES} bytes")
    acc = int.from_bytes(block, "big")
    out = []
    remaining = FRAME_BITS
    for b in NU_BITS:
        remaining -= b
        out.append((acc >> remaining) & ((1 << b) - 1))
    return FrameRandoms(tuple(out))


def join_block(nu: FrameRandoms) -> bytes:
    acc = 0
    for v, b in zip(nu.nu, NU_BITS):
        acc = (acc << b) | v
    return acc.to_bytes(FRAME_BYTES, "big")


class AesCtrKeystream:
    """AES-256-CTR keystream; counter block starts at zero."""

    def __init__(self, seed: Seed):
        self._enc = Cipher(algorithms.AES(seed.value), modes.CTR(bytes(16))).encryptor()
        self.frames_drawn = 0

    def read(self, nbytes: int) -> bytes:
        return self._enc.update(bytes(nbytes))


class BitstringKeystream:
    """Replays a fixed byte string; raises once it is exhausted."""

    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._pos = 0
        self.frames_drawn = 0

    @classmethod
    def from_bits(cls, bits) -> "BitstringKeystream":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size % 8:
            raise ValueError("bit count must be a multiple of 8")
        return cls(np.packbits(bits).tobytes())

    def read(self, nbytes: int) -> bytes:
        if self._pos + nbytes > len(self._data):
            raise EOFError("injected bitstring exhausted")
        out = self._data[self._pos : self._pos + nbytes]
        self._pos += nbytes
        return out


def new_generator(seed) -> AesCtrKeystream:
    if isinstance(seed, str):
        seed = Seed.from_hex(seed)
    elif isinstance(seed, (bytes, bytearray)):
        seed = Seed(seed)
    return AesCtrKeystream(seed)


def next_frame_randoms(state) -> FrameRandoms:
    nu = split_block(state.read(FRAME_BYTES))
    state.frames_drawn += 1
    return nu
