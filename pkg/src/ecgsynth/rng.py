"""Portable 64-bit random streams.

Streams are xoshiro256** generators whose state is filled from a SplitMix64
sequence.  Per-record seeds come from :func:`stable_hash`, defined as::

    data  = global_seed as 8 little-endian bytes + UTF-8(record_id),
            zero-padded to a multiple of 8 bytes
    h     = 0
    for each little-endian 64-bit word w of data:
        h = mix64((h + 0x9E3779B97F4A7C15) ^ w)
    seed  = mix64(h ^ len(UTF-8(record_id)))

where ``mix64`` is the SplitMix64 finalizer.  All arithmetic is mod 2**64,
so the mapping is identical on every platform and in every language.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stable_hash(global_seed: int, record_id: str) -> int:
    text = record_id.encode("utf-8")
    data = (global_seed & MASK64).to_bytes(8, "little") + text
    data += b"\0" * (-len(data) % 8)
    h = 0
    for i in range(0, len(data), 8):
        word = int.from_bytes(data[i:i + 8], "little")
        h = mix64(((h + GOLDEN_GAMMA) & MASK64) ^ word)
    return mix64(h ^ len(text))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class RandomStream:
    """xoshiro256** seeded through SplitMix64; one ``next_u64`` per draw."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        sm = self.seed
        state = []
        for _ in range(4):
            sm = (sm + GOLDEN_GAMMA) & MASK64
            state.append(mix64(sm))
        self._s = state
        self.draws = 0

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        self.draws += 1
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Integer in [0, n) by multiply-shift (exact for powers of two)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def choice(self, options):
        options = tuple(options)
        return options[self.below(len(options))]

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()


def derive_rng(global_seed: int, record_id: str) -> RandomStream:
    """Independent, reproducible stream for one record."""
    return RandomStream(stable_hash(global_seed, record_id))
