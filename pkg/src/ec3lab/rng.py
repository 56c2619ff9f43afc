"""Counter-seedable 64-bit random number generation.

The generator is splitmix64 (Steele, Lea & Flood 2014): a fixed-increment
Weyl sequence passed through an avalanching finisher.  It is trivially
reproducible across platforms and Python versions, which is why instance
files embed ``gen=splitmix64`` next to the seed.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
GENERATOR_NAME = "splitmix64"


def _finalize(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic stream of 64-bit integers from a single seed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        return _finalize(self._state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via unbiased rejection."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53


def mix_seed(*parts: int) -> int:
    """Collapse several integers into one 64-bit seed.

    Used to derive independent per-trial streams from
    (master_seed, n_bits, trial_index) without overlap.
    """
    h = 0x8C9B7A1E4F2D6035
    for p in parts:
        h = _finalize((h ^ (p & _MASK)) * 0xFF51AFD7ED558CCD & _MASK)
    return h
