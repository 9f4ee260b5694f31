"""Portable deterministic pseudo-random number generator.

All stochastic decisions in the library flow through :class:`Rng`, a pure
Python xoshiro256** generator seeded through splitmix64.  The algorithm is
fixed so that a given seed produces byte-identical draw sequences on every
platform and Python build; nothing here depends on the stdlib ``random``
module's internals.

Derived draws are defined once and used everywhere:

* ``random()`` is ``next_u64() / 2**64`` (a float in [0, 1); the upper
  endpoint is reachable only with probability 2**-54 due to rounding).
* ``randrange(n)`` is ``next_u64() % n``.  The modulo bias is negligible
  for the small ranges drawn during evolution and keeps the mapping
  trivially portable.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(x: int):
    """Yield the splitmix64 sequence starting from state ``x``."""
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


class Rng:
    """xoshiro256** generator with 64-bit output words.

    ``role`` is purely diagnostic ("master" or "worker"); the draw counter
    supports audits that the master generator is only consumed in
    sequential phases.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3", "role", "draws")

    def __init__(self, seed: int, role: str = "master"):
        sm = _splitmix64(seed & _MASK)
        self._s0 = next(sm)
        self._s1 = next(sm)
        self._s2 = next(sm)
        self._s3 = next(sm)
        self.role = role
        self.draws = 0

    def reset(self, seed: int) -> None:
        sm = _splitmix64(seed & _MASK)
        self._s0 = next(sm)
        self._s1 = next(sm)
        self._s2 = next(sm)
        self._s3 = next(sm)
        self.draws = 0

    def clone(self) -> "Rng":
        other = Rng.__new__(Rng)
        other._s0, other._s1, other._s2, other._s3 = (
            self._s0, self._s1, self._s2, self._s3,
        )
        other.role = self.role
        other.draws = self.draws
        return other

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK
        result = ((((x << 7) | (x >> 57)) & _MASK) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        self.draws += 1
        return result

    def random(self) -> float:
        return self.next_u64() / 18446744073709551616.0  # 2**64

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError(f"randrange bound must be positive, got {n}")
        return self.next_u64() % n

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def coin(self, p: float) -> bool:
        return self.random() < p
