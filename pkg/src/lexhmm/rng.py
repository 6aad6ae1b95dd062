"""SplitMix64 streams keyed by (seed, iteration, word type, slot).

Both kernel backends use this generator so that a run is bit-identical
whichever backend executes it, and every particle owns an independent stream
that does not depend on scheduling.
"""

from __future__ import annotations

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0

# stream slots inside one type sweep
SLOT_REMOVE = 0
SLOT_CLASS = 1
SLOT_SELECT = 2
SLOT_PARTICLE = 3   # particle p uses SLOT_PARTICLE + p


def mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK
    return z ^ (z >> 31)


def derive(key: int, slot: int) -> int:
    """Child key for ``slot`` under ``key``."""
    return mix64((key ^ mix64((slot + 1) * GOLDEN & MASK)) & MASK)


def stream_key(seed: int, *path: int) -> int:
    key = mix64(int(seed) & MASK)
    for p in path:
        key = derive(key, int(p) & MASK)
    return key


class Stream:
    """SplitMix64 generator; ``uniform`` returns 53-bit doubles in [0, 1)."""

    __slots__ = ("state",)

    def __init__(self, key: int):
        self.state = key & MASK

    def next64(self) -> int:
        self.state = s = (self.state + GOLDEN) & MASK
        s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9 & MASK
        s = (s ^ (s >> 27)) * 0x94D049BB133111EB & MASK
        return s ^ (s >> 31)

    def uniform(self) -> float:
        return (self.next64() >> 11) * _INV53

    def randbelow(self, n: int) -> int:
        return int(self.uniform() * n)

    def categorical(self, weights) -> int:
        """Index drawn proportionally to nonnegative ``weights``."""
        total = 0.0
        for w in weights:
            total += w
        x = self.uniform() * total
        last = 0
        for i, w in enumerate(weights):
            if w > 0.0:
                if x < w:
                    return i
                last = i
            x -= w
        return last
