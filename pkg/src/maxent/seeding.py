"""Child random streams for realizations.

The seed of the stream for realization ``p`` at surrogate size ``M`` is

    h = mix(seed); h = mix(h ^ M); h = mix(h ^ p); h = mix(h ^ tag)

with ``mix`` the SplitMix64 finalizer below (64-bit wrap-around
arithmetic). The resulting integer seeds a numpy PCG64 generator. The
constants in this file are part of the output contract: changing any of
them changes every reported number.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL1 = 0xBF58476D1CE4E5B9
MIX_MUL2 = 0x94D049BB133111EB

# stream tags keep sampler, entropy and reference randomness apart
STREAM_TAGS = {
    "surrogate": 0x5355_5252,
    "entropy": 0x454E_5452,
    "reference_surrogate": 0x5245_4653,
    "reference_entropy": 0x5245_4645,
}


def mix64(x: int) -> int:
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL2) & MASK64
    return z ^ (z >> 31)


def child_seed(seed: int, m: int, p: int, stream: str) -> int:
    if stream not in STREAM_TAGS:
        raise ValueError(f"unknown stream {stream!r}")
    h = mix64(int(seed) & MASK64)
    h = mix64(h ^ (int(m) & MASK64))
    h = mix64(h ^ (int(p) & MASK64))
    return mix64(h ^ STREAM_TAGS[stream])


def child_rng(seed: int, m: int, p: int, stream: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(seed, m, p, stream)))
