"""Deterministic, splittable random streams.

Every stream is a Philox generator keyed by (seed, domain, index), so any
consumer can be derived independently of execution order: run r of a Monte
Carlo experiment, sample s of an ensemble, or fragment v of a placement each
get their own stream as a pure function of the master seed. Parallel workers
therefore produce bit-identical results regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream domains; keep values stable, they are part of the seeding contract.
DOMAIN_RUN = 1          # one Monte Carlo simulation run
DOMAIN_PLACEMENT = 2    # one sampled ensemble placement
DOMAIN_FRAGMENT = 3     # one fragment's replica draws
DOMAIN_TRAJECTORY = 5   # the download trajectory of one ensemble sample


def stream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Generator for (seed, domain, index); a pure function of its arguments."""
    if index < 0 or index >= 1 << 56:
        raise ValueError(f"stream index out of range: {index}")
    key = (index << 72) | ((domain & 0xFF) << 64) | (int(seed) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_doubles(gen: np.random.Generator, n: int) -> np.ndarray:
    """n doubles in (0, 1) via 64-bit draws, (u + 0.5) / 2**64."""
    u = gen.integers(0, 1 << 64, size=n, dtype=np.uint64)
    return (u.astype(np.float64) + 0.5) * 2.0**-64


def standard_exponentials(gen: np.random.Generator, n: int) -> np.ndarray:
    """n unit-rate exponentials by inverse transform of 64-bit uniforms."""
    return -np.log(uniform_doubles(gen, n))


def bounded_picks(gen: np.random.Generator, n: int) -> list[int]:
    """n raw 64-bit words for later reduction onto varying ranges.

    Reduce word u onto range m with (u * m) >> 64; the bias is at most
    m / 2**64 and the draw count stays fixed per step.
    """
    return [int(u) for u in gen.integers(0, 1 << 64, size=n, dtype=np.uint64)]


def pick(word: int, m: int) -> int:
    """Map a 64-bit word onto [0, m) by multiply-shift."""
    return (word * m) >> 64
