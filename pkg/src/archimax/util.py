"""Shared helpers: RNG coercion, simplex draws, chunked iteration."""

from __future__ import annotations

import numpy as np


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed or an existing Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    """Derive n independent child generators from one seed.

    Children are built from a SeedSequence spawn so that parallel or
    out-of-order consumption cannot change any stream.
    """
    if isinstance(seed, np.random.Generator):
        ss = seed.bit_generator.seed_seq
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(n)]


def uniform_simplex(count: int, d: int, rng) -> np.ndarray:
    """Draw `count` points uniformly on the (d-1)-simplex.

    Uses normalized standard exponentials.
    """
    rng = as_rng(rng)
    e = rng.standard_exponential(size=(count, d))
    return e / e.sum(axis=1, keepdims=True)


def chunks(n: int, size: int):
    """Yield (start, stop) index pairs covering range(n) in blocks."""
    for start in range(0, n, size):
        yield start, min(start + size, n)
