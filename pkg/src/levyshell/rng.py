"""Deterministic stream derivation for reproducible Monte Carlo.

Streams are counter-based Philox generators keyed by (master seed,
stream id...).  All randomness for an ensemble is drawn from its stream
before any integration fans out, so results never depend on scheduling.
"""

import numpy as np


def make_rng(seed: int, *stream_ids: int) -> np.random.Generator:
    """Philox generator for the stream (seed, *stream_ids)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream_ids)])
    return np.random.Generator(np.random.Philox(ss))
