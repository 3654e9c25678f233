"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a root seed and
a tuple of integers, so replicate i or sweep point k always draws the same
numbers no matter which worker runs it or in what order.
"""
import numpy as np

from sim_data.models import ParameterError


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *key)."""
    if int(seed) != seed or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    if any(int(k) != k or k < 0 for k in key):
        raise ParameterError(f"stream keys must be non-negative integers, got {key!r}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for the stream (seed, *key), for logging and CSV output."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
