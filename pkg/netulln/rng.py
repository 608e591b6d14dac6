"""Counter-based random streams keyed by (master seed, stage, counters)."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from blake3 import blake3

SeedLike = int | np.random.SeedSequence


@lru_cache(maxsize=None)
def stage_code(stage: str) -> int:
    """Stable 32-bit code for a stage name."""
    return int.from_bytes(blake3(stage.encode("utf-8")).digest(length=4), "big")


def stream_seed(master_seed: int, stage: str, *counters: int) -> np.random.SeedSequence:
    """Seed sequence for one (stage, counters) cell of a run.

    The key depends only on its arguments, so scheduling order cannot change
    which numbers a replication sees.
    """
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    key = (stage_code(stage), *(int(counter) for counter in counters))
    return np.random.SeedSequence(entropy=master_seed, spawn_key=key)


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(entropy=int(seed))


def child(seed: SeedLike, *counters: int) -> np.random.SeedSequence:
    """Child sequence; unlike ``SeedSequence.spawn`` this keeps no state."""
    parent = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=(*parent.spawn_key, *(int(counter) for counter in counters)),
    )


def generator(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(as_seed_sequence(seed)))


def seed_record(seed: SeedLike) -> tuple[int, ...]:
    """Flat integer record (entropy first) that rebuilds ``seed``."""
    sequence = as_seed_sequence(seed)
    return (int(sequence.entropy), *(int(key) for key in sequence.spawn_key))


def from_record(record: tuple[int, ...]) -> np.random.SeedSequence:
    entropy, *spawn_key = record
    return np.random.SeedSequence(entropy=entropy, spawn_key=tuple(spawn_key))


def int_seed(seed: SeedLike) -> int:
    """32-bit integer seed for libraries that take plain ints."""
    return int(as_seed_sequence(seed).generate_state(1, dtype=np.uint32)[0])
