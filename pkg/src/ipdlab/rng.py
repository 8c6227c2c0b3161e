"""Deterministic, domain-separated random streams.

Every match owns one 64-bit seed. Each consumer of randomness inside the
match (the horizon stop draw, each player's action sampling) pulls from its
own named stream so that draw order in one stream can never perturb another.
Streams are derived by hashing (seed, label), which makes them reproducible
across platforms, processes, and thread schedules.
"""

from __future__ import annotations

import hashlib
import random

MAX_SEED = 2**64 - 1


def child_seed(seed: int, label: str) -> int:
    """Derive a stream seed from a match seed and a stream label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


def derive_seed(*parts: object) -> int:
    """Fold arbitrary identifying parts into a 64-bit seed.

    Used for per-match seeds in tournaments: hashing the pairing identity
    (not its position in a schedule) keeps every pairing's seeds stable when
    other players are added or removed.
    """
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream:
    """One named draw sequence. Same (seed, label) always replays identically."""

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        self._rng = random.Random(child_seed(seed, label))

    def uniform(self) -> float:
        """Next u ~ U[0, 1)."""
        return self._rng.random()


class GameRng:
    """Factory for a match's domain-separated streams."""

    def __init__(self, seed: int):
        if not (0 <= seed <= MAX_SEED):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed

    def stream(self, label: str) -> RngStream:
        return RngStream(self.seed, label)
