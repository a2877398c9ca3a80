"""Counter-based random streams.

Every consumer of randomness asks for a stream keyed by
(master seed, purpose tag, replicate index).  Streams are Philox
generators seeded through a SeedSequence over that triple, so results never
depend on scheduling, thread count, or call order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "purpose_code"]

_MASK64 = (1 << 64) - 1


def purpose_code(tag: str) -> int:
    """Stable 64-bit code for a purpose tag."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, purpose: str, replicate: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=(int(seed) & _MASK64, purpose_code(purpose), int(replicate) & _MASK64)
    )
    return np.random.Generator(np.random.Philox(ss))
