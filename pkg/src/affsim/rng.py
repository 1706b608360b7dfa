"""Counter-based random streams.

Every consumer of randomness asks for a named stream derived from
(seed, *tags).  Streams with distinct tags are statistically independent
Philox instances, so results never depend on scheduling or on how work is
chunked across workers -- only on the (seed, tags) key.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, *tags: object) -> np.random.Generator:
    """Independent generator keyed by an integer seed and hashable tags.

    Tags are serialized to text and hashed, so any mix of strings and
    integers works: stream(7, "main", "doob", 3).
    """
    h = hashlib.blake2s(digest_size=16)
    for tag in tags:
        h.update(repr(tag).encode())
        h.update(b"\x1f")
    digest = h.digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence([int(seed) & _MASK64, *words])
    return np.random.Generator(np.random.Philox(ss))


def thread_count() -> int:
    """Worker cap from AFFSIM_THREADS (>=1). Affects speed, never results."""
    raw = os.environ.get("AFFSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_ranges(n: int, chunk: int) -> list[tuple[int, int, int]]:
    """Deterministic (index, start, stop) chunking of range(n).

    The chunk size is part of an experiment's configuration: changing it
    changes which stream serves which replica, so it is fixed per
    experiment, not derived from the machine.
    """
    if chunk <= 0:
        raise ValueError("chunk must be positive")
    out = []
    for idx, start in enumerate(range(0, n, chunk)):
        out.append((idx, start, min(start + chunk, n)))
    return out
