"""Per-component seeds derived from one top-level seed.

``derive_seed(seed, name)`` is the first 8 bytes (little endian) of
``sha256(f"{seed}:{name}")`` with the top bit cleared, so every consumer of
randomness gets an independent, reproducible stream.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, component: str) -> int:
    digest = hashlib.sha256(f"{seed}:{component}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)
