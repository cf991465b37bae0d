"""Named, independently seeded random streams.

A master seed plus a stream name deterministically derive a Philox
counter-based generator, so adding draws to one stream never perturbs
another.  Paired experiments (e.g. pilot-only vs pilot+map) share channel
realizations by sharing the master seed while each component consumes its
own stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _derive_key(master_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Return a fresh generator for (master_seed, name). Same pair, same draws."""
    return np.random.Generator(np.random.Philox(key=_derive_key(master_seed, name)))


class StreamFactory:
    """Hands out named streams derived from one master seed.

    Repeated requests for the same name return the *same* generator object,
    so a component keeps advancing its own stream across calls.
    """

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = stream(self.master_seed, name)
        return self._streams[name]
