"""Seeded, named random substreams.

Each (seed, name, keys) triple maps to its own independent numpy Generator,
so algorithms simulated on the same seed and slot see identical link
generation draws no matter how many purification or swap draws they make.
"""
from __future__ import annotations

import zlib
from typing import NamedTuple

import numpy as np


class SlotStreams(NamedTuple):
    generation: np.random.Generator
    purification: np.random.Generator
    swap: np.random.Generator


class RandomStream:
    def __init__(self, seed: int):
        self.seed = int(seed)

    def substream(self, name: str, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()), *map(int, keys)))
        return np.random.Generator(np.random.PCG64(ss))

    def topology(self) -> np.random.Generator:
        return self.substream("topology")

    def requests(self, slot: int) -> np.random.Generator:
        return self.substream("requests", slot)

    def slot(self, slot: int) -> SlotStreams:
        return SlotStreams(
            self.substream("generation", slot),
            self.substream("purification", slot),
            self.substream("swap", slot),
        )
