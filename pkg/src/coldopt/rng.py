"""Seeded random streams.

Every random draw in coldopt comes from a named sub-stream of one master
seed. A sub-stream is a PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(STREAMS[name],))``; numpy documents both the
mixing and the PCG64 output sequence as stable, so a given (seed, name) pair
always yields the same numbers, and adding a new stream never shifts the
others.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "temperature": 0,
    "humidity": 1,
    "packaging": 2,
    "environment": 3,
    "noise": 4,
    "lead_time_demand": 5,
    "scenarios": 6,
}


def stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(STREAMS[name],))
    return np.random.Generator(np.random.PCG64(seq))
