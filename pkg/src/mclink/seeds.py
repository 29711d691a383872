"""Deterministic RNG stream derivation.

Every random stream is keyed by (master seed, trial index, purpose tag) via
numpy's SeedSequence, so any subset of trials reproduces bit-exactly and no
stream is shared across purposes. Noise streams additionally mix in the
receiver position's float bit patterns: receivers at distinct positions get
independent noise, while a probe placed exactly on the main receiver sees
the identical observation.
"""

from __future__ import annotations

import struct

import numpy as np

TAG_VELOCITY = 0x76656C6F  # "velo"
TAG_NOISE = 0x6E6F6973  # "nois"
TAG_DATA = 0x64617461  # "data"


def stream(master_seed: int, trial_index: int, tag: int, extra=()) -> np.random.Generator:
    entropy = [int(master_seed), int(trial_index), int(tag), *(int(x) for x in extra)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def position_words(pos) -> tuple[int, ...]:
    """Stable unsigned words from the exact float64 bit patterns of a position."""
    return struct.unpack("<3Q", struct.pack("<3d", *(float(c) for c in pos)))


def noise_stream(master_seed: int, trial_index: int, pos) -> np.random.Generator:
    return stream(master_seed, trial_index, TAG_NOISE, position_words(pos))
