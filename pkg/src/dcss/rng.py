"""Deterministic random substreams keyed by ``(seed, purpose, block)``.

Trials are processed in fixed-size blocks; each block draws from its own
stream, so results do not depend on how blocks are spread over threads.
"""
from __future__ import annotations

import zlib

import numpy as np

BLOCK_SIZE = 256


def _code(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, *labels: str | int) -> np.random.Generator:
    key = tuple(_code(x) if isinstance(x, str) else int(x) for x in labels)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def blocks(trials: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """``(block_index, start, stop)`` ranges covering ``trials``."""
    out = []
    for b, start in enumerate(range(0, trials, block_size)):
        out.append((b, start, min(start + block_size, trials)))
    return out
