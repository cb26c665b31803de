"""Seeded uniform draws that reproduce across platforms and languages.

The stream is numpy's Philox-4x64-10 counter-based generator keyed with the
seed (counter starting at zero). Each 64-bit output ``u`` is mapped to
``[0, 1)`` as ``(u >> 11) * 2**-53`` and then scaled to ``[low, high)``.
Both steps are fully specified, so the sequence does not depend on numpy's
floating-point sampling routines.
"""

from __future__ import annotations

import numpy as np


def raw_stream(seed: int, size: int) -> np.ndarray:
    """First ``size`` 64-bit outputs of Philox-4x64-10 keyed by ``seed``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    bitgen = np.random.Philox(key=int(seed))
    return bitgen.random_raw(size).astype(np.uint64)


def uniform(seed: int, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    u = raw_stream(seed, size)
    unit = (u >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return low + (high - low) * unit
