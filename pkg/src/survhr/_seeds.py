"""Deterministic seed derivation.

All randomized stages derive child seeds through ``numpy.random.SeedSequence``,
whose hashing is stable across platforms and numpy versions. Replicate b of a
bootstrap run, attempt a of a CV partition, round r of a boosting run, etc.
are all addressed as ``derive_seed(parent_seed, index, ...)`` so that parallel
and serial execution see identical streams.
"""

import numpy as np


def derive_seed(*parts: int) -> int:
    """Collapse an integer path into a single reproducible 64-bit seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])
