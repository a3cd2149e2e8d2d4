"""Counter-based random-number streams.

Every stochastic trajectory draws from its own Philox stream keyed by
(master_seed, trajectory_id), so ensembles are bit-reproducible and
independent of execution order or worker count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def trajectory_rng(master_seed: int, trajectory_id: int) -> np.random.Generator:
    """Independent generator for one trajectory of one ensemble."""
    key = np.array(
        [int(master_seed) & _MASK64, int(trajectory_id) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))
