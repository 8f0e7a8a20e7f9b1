from __future__ import annotations

import numpy as np


def path_rng(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one (seed, path, stream) triple.

    Philox is keyed by a SeedSequence whose spawn key carries the path index
    and stream number, so a path's draws never depend on how many other paths
    are generated or in which order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def chunk_indices(n: int, n_chunks: int) -> list[range]:
    n_chunks = max(1, min(int(n_chunks), n))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(n_chunks)]
