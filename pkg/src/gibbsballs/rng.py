"""Deterministic random streams derived from a run seed."""
import numpy as np

ROLES = {"poisson": 0, "thin1": 1, "thin2": 2, "aux": 3, "mc": 4, "boundary": 5}


def stream(seed: int, *path) -> np.random.Generator:
    """Generator for the stream addressed by ``path`` under ``seed``.

    Path entries are non-negative ints or role names from :data:`ROLES`;
    the same (seed, path) always yields the same stream and different paths
    give statistically independent streams.
    """
    key = tuple(ROLES[p] if isinstance(p, str) else int(p) for p in path)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
