"""Seeded, counter-splittable random streams.

Every stochastic routine draws from a ``numpy.random.Philox`` generator keyed
by ``SeedSequence(seed, spawn_key=(stream, *counters))``. Streams for
different purposes and different replica blocks are therefore independent and
reproducible regardless of how work is scheduled.
"""

import numpy as np

STREAM_ENV = 1
STREAM_BROWNIAN = 2
STREAM_WALK = 3
STREAM_ZETA_LIMIT = 4
STREAM_EXPERIMENT = 5

GENERATOR_NAME = "numpy.random.Philox"
SCHEME_VERSION = 1


def make_rng(seed, stream, *counters):
    """Return the generator for ``(seed, stream, *counters)``."""
    if seed is None or int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    key = (int(stream),) + tuple(int(c) for c in counters)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def rng_metadata():
    return {
        "generator": GENERATOR_NAME,
        "numpy": np.__version__,
        "scheme": "SeedSequence(seed, spawn_key=(stream, *counters))",
        "scheme_version": SCHEME_VERSION,
    }
