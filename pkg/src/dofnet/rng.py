"""Deterministic named random substreams.

Every stochastic choice in the package (weight init, minibatch shuffles,
dropout and corruption masks, data generation, perturbation matrices) is
drawn from a substream derived from a single 64-bit seed. Substreams are
numpy PCG64 generators keyed by ``SeedSequence(seed, spawn_key=(crc32(name),))``,
which is a fixed, platform-independent construction: the same seed always
reproduces the same draw sequence. This is the mechanism behind the
common-random-numbers variance reduction: two training runs that share a
seed see identical initial weights, minibatch splits, and masks, so their
fitted models differ only through the data they were shown.
"""

import zlib

import numpy as np


def _spawn_key(name):
    return zlib.crc32(name.encode("utf-8"))


class RngStream:
    """A seed plus named, independent substreams.

    ``generator(name)`` always returns a fresh generator positioned at the
    start of the named substream; two calls with the same name yield
    identical sequences.
    """

    def __init__(self, seed):
        self.seed = int(seed)

    def generator(self, name):
        ss = np.random.SeedSequence(self.seed, spawn_key=(_spawn_key(name),))
        return np.random.Generator(np.random.PCG64(ss))

    def derive_seed(self, name):
        """A 63-bit integer seed for handing to another RngStream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(_spawn_key(name),))
        return int(ss.generate_state(1, np.uint64)[0] >> 1)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def subseed(seed, name):
    """Derive a named integer seed without constructing an RngStream."""
    return RngStream(seed).derive_seed(name)


def indexed_seed(seed, index):
    """Derive the seed of the ``index``-th replicate of a seeded family."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)
