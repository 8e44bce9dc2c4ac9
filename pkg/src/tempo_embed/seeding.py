# -*- coding: utf-8 -*-

"""Named random streams derived from a single integer seed.

Each consumer asks for a stream by name, so adding a new consumer never shifts
the numbers another consumer draws.
"""

import zlib

import numpy as np

__all__ = [
    "stream_key",
    "derive_rng",
    "derive_seed",
]


def stream_key(name: str) -> int:
    """Return the stable 32-bit key of a stream name.

    :param name: The stream name, e.g. ``"model.init"``.
    :type name: str
    :return: The key.
    :rtype: int
    """
    return zlib.crc32(name.encode("utf-8"))


def derive_rng(seed: int, name: str) -> np.random.Generator:
    """Create the generator of a named stream.

    :param seed: The root seed.
    :type seed: int
    :param name: The stream name.
    :type name: str
    :return: A generator private to the stream.
    :rtype: np.random.Generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name),))
    return np.random.default_rng(sequence)


def derive_seed(seed: int, name: str) -> int:
    """Derive a child integer seed, for handing to code that takes plain seeds.

    :param seed: The root seed.
    :type seed: int
    :param name: The stream name.
    :type name: str
    :return: A 63-bit seed.
    :rtype: int
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
