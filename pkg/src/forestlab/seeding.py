"""Keyed derivation of independent random sub-streams.

Every random draw in the package comes from a stream identified by a
master seed plus a purpose tag and integer indices, e.g.
``("train", 17)`` or ``("bootstrap", 3)``.  The key is mapped onto
:class:`numpy.random.SeedSequence` as::

    SeedSequence(entropy=<master entropy>,
                 spawn_key=(blake2b_32(tag), *indices))

where ``blake2b_32`` is the first four bytes (big endian) of the BLAKE2b
digest of the UTF-8 tag.  SeedSequence hashing is specified by NumPy and
stable across releases, so the scheme is frozen: changing it would change
every number the harness reports.

Keys compose.  ``derive(derive(s, "train", 4), "noise")`` extends the spawn
key of ``s`` with ``(h("train"), 4, h("noise"))``; the resulting stream is
independent of every stream with a different key.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

from forestlab.errors import InputError

SeedLike = Union[int, np.random.SeedSequence]


def tag_hash(tag: str) -> int:
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise InputError(f"seed must be a non-negative integer or SeedSequence, got {seed!r}")
    if seed < 0:
        raise InputError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed))


def derive(seed: SeedLike, tag: str, *indices: int) -> np.random.SeedSequence:
    """Return the sub-stream of `seed` keyed by `tag` and `indices`."""
    base = as_seed_sequence(seed)
    for i in indices:
        if int(i) < 0:
            raise InputError(f"stream indices must be non-negative, got {i}")
    key = tuple(base.spawn_key) + (tag_hash(tag),) + tuple(int(i) for i in indices)
    return np.random.SeedSequence(entropy=base.entropy, spawn_key=key)


def generator(seed: SeedLike, tag: str | None = None, *indices: int) -> np.random.Generator:
    """A PCG64 generator on `seed`, or on its sub-stream when `tag` is given."""
    ss = as_seed_sequence(seed) if tag is None else derive(seed, tag, *indices)
    return np.random.Generator(np.random.PCG64(ss))
