"""Deterministic RNG substreams derived from a single run seed."""

import hashlib

import numpy as np


def _digest(*parts):
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def substream(seed, name):
    """Independent generator for a named substream of the run seed."""
    return np.random.default_rng(np.random.SeedSequence(_digest(seed, name)))


def token_seed(token, salt="embedding"):
    """Stable per-token seed, independent of Python hash randomization."""
    return _digest(salt, token)
