"""Counter-based random streams for reproducible parallel rendering.

Every stream is a Philox generator keyed by a digest of (seed, purpose tags,
row). A sample's value depends only on its own coordinates, never on how
work was split across workers, which is what makes renders byte-identical
for any thread count.
"""

import hashlib

import numpy as np


def stream_key(*tags) -> np.ndarray:
    """Two uint64 key words from a stable digest of the tags."""
    digest = hashlib.blake2b("\x1f".join(map(repr, tags)).encode(), digest_size=16).digest()
    return np.frombuffer(digest, dtype=np.uint64)


def uniforms(shape, *tags) -> np.ndarray:
    """Uniform [0, 1) float64 array whose values are a pure function of (shape, tags)."""
    gen = np.random.Generator(np.random.Philox(key=stream_key(*tags)))
    return gen.random(shape)


def signed_uniforms(shape, *tags) -> np.ndarray:
    """Uniform [-1, 1) variant used by the surface and lobe samplers."""
    return uniforms(shape, *tags) * 2.0 - 1.0


def row_tags(seed, light_id, purpose, row):
    return ("lumiedit", int(seed), str(light_id), str(purpose), int(row))
