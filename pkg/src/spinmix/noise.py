"""Reproducible per-trajectory Wiener increments.

Each trajectory owns a counter-based Philox stream keyed by
(master seed, trajectory index), so trajectory i draws the same increments
no matter how the ensemble is chunked, scheduled, or parallelized. Splitting
one request into several smaller ones yields the same sequence.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseStream"]

# key-space offset separating auxiliary draws (e.g. projective sampling of a
# final state) from the Wiener increments of the same trajectory
SAMPLING_SALT = np.uint64(0x9E3779B97F4A7C15)


class NoiseStream:
    """Gaussian increment stream for one trajectory.

    `increments(n, dt)` consumes and returns the next n Wiener increments,
    each distributed Normal(0, dt). Two streams built with identical
    (seed, trajectory_index) produce identical sequences.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int, trajectory_index: int = 0):
        self.seed = int(seed) & self._MASK
        self.trajectory_index = int(trajectory_index) & self._MASK
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.trajectory_index], dtype=np.uint64))
        )

    def increments(self, n: int, dt: float) -> np.ndarray:
        return self._gen.standard_normal(n) * np.sqrt(dt)

    def standard_normals(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    @staticmethod
    def sampling_generator(seed: int, trajectory_index: int = 0) -> np.random.Generator:
        """Independent generator for auxiliary randomness tied to the same
        trajectory identity (offset key, never collides with the increments)."""
        mask = NoiseStream._MASK
        key = np.array(
            [np.uint64(int(seed) & mask) ^ SAMPLING_SALT, np.uint64(int(trajectory_index) & mask)],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"NoiseStream(seed={self.seed}, trajectory_index={self.trajectory_index})"
