"""Deterministic random streams for reproducible experiments.

All randomness in this package flows through :class:`RngStream`, a thin
wrapper over numpy's counter-based Philox generator. A stream is keyed by
(seed, derivation path); derived child streams are statistically independent
of the parent and of each other, so per-candidate or per-seed work can be
parallelized without the results depending on scheduling order.

Philox is pinned because its bit stream is fixed by the (key, counter)
pair: the same seed and draw sequence reproduce identical output bits.
"""

from __future__ import annotations

import numpy as np


class RngStream:
    """Seeded random stream backed by the Philox counter-based generator.

    Identical seed plus identical draw sequence yields bit-identical
    output. ``derive`` creates an independent child stream keyed by this
    stream's derivation path extended with the given indices; drawing from
    the parent never affects a child.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=_path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def derive(self, *indices: int) -> "RngStream":
        """Independent child stream keyed by this stream's path plus ``indices``."""
        return RngStream(self.seed, self._path + tuple(int(i) for i in indices))

    def normal(self, size) -> np.ndarray:
        """Standard normal draws, filled in C order (coordinate-major per row)."""
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def next_seed(self) -> int:
        """Draw a fresh 63-bit seed, e.g. for keying a single noisy evaluation."""
        return int(self._gen.integers(0, 2**63))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed}, path={self._path})"
