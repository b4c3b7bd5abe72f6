"""Candidate generation: isotropic Gaussian perturbations inside an l2 ball.

Candidates are drawn as center + noise * eps with eps standard normal per
coordinate, then projected onto the ball of the given radius around the
center. Projection (rather than rejection) means that when the noise scale
is large relative to the radius, mass concentrates on the ball boundary;
that is the intended behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngStream


@dataclass
class TrustRegion:
    """l2 ball around ``center`` with Gaussian sampling noise ``noise`` (std)."""

    center: np.ndarray
    radius: float
    noise: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.center.ndim != 1 or not np.all(np.isfinite(self.center)):
            raise ValueError("trust-region center must be a finite vector")
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")


def project_ball(point: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Project ``point`` onto the closed l2 ball of ``radius`` around ``center``.

    Returns the point unchanged when it is already inside the ball. Total
    on finite inputs; ``point == center`` is a fixed point.
    """
    p = np.asarray(point, dtype=float)
    c = np.asarray(center, dtype=float)
    if p.shape != c.shape:
        raise ValueError(f"shape mismatch: point {p.shape} vs center {c.shape}")
    offset = p - c
    norm = float(np.linalg.norm(offset))
    if norm <= radius:
        return p.copy()
    return c + offset * (radius / norm)


def gaussian_sample(region: TrustRegion, count: int, rng: RngStream) -> np.ndarray:
    """Draw ``count`` candidates around the region center.

    Each row is center + noise * eps projected onto the trust-region ball.
    Normal variates are drawn coordinate-major per sample from the given
    stream, so output is backend-independent for a fixed stream. The stream
    advances by exactly count * dim draws.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    dim = len(region.center)
    eps = rng.normal((count, dim))
    samples = region.center[None, :] + region.noise * eps
    offsets = samples - region.center[None, :]
    norms = np.linalg.norm(offsets, axis=1)
    over = norms > region.radius
    if np.any(over):
        samples[over] = region.center[None, :] + offsets[over] * (
            region.radius / norms[over]
        )[:, None]
    return samples
