"""Gradient history window and the low-dimensional search basis.

The optimizer records the most recent gradient directions from the local
phase in a fixed-capacity :class:`GradientWindow`. Before each global search
round, :func:`build_basis` factors the stacked gradient matrix (columns =
snapshots, oldest first) and keeps the dominant left singular vectors as an
orthonormal basis. Search then happens in the basis coordinates; ``lift``
maps coordinates back to the full parameter space around the anchor point.

The factorization is always a thin SVD of the tall gradient matrix (cost
O(D * Q^2) for D parameters and Q snapshots); a D x D matrix is never
materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative cutoff for the numerical rank of the gradient matrix: singular
# values below max(sv) * RANK_RTOL are treated as zero.
RANK_RTOL = 1e-10


class DegenerateGradientHistory(RuntimeError):
    """Raised when the gradient history spans no direction at all."""


class GradientWindow:
    """Ring buffer of the most recent gradient snapshots.

    Snapshots are stored oldest first; pushing beyond capacity evicts the
    oldest entry. All snapshots share the window's dimension and must be
    finite. Mutated by a single training thread; ``matrix``/``copy`` give
    immutable snapshots safe to hand to a concurrent basis build.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError(f"window capacity must be >= 1, got {capacity}")
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._snapshots: list[np.ndarray] = []

    @property
    def count(self) -> int:
        return len(self._snapshots)

    def push(self, gradient: np.ndarray) -> None:
        """Append the newest gradient, evicting the oldest when full."""
        g = np.asarray(gradient, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(
                f"gradient has shape {g.shape}, window expects ({self.dim},)"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError("gradient contains non-finite entries")
        self._snapshots.append(g.copy())
        if len(self._snapshots) > self.capacity:
            del self._snapshots[0]

    def snapshots(self) -> list[np.ndarray]:
        """Snapshots oldest first (copies)."""
        return [g.copy() for g in self._snapshots]

    def matrix(self) -> np.ndarray:
        """Gradient matrix of shape (dim, count), columns oldest first."""
        if not self._snapshots:
            raise ValueError("gradient window is empty")
        return np.column_stack(self._snapshots)

    def copy(self) -> "GradientWindow":
        out = GradientWindow(self.capacity, self.dim)
        out._snapshots = [g.copy() for g in self._snapshots]
        return out


@dataclass
class SubspaceBasis:
    """Orthonormal basis and anchor defining the affine search manifold.

    ``directions`` has shape (dim, rank); only the leading ``rank_effective``
    columns span directions, any remaining columns are zero padding. Columns
    are sign-fixed (largest-magnitude entry non-negative, ties to the lowest
    index) so runs are bit-reproducible across linear-algebra backends.
    """

    directions: np.ndarray
    anchor: np.ndarray
    rank_effective: int
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def dim(self) -> int:
        return self.directions.shape[0]

    @property
    def rank(self) -> int:
        return self.directions.shape[1]

    def lift(self, coords: np.ndarray) -> np.ndarray:
        """Map subspace coordinates to full parameters: anchor + directions @ coords.

        Accepts coordinates of length ``rank_effective`` (the active search
        space) or the padded ``rank`` (trailing zero columns contribute
        nothing).
        """
        z = np.asarray(coords, dtype=float)
        if z.ndim != 1 or len(z) not in (self.rank_effective, self.rank):
            raise ValueError(
                f"coords have shape {z.shape}; expected length "
                f"{self.rank_effective} or {self.rank}"
            )
        return self.anchor + self.directions[:, : len(z)] @ z


def build_basis(window: GradientWindow, anchor: np.ndarray, rank: int) -> SubspaceBasis:
    """Construct the search basis from the dominant recent-gradient directions.

    Takes a thin SVD of the stacked gradient matrix and keeps the top
    ``min(rank, numerical rank)`` left singular vectors, ordered by
    descending singular value. The basis matrix is zero-padded to ``rank``
    columns; search should operate in ``rank_effective`` coordinates so no
    budget is spent on null directions.

    Raises:
        ValueError: empty window or rank < 1.
        DegenerateGradientHistory: all recorded gradients are zero.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if window.count < 1:
        raise ValueError("cannot build a basis from an empty gradient window")
    theta = np.asarray(anchor, dtype=float)
    if theta.shape != (window.dim,):
        raise ValueError(
            f"anchor has shape {theta.shape}, window dimension is {window.dim}"
        )
    if not np.all(np.isfinite(theta)):
        raise ValueError("anchor contains non-finite entries")

    grad_matrix = window.matrix()
    if not np.any(grad_matrix):
        raise DegenerateGradientHistory(
            "degenerate gradient history: all snapshots are zero"
        )

    # Thin SVD: u is (dim, count), never a dim x dim factor.
    u, sv, _ = np.linalg.svd(grad_matrix, full_matrices=False)
    numerical_rank = int(np.count_nonzero(sv > sv[0] * RANK_RTOL))
    r_eff = min(rank, numerical_rank)

    directions = np.zeros((window.dim, rank))
    directions[:, :r_eff] = _fix_signs(u[:, :r_eff])
    return SubspaceBasis(
        directions=directions,
        anchor=theta.copy(),
        rank_effective=r_eff,
        singular_values=sv[:r_eff].copy(),
    )


def _fix_signs(columns: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is non-negative."""
    out = columns.copy()
    for j in range(out.shape[1]):
        lead = int(np.argmax(np.abs(out[:, j])))
        if out[lead, j] < 0:
            out[:, j] = -out[:, j]
    return out


def lift(basis: SubspaceBasis, coords: np.ndarray) -> np.ndarray:
    """Functional form of :meth:`SubspaceBasis.lift`."""
    return basis.lift(coords)
