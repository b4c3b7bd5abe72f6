"""Return-prediction surrogates fitted fresh in every search round.

A surrogate is fitted on the round's context set (coordinates paired with
rollout-evaluated returns) and then queried on candidate coordinates. The
contract is deliberately small: ``fit(coords, values)`` once, after which
``predict(queries)`` is a pure function of the fitted state.

Built-in kinds:
  * inverse-distance weighting -- parameter free, exact at context points,
    predictions bounded by the observed return range; the default.
  * ridge -- regularized linear fit, useful when the local landscape is
    close to affine.
  * function -- predicts by calling a supplied callable (used to plug in an
    oracle in tests and ablations).

The remote kind (wire-protocol client) lives in :mod:`subsearch.remote`.

Targets are normalized per fit call for kinds that benefit from it (ridge,
remote) and predictions denormalized before ranking; candidate ranking is
invariant to this affine map. Inverse-distance weighting operates on raw
targets so interpolation at context points stays exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Floor on the normalization scale and on interpolation distances.
SCALE_FLOOR = 1e-12
DISTANCE_FLOOR = 1e-12


class SurrogateError(RuntimeError):
    """Raised when a surrogate cannot be fitted or queried."""


class ContextSet:
    """Ordered (coordinates, return) pairs backing a round's surrogate.

    Entries are append-only and never reordered; downstream improvement
    accounting depends on insertion order. All coordinates share one
    dimension and all returns are finite.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"coordinate dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self._coords: list[np.ndarray] = []
        self._returns: list[float] = []

    def __len__(self) -> int:
        return len(self._coords)

    def append(self, coords: np.ndarray, value: float) -> None:
        z = np.asarray(coords, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"coords have shape {z.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(z)):
            raise ValueError("coords contain non-finite entries")
        y = float(value)
        if not np.isfinite(y):
            raise ValueError(f"return value is not finite: {value!r}")
        self._coords.append(z.copy())
        self._returns.append(y)

    def coords_array(self) -> np.ndarray:
        """All coordinates as an (n, dim) array in insertion order."""
        if not self._coords:
            return np.empty((0, self.dim))
        return np.stack(self._coords)

    def returns_array(self) -> np.ndarray:
        return np.asarray(self._returns, dtype=float)

    def coords(self, index: int) -> np.ndarray:
        return self._coords[index].copy()

    def value(self, index: int) -> float:
        return self._returns[index]

    def best_index(self) -> int:
        """Index of the highest return; ties go to the earliest insertion."""
        if not self._returns:
            raise ValueError("context set is empty")
        return int(np.argmax(self._returns))


@dataclass(frozen=True)
class TargetStats:
    """Affine normalization parameters for return values."""

    mean: float
    scale: float

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.scale + self.mean


def normalize_targets(context: ContextSet) -> tuple[ContextSet, TargetStats]:
    """Return a copy of ``context`` with zero-mean, unit-scale returns.

    Scale is the population standard deviation floored at 1e-12, so constant
    targets map to all zeros rather than dividing by zero.
    """
    if len(context) == 0:
        raise ValueError("cannot normalize an empty context set")
    values = context.returns_array()
    stats = TargetStats(
        mean=float(values.mean()),
        scale=max(float(values.std()), SCALE_FLOOR),
    )
    normalized = ContextSet(context.dim)
    for i in range(len(context)):
        normalized.append(context.coords(i), float(stats.normalize(values[i : i + 1])[0]))
    return normalized, stats


class InverseDistanceSurrogate:
    """Inverse-distance-weighted interpolation with a distance floor.

    Weights are 1 / max(d, floor)^power. A query closer than the floor to a
    context point returns that point's value exactly; elsewhere predictions
    are convex combinations, hence bounded by [min y, max y].
    """

    needs_normalized_targets = False

    def __init__(self, power: float = 2.0, floor: float = DISTANCE_FLOOR):
        self.power = float(power)
        self.floor = float(floor)
        self._x: np.ndarray | None = None
        self._y: np.ndarray | None = None

    def fit(self, coords: np.ndarray, values: np.ndarray) -> None:
        self._x = np.asarray(coords, dtype=float)
        self._y = np.asarray(values, dtype=float)

    def predict(self, queries: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise SurrogateError("predict called before fit")
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        out = np.empty(len(q))
        for i, point in enumerate(q):
            dist = np.linalg.norm(self._x - point[None, :], axis=1)
            nearest = int(np.argmin(dist))
            if dist[nearest] <= self.floor:
                out[i] = self._y[nearest]
                continue
            weights = 1.0 / dist**self.power
            out[i] = float(weights @ self._y / weights.sum())
        return out


class RidgeSurrogate:
    """Linear least squares with l2 regularization on the slope terms."""

    needs_normalized_targets = True

    def __init__(self, regularization: float = 1e-6):
        if regularization < 0:
            raise ValueError("regularization must be >= 0")
        self.regularization = float(regularization)
        self._weights: np.ndarray | None = None
        self._intercept: float = 0.0
        self._x_mean: np.ndarray | None = None

    def fit(self, coords: np.ndarray, values: np.ndarray) -> None:
        x = np.asarray(coords, dtype=float)
        y = np.asarray(values, dtype=float)
        self._x_mean = x.mean(axis=0)
        xc = x - self._x_mean
        gram = xc.T @ xc + self.regularization * np.eye(x.shape[1])
        self._weights = np.linalg.solve(gram, xc.T @ (y - y.mean()))
        self._intercept = float(y.mean())

    def predict(self, queries: np.ndarray) -> np.ndarray:
        if self._weights is None:
            raise SurrogateError("predict called before fit")
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        return (q - self._x_mean) @ self._weights + self._intercept

    @property
    def coefficients(self) -> np.ndarray:
        """Slope of the fitted affine map, in raw coordinate units."""
        if self._weights is None:
            raise SurrogateError("coefficients requested before fit")
        return self._weights.copy()


class FunctionSurrogate:
    """Predicts by evaluating a supplied callable; fit is a no-op.

    Used to plug a perfect oracle (or any fixed scorer) into the search
    loop for ablations and tests.
    """

    needs_normalized_targets = False

    def __init__(self, fn):
        self._fn = fn

    def fit(self, coords: np.ndarray, values: np.ndarray) -> None:
        pass

    def predict(self, queries: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        return np.asarray([float(self._fn(row)) for row in q], dtype=float)


class _DenormalizingModel:
    """Wraps a model fitted on normalized targets; denormalizes predictions."""

    def __init__(self, inner, stats: TargetStats):
        self._inner = inner
        self._stats = stats

    def predict(self, queries: np.ndarray) -> np.ndarray:
        return self._stats.denormalize(self._inner.predict(queries))

    def coefficients_raw(self) -> np.ndarray:
        """Linear coefficients mapped back to raw target units."""
        return self._stats.scale * self._inner.coefficients

    def __getattr__(self, name):
        return getattr(self._inner, name)


def make_surrogate(kind: str, **options):
    """Instantiate a built-in surrogate by name (``idw``, ``ridge``)."""
    if kind == "idw":
        return InverseDistanceSurrogate(**options)
    if kind == "ridge":
        return RidgeSurrogate(**options)
    raise ValueError(f"unknown surrogate kind: {kind!r}")


def fit(context: ContextSet, model):
    """Fit a surrogate on a context set and return the queryable model.

    ``model`` is either a kind name (``idw``, ``ridge``) or an unfitted
    surrogate instance (including a remote client). Duplicate coordinates
    are collapsed to their average return before fitting; a warning is
    emitted when the duplicates disagree. Kinds that request it are trained
    on normalized targets and wrapped so predictions come back in raw units.
    """
    if len(context) == 0:
        raise ValueError("cannot fit a surrogate on an empty context set")
    if isinstance(model, str):
        model = make_surrogate(model)

    coords, values = _collapse_duplicates(
        context.coords_array(), context.returns_array()
    )
    if getattr(model, "needs_normalized_targets", False):
        stats = TargetStats(
            mean=float(values.mean()), scale=max(float(values.std()), SCALE_FLOOR)
        )
        model.fit(coords, stats.normalize(values))
        return _DenormalizingModel(model, stats)
    model.fit(coords, values)
    return model


def predict(model, queries) -> np.ndarray:
    """Query a fitted model, order preserved, one finite value per query.

    Non-finite predictions are replaced by -inf (flagged with a warning) so
    the affected candidates can never win an argmax selection.
    """
    q = np.asarray(queries, dtype=float)
    if q.size == 0:
        return np.empty(0)
    q = np.atleast_2d(q)
    out = np.asarray(model.predict(q), dtype=float).reshape(len(q))
    bad = ~np.isfinite(out)
    if np.any(bad):
        warnings.warn(
            f"surrogate produced {int(bad.sum())} non-finite prediction(s); "
            "replaced with -inf",
            RuntimeWarning,
            stacklevel=2,
        )
        out = out.copy()
        out[bad] = -np.inf
    return out


def _collapse_duplicates(coords: np.ndarray, values: np.ndarray):
    """Average returns over exactly-repeated coordinates, keeping first-seen order."""
    groups: dict[bytes, list[int]] = {}
    for i, row in enumerate(coords):
        groups.setdefault(row.tobytes(), []).append(i)
    if len(groups) == len(coords):
        return coords, values
    keep_rows = []
    keep_vals = []
    conflicting = False
    for indices in groups.values():
        group_vals = values[indices]
        if not np.all(group_vals == group_vals[0]):
            conflicting = True
        keep_rows.append(coords[indices[0]])
        keep_vals.append(float(group_vals.mean()))
    if conflicting:
        warnings.warn(
            "duplicate context coordinates with conflicting returns; averaging",
            RuntimeWarning,
            stacklevel=3,
        )
    return np.stack(keep_rows), np.asarray(keep_vals)
