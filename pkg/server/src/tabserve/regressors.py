"""Regression backends selectable via the server's --mode flag.

Every backend exposes fit(xs, ys) and predict(xs) on plain float matrices.

* ``tfm`` -- a pretrained tabular foundation model (requires the optional
  tabpfn dependency and its model weights).
* ``ridge-fallback`` -- closed-form regularized least squares; deterministic
  and dependency-light, used for protocol conformance testing.
* ``echo`` -- predicts all zeros; exercises protocol shape only.
"""

from __future__ import annotations

import numpy as np

SCALE_FLOOR = 1e-12


class EchoRegressor:
    """Protocol-shape testing: remembers nothing, predicts zeros."""

    def fit(self, xs: np.ndarray, ys: np.ndarray) -> None:
        pass

    def predict(self, xs: np.ndarray) -> np.ndarray:
        return np.zeros(len(xs))


class RidgeRegressor:
    """Regularized linear least squares with target normalization.

    Targets are shifted by their mean and scaled by their population
    standard deviation (floored at 1e-12) before solving; inputs are
    centered. Predictions are mapped back to raw units.
    """

    def __init__(self, regularization: float = 1e-6):
        self.regularization = float(regularization)
        self._weights = None
        self._x_mean = None
        self._y_mean = 0.0
        self._y_scale = 1.0

    def fit(self, xs: np.ndarray, ys: np.ndarray) -> None:
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        self._y_mean = float(y.mean())
        self._y_scale = max(float(y.std()), SCALE_FLOOR)
        y_norm = (y - self._y_mean) / self._y_scale
        self._x_mean = x.mean(axis=0)
        centered = x - self._x_mean
        gram = centered.T @ centered + self.regularization * np.eye(x.shape[1])
        self._weights = np.linalg.solve(gram, centered.T @ (y_norm - y_norm.mean()))

    def predict(self, xs: np.ndarray) -> np.ndarray:
        if self._weights is None:
            raise RuntimeError("predict before fit")
        q = np.asarray(xs, dtype=float)
        norm = (q - self._x_mean) @ self._weights
        return norm * self._y_scale + self._y_mean


class TfmRegressor:
    """Pretrained tabular foundation model backend.

    Context sizes on this protocol are tiny (tens of rows, <= 15 columns),
    squarely inside the model's small-sample regime. Inference settings are
    the library defaults.
    """

    def __init__(self):
        try:
            from tabpfn import TabPFNRegressor
        except ImportError as exc:  # pragma: no cover - depends on extras
            raise RuntimeError(
                "tfm mode requires the optional 'tabpfn' dependency "
                "(pip install tabserve[tfm])"
            ) from exc
        self._factory = TabPFNRegressor
        self._model = None

    def fit(self, xs: np.ndarray, ys: np.ndarray) -> None:  # pragma: no cover
        self._model = self._factory()
        self._model.fit(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))

    def predict(self, xs: np.ndarray) -> np.ndarray:  # pragma: no cover
        if self._model is None:
            raise RuntimeError("predict before fit")
        return np.asarray(self._model.predict(np.asarray(xs, dtype=float)), dtype=float)


MODES = ("tfm", "ridge-fallback", "echo")


def make_regressor(mode: str):
    if mode == "echo":
        return EchoRegressor()
    if mode == "ridge-fallback":
        return RidgeRegressor()
    if mode == "tfm":
        return TfmRegressor()
    raise ValueError(f"unknown mode: {mode!r} (choose from {MODES})")
