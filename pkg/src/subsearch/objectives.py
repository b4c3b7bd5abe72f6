"""Desk-scale objectives with true evaluations and gradient oracles.

Every objective exposes:
  * ``evaluate(params, eval_seed)`` -- one "rollout": the true value plus
    optional additive Gaussian observation noise keyed by the evaluation
    seed. Deterministic given (params, seed).
  * ``true_value(params)`` -- the noiseless value (used by oracles and for
    reporting; never budget-accounted by callers that know the difference).
  * ``gradient(params)`` -- exact analytic gradient where supported.

Higher is better throughout.
"""

from __future__ import annotations

import numpy as np

from .rng import RngStream


class Objective:
    """Base class: immutable after construction, evaluate is reentrant."""

    dim: int
    noise_std: float = 0.0
    step_cost: float = 1.0  # evaluations-to-steps scale for trace axes

    def true_value(self, params: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} does not provide gradients")

    @property
    def has_gradient(self) -> bool:
        return type(self).gradient is not Objective.gradient

    def evaluate(self, params: np.ndarray, eval_seed: int | None = None) -> float:
        """One rollout: true value plus seeded observation noise (if any)."""
        theta = self._check_params(params)
        value = float(self.true_value(theta))
        if self.noise_std > 0:
            noise_rng = RngStream(0 if eval_seed is None else int(eval_seed), (0x0B5,))
            value += self.noise_std * float(noise_rng.normal(1)[0])
        return value

    def _check_params(self, params: np.ndarray) -> np.ndarray:
        theta = np.asarray(params, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"params have shape {theta.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(theta)):
            raise ValueError("params contain non-finite entries")
        return theta


class PlantedQuadratic(Objective):
    """Concave quadratic whose curvature lives in a hidden low-dimensional basis.

    value(theta) = sum_i spectrum[i] * ((theta - optimum) . basis[:, i])^2

    All spectrum entries are negative, so the maximum is 0 at ``optimum``
    and the function is flat in the (dim - effective_dim) directions
    orthogonal to the planted basis. Gradients therefore lie in the span of
    the basis.
    """

    def __init__(
        self,
        basis: np.ndarray,
        spectrum: np.ndarray,
        optimum: np.ndarray,
        noise_std: float = 0.0,
    ):
        basis = np.asarray(basis, dtype=float)
        spectrum = np.asarray(spectrum, dtype=float)
        optimum = np.asarray(optimum, dtype=float)
        if basis.ndim != 2 or basis.shape[1] != len(spectrum):
            raise ValueError("basis must be (dim, effective_dim) matching spectrum")
        if np.any(spectrum >= 0):
            raise ValueError("curvature spectrum must be strictly negative")
        if optimum.shape != (basis.shape[0],):
            raise ValueError("optimum dimension does not match basis")
        self.dim = basis.shape[0]
        self.effective_dim = basis.shape[1]
        self.basis = basis
        self.spectrum = spectrum
        self.optimum = optimum
        self.noise_std = float(noise_std)

    def true_value(self, params: np.ndarray) -> float:
        proj = self.basis.T @ (np.asarray(params, dtype=float) - self.optimum)
        return float(self.spectrum @ proj**2)

    def gradient(self, params: np.ndarray) -> np.ndarray:
        theta = self._check_params(params)
        proj = self.basis.T @ (theta - self.optimum)
        return self.basis @ (2.0 * self.spectrum * proj)


def make_planted_quadratic(
    dim: int,
    effective_dim: int,
    spectrum=None,
    seed: int = 0,
    noise_std: float = 0.0,
) -> PlantedQuadratic:
    """Seeded construction of a planted quadratic.

    The hidden basis is the Q factor of a seeded Gaussian matrix (columns
    sign-fixed for determinism); the optimum is a seeded Gaussian vector
    normalized to unit length. Default spectrum is -1 in every effective
    direction.
    """
    if effective_dim > dim:
        raise ValueError(f"effective_dim {effective_dim} exceeds dim {dim}")
    if effective_dim < 1:
        raise ValueError("effective_dim must be >= 1")
    if spectrum is None:
        spectrum = -np.ones(effective_dim)
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (effective_dim,):
        raise ValueError("spectrum length must equal effective_dim")

    rng = RngStream(seed, (0x9D,))
    raw = rng.normal((dim, effective_dim))
    q, _ = np.linalg.qr(raw)
    for j in range(effective_dim):
        lead = int(np.argmax(np.abs(q[:, j])))
        if q[lead, j] < 0:
            q[:, j] = -q[:, j]
    optimum = rng.normal(dim)
    optimum /= np.linalg.norm(optimum)
    return PlantedQuadratic(q, spectrum, optimum, noise_std=noise_std)


class LinearQuadraticRollout(Objective):
    """Finite-horizon linear-dynamics rollout scored by negative quadratic cost.

    Parameters are a flattened (action_dim x state_dim) linear feedback
    gain. The rollout simulates x_{t+1} = A x_t + B u_t with u_t = K x_t
    from a seeded initial state and returns
    -sum_t (x_t' S x_t + u_t' R u_t), so higher is better and the zero gain
    on a stable system scores close to the achievable optimum's scale.

    The dynamics matrix is rescaled to spectral radius 0.95 so open-loop
    trajectories stay bounded over the horizon.
    """

    def __init__(
        self,
        state_dim: int = 4,
        action_dim: int = 2,
        horizon: int = 50,
        seed: int = 0,
        noise_std: float = 0.0,
        initial_state: np.ndarray | None = None,
    ):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.horizon = int(horizon)
        self.dim = self.state_dim * self.action_dim
        self.noise_std = float(noise_std)

        rng = RngStream(seed, (0x1A2,))
        dynamics = rng.normal((state_dim, state_dim))
        radius = max(np.abs(np.linalg.eigvals(dynamics)))
        self.dynamics = dynamics * (0.95 / radius)
        self.controls = rng.normal((state_dim, action_dim)) / np.sqrt(state_dim)
        self.state_cost = np.eye(state_dim)
        self.action_cost = 0.1 * np.eye(action_dim)
        if initial_state is None:
            self.initial_state = rng.normal(state_dim)
        else:
            self.initial_state = np.asarray(initial_state, dtype=float)
            if self.initial_state.shape != (state_dim,):
                raise ValueError("initial_state must have shape (state_dim,)")

    def _rollout(self, gain: np.ndarray):
        """Simulate the trajectory; returns (states, actions, cost)."""
        states = [self.initial_state]
        actions = []
        cost = 0.0
        x = self.initial_state
        for _ in range(self.horizon):
            u = gain @ x
            cost += float(x @ self.state_cost @ x + u @ self.action_cost @ u)
            actions.append(u)
            x = self.dynamics @ x + self.controls @ u
            states.append(x)
        return states, actions, cost

    def true_value(self, params: np.ndarray) -> float:
        gain = np.asarray(params, dtype=float).reshape(self.action_dim, self.state_dim)
        _, _, cost = self._rollout(gain)
        return -cost

    def gradient(self, params: np.ndarray) -> np.ndarray:
        """Exact gradient by adjoint recursion through the rollout."""
        theta = self._check_params(params)
        gain = theta.reshape(self.action_dim, self.state_dim)
        states, actions, _ = self._rollout(gain)

        grad = np.zeros_like(gain)
        adjoint = np.zeros(self.state_dim)  # d cost / d x_{t+1}, accumulated backward
        for t in range(self.horizon - 1, -1, -1):
            x, u = states[t], actions[t]
            du = 2.0 * self.action_cost @ u + self.controls.T @ adjoint
            grad += np.outer(du, x)
            adjoint = 2.0 * self.state_cost @ x + gain.T @ du + self.dynamics.T @ adjoint
        return -grad.reshape(-1)  # value is negative cost


class CountingObjective(Objective):
    """Delegating wrapper that counts true evaluations (budget accounting)."""

    def __init__(self, inner: Objective):
        self.inner = inner
        self.dim = inner.dim
        self.noise_std = inner.noise_std
        self.step_cost = inner.step_cost
        self.eval_count = 0

    def true_value(self, params: np.ndarray) -> float:
        return self.inner.true_value(params)

    def gradient(self, params: np.ndarray) -> np.ndarray:
        return self.inner.gradient(params)

    @property
    def has_gradient(self) -> bool:
        return self.inner.has_gradient

    def evaluate(self, params: np.ndarray, eval_seed: int | None = None) -> float:
        self.eval_count += 1
        return self.inner.evaluate(params, eval_seed)
