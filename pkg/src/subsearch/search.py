"""Search rounds and the interleaved training driver.

A *round* starts from the current parameters (the anchor), builds a basis
from recent gradients, evaluates a small initial context inside the
subspace, and then alternates fit / sample / screen / evaluate-one inner
iterations. The best evaluated candidate of the whole round becomes the new
parameter vector. ``interleave`` embeds rounds into a plain gradient-ascent
loop, firing one round whenever the local evaluation counter passes the
warm-up threshold and every period thereafter.

Budget accounting is exact: a full round consumes context_size +
inner_iterations true evaluations, a one-shot round context_size + 1, and
the random-search baseline the same total as the full round.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import surrogate as sg
from .objectives import Objective
from .rng import RngStream
from .sampler import TrustRegion, gaussian_sample
from .subspace import (
    DegenerateGradientHistory,
    GradientWindow,
    SubspaceBasis,
    build_basis,
)


class EvaluationError(RuntimeError):
    """Objective failure, annotated with the candidate that triggered it."""


@dataclass
class SearchConfig:
    """Knobs for one search round and the interleave schedule.

    ``warmup_evals`` and ``period_evals`` are counted on the local-phase
    evaluation axis (one evaluation per gradient step); round rollouts are
    tracked separately. Defaults follow the reference setting: rank-15
    subspace, 16 + 16 rollouts per round, trust region radius 0.01 with
    sampling noise 0.005, rounds every 10k evaluations after a 150k warm-up.
    """

    rank: int = 15
    inner_iterations: int = 16
    context_size: int = 16
    pool_size: int = 256
    radius: float = 0.01
    noise: float = 0.005
    warmup_evals: int = 150_000
    period_evals: int = 10_000
    window_size: int = 32

    def __post_init__(self):
        for name in ("rank", "context_size", "pool_size", "period_evals", "window_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.inner_iterations < 0:  # 0 = degenerate round: initial context only
            raise ValueError(f"inner_iterations must be >= 0, got {self.inner_iterations}")
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.warmup_evals < 0:
            raise ValueError(f"warmup_evals must be >= 0, got {self.warmup_evals}")

    @property
    def round_budget(self) -> int:
        return self.context_size + self.inner_iterations


@dataclass
class IterationRecord:
    """One inner iteration: the selected candidate and how it panned out."""

    coords: np.ndarray
    predicted: float
    actual: float
    improvement: float = float("nan")  # actual minus the round's initial best
    surrogate_fallback: bool = False


@dataclass
class RoundTrace:
    """Accounting for one search round."""

    kind: str  # "full" | "one_shot" | "random" | "skipped"
    rollout_count: int
    initial_best: float | None = None  # best return in the initial context
    initial_returns: list[float] = field(default_factory=list)
    iterations: list[IterationRecord] = field(default_factory=list)
    best_coords: np.ndarray | None = None
    best_return: float | None = None
    returned_params: np.ndarray | None = None
    rank_effective: int = 0
    skipped: bool = False


class SurrogateProvider:
    """Creates and fits the per-round surrogate.

    Kinds: ``idw`` (default), ``ridge``, ``oracle`` (predicts the true
    noiseless return of the lifted candidate -- an idealized screen for
    ablations), and ``remote`` (a wire-protocol client instance passed in
    by the caller and refitted every iteration).
    """

    def __init__(self, kind: str = "idw", remote_client=None):
        if kind not in ("idw", "ridge", "oracle", "remote"):
            raise ValueError(f"unknown surrogate kind: {kind!r}")
        if kind == "remote" and remote_client is None:
            raise ValueError("remote surrogate requires a client instance")
        self.kind = kind
        self._remote = remote_client

    def fit(self, context: sg.ContextSet, basis: SubspaceBasis, objective: Objective):
        if self.kind == "oracle":
            return sg.FunctionSurrogate(
                lambda coords: objective.true_value(basis.lift(coords))
            )
        if self.kind == "remote":
            return sg.fit(context, self._remote)
        return sg.fit(context, self.kind)


def _evaluate_candidate(
    objective: Objective,
    basis: SubspaceBasis,
    coords: np.ndarray,
    rng: RngStream,
    label: str,
) -> float:
    seed = rng.next_seed()
    try:
        return objective.evaluate(basis.lift(coords), seed)
    except Exception as exc:  # annotate with candidate identity
        raise EvaluationError(f"objective evaluation failed for {label}, coords={coords!r}") from exc


def init_context(
    basis: SubspaceBasis,
    objective: Objective,
    cfg: SearchConfig,
    rng: RngStream,
) -> sg.ContextSet:
    """Evaluate the initial context: the center point plus sampled neighbors.

    The anchor (coords = 0) is always the first entry, followed by
    context_size - 1 trust-region samples around it, each evaluated with one
    true objective call. Exactly ``context_size`` evaluations are consumed.
    """
    dim = basis.rank_effective
    context = sg.ContextSet(dim)
    center = np.zeros(dim)
    context.append(center, _evaluate_candidate(objective, basis, center, rng, "context center"))
    if cfg.context_size > 1:
        region = TrustRegion(center=center, radius=cfg.radius, noise=cfg.noise)
        samples = gaussian_sample(region, cfg.context_size - 1, rng)
        for i, coords in enumerate(samples):
            value = _evaluate_candidate(objective, basis, coords, rng, f"context candidate {i}")
            context.append(coords, value)
    return context


def inner_iteration(
    context: sg.ContextSet,
    basis: SubspaceBasis,
    objective: Objective,
    cfg: SearchConfig,
    rng: RngStream,
    provider: SurrogateProvider,
    inspector=None,
) -> IterationRecord:
    """One fit / sample / screen / evaluate-one cycle; extends the context.

    The candidate pool is centered at the incumbent (highest-return context
    entry, earliest on ties); the prediction argmax (lowest index on ties)
    is the only candidate evaluated for real. A surrogate failure falls
    back to inverse-distance weighting for this iteration and is flagged.
    """
    if len(context) == 0:
        raise ValueError("inner iteration requires a non-empty context")
    fallback = False
    try:
        model = provider.fit(context, basis, objective)
    except Exception:
        model = sg.fit(context, "idw")
        fallback = True

    incumbent = context.best_index()
    region = TrustRegion(center=context.coords(incumbent), radius=cfg.radius, noise=cfg.noise)
    pool = gaussian_sample(region, cfg.pool_size, rng)
    predictions = sg.predict(model, pool)
    if inspector is not None:
        inspector.observe(pool, predictions, basis, objective)

    pick = int(np.argmax(predictions))
    chosen = pool[pick]
    actual = _evaluate_candidate(objective, basis, chosen, rng, f"pool candidate {pick}")
    context.append(chosen, actual)
    return IterationRecord(
        coords=chosen.copy(),
        predicted=float(predictions[pick]),
        actual=actual,
        surrogate_fallback=fallback,
    )


def run_round(
    anchor: np.ndarray,
    window: GradientWindow,
    objective: Objective,
    cfg: SearchConfig,
    rng: RngStream,
    provider: SurrogateProvider,
    inspector=None,
    kind: str = "full",
) -> tuple[np.ndarray, RoundTrace]:
    """One full search round; returns the new parameters and the trace.

    Consumes exactly context_size + inner_iterations true evaluations. The
    returned parameters are the lift of the best evaluated candidate over
    the entire final context, so their stored return is never below the
    anchor's own evaluation (the center point is always in the context).
    A degenerate gradient history skips the round and leaves the anchor
    untouched.
    """
    if window.count < 1:
        raise ValueError("run_round requires at least one recorded gradient")
    try:
        basis = build_basis(window, anchor, cfg.rank)
    except DegenerateGradientHistory:
        trace = RoundTrace(kind="skipped", rollout_count=0, skipped=True)
        return np.asarray(anchor, dtype=float).copy(), trace

    context = init_context(basis, objective, cfg, rng)
    initial_returns = [context.value(i) for i in range(len(context))]
    initial_best = max(initial_returns)

    iterations: list[IterationRecord] = []
    for _ in range(cfg.inner_iterations):
        record = inner_iteration(context, basis, objective, cfg, rng, provider, inspector)
        record.improvement = record.actual - initial_best
        iterations.append(record)

    best = context.best_index()
    params = basis.lift(context.coords(best))
    trace = RoundTrace(
        kind=kind,
        rollout_count=len(context),
        initial_best=initial_best,
        initial_returns=initial_returns,
        iterations=iterations,
        best_coords=context.coords(best),
        best_return=context.value(best),
        returned_params=params.copy(),
        rank_effective=basis.rank_effective,
    )
    return params, trace


def one_shot_round(
    anchor: np.ndarray,
    window: GradientWindow,
    objective: Objective,
    cfg: SearchConfig,
    rng: RngStream,
    provider: SurrogateProvider,
    inspector=None,
) -> tuple[np.ndarray, RoundTrace]:
    """Ablation: a round with a single guided evaluation after the context."""
    params, trace = run_round(
        anchor, window, objective, replace(cfg, inner_iterations=1), rng, provider,
        inspector, kind="one_shot",
    )
    return params, trace


def random_round(
    anchor: np.ndarray,
    window: GradientWindow,
    objective: Objective,
    cfg: SearchConfig,
    rng: RngStream,
) -> tuple[np.ndarray, RoundTrace]:
    """Baseline: same subspace and budget, no screening.

    Draws context_size + inner_iterations candidates around the subspace
    origin, evaluates every one for real, and keeps the best.
    """
    if window.count < 1:
        raise ValueError("random_round requires at least one recorded gradient")
    try:
        basis = build_basis(window, anchor, cfg.rank)
    except DegenerateGradientHistory:
        trace = RoundTrace(kind="skipped", rollout_count=0, skipped=True)
        return np.asarray(anchor, dtype=float).copy(), trace

    count = cfg.round_budget
    region = TrustRegion(center=np.zeros(basis.rank_effective), radius=cfg.radius, noise=cfg.noise)
    pool = gaussian_sample(region, count, rng)
    values = [
        _evaluate_candidate(objective, basis, coords, rng, f"random candidate {i}")
        for i, coords in enumerate(pool)
    ]
    best = int(np.argmax(values))
    params = basis.lift(pool[best])
    trace = RoundTrace(
        kind="random",
        rollout_count=count,
        initial_returns=list(values),
        best_coords=pool[best].copy(),
        best_return=values[best],
        returned_params=params.copy(),
        rank_effective=basis.rank_effective,
    )
    return params, trace


# ---------------------------------------------------------------------------
# Interleaved training driver
# ---------------------------------------------------------------------------

class GradientAscent:
    """Plain gradient ascent; reports the raw gradient before step scaling."""

    def __init__(self, step_size: float):
        if not step_size > 0:
            raise ValueError(f"step_size must be > 0, got {step_size}")
        self.step_size = float(step_size)

    def step(self, objective: Objective, params: np.ndarray):
        gradient = objective.gradient(params)
        return params + self.step_size * gradient, gradient


@dataclass
class EvalEvent:
    """One true objective evaluation on the unified evaluation axis."""

    index: int          # unified counter over local and round evaluations
    phase: str          # "local" | "round_init" | "round_inner"
    value: float        # the return observed by this evaluation
    incumbent_value: float # stored return of the current parameters


@dataclass
class TrainingTrace:
    """Everything an interleaved run produced."""

    events: list[EvalEvent] = field(default_factory=list)
    rounds: list[tuple[int, RoundTrace]] = field(default_factory=list)  # (local step, trace)
    final_params: np.ndarray | None = None
    final_value: float = float("nan")
    local_evals: int = 0
    round_evals: int = 0

    @property
    def total_evals(self) -> int:
        return self.local_evals + self.round_evals

    def incumbent_curve(self) -> list[tuple[int, float]]:
        """(unified eval index, current-incumbent value) pairs, one per event."""
        return [(e.index, e.incumbent_value) for e in self.events]


METHODS = ("full", "one_shot", "random_search", "local_only")


def interleave(
    initial_params: np.ndarray,
    objective: Objective,
    cfg: SearchConfig,
    local_optimizer: GradientAscent,
    rng: RngStream,
    budget: int,
    method: str = "full",
    provider: SurrogateProvider | None = None,
    inspector=None,
) -> TrainingTrace:
    """Run ``budget`` local gradient steps with periodic search rounds.

    Every local step costs one true evaluation and pushes its raw gradient
    into the window. A round fires when the local counter m satisfies
    m >= warmup_evals and (m - warmup_evals) % period_evals == 0 (at most
    once per m), replacing the current parameters with the round's result;
    round rollouts are extra evaluations tracked on the unified axis. A
    failed or skipped round leaves the parameters untouched and never
    aborts the local loop.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if provider is None:
        provider = SurrogateProvider("idw")

    params = np.asarray(initial_params, dtype=float).copy()
    window = GradientWindow(cfg.window_size, objective.dim)
    trace = TrainingTrace()
    unified = 0
    local_steps = 0
    # Set by the first local step, which always precedes the first round
    # (a round needs at least one recorded gradient).
    incumbent_value = float("nan")
    last_round_at = -1

    while local_steps < budget:
        round_due = (
            method != "local_only"
            and local_steps >= cfg.warmup_evals
            and (local_steps - cfg.warmup_evals) % cfg.period_evals == 0
            and last_round_at != local_steps
            and window.count >= 1
        )
        if round_due:
            last_round_at = local_steps
            if method == "random_search":
                new_params, round_trace = random_round(params, window, objective, cfg, rng)
            elif method == "one_shot":
                new_params, round_trace = one_shot_round(
                    params, window, objective, cfg, rng, provider, inspector
                )
            else:
                new_params, round_trace = run_round(
                    params, window, objective, cfg, rng, provider, inspector
                )
            trace.rounds.append((local_steps, round_trace))
            if not round_trace.skipped:
                params = new_params
                unified = _log_round_events(trace, round_trace, unified, incumbent_value)
                incumbent_value = round_trace.best_return
                trace.round_evals += round_trace.rollout_count
            continue

        params, gradient = local_optimizer.step(objective, params)
        window.push(gradient)
        value = objective.evaluate(params, rng.next_seed())
        unified += 1
        local_steps += 1
        incumbent_value = value
        trace.events.append(
            EvalEvent(index=unified, phase="local", value=value, incumbent_value=value)
        )

    trace.final_params = params
    trace.final_value = incumbent_value
    trace.local_evals = local_steps
    return trace


def _log_round_events(
    trace: TrainingTrace, round_trace: RoundTrace, unified: int, pre_round_value: float
) -> int:
    """Append one event per round rollout; the last one reports the round outcome."""
    values = list(round_trace.initial_returns)
    phases = ["round_init"] * len(values)
    values += [it.actual for it in round_trace.iterations]
    phases += ["round_inner"] * len(round_trace.iterations)
    for k, (value, phase) in enumerate(zip(values, phases)):
        unified += 1
        is_last = k == len(values) - 1
        trace.events.append(
            EvalEvent(
                index=unified,
                phase=phase,
                value=value,
                incumbent_value=round_trace.best_return if is_last else pre_round_value,
            )
        )
    return unified
