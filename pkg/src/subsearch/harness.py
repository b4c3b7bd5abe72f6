"""Experiment harness: configs, run records, persistence, and summaries.

Configs are flat ``key = value`` text files (``#`` starts a comment, lists
are comma-separated). Each run writes a JSON-lines event stream plus a CSV
curve; both schemas are documented in the README. Identical config + seed
reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import metrics
from .objectives import LinearQuadraticRollout, Objective, make_planted_quadratic
from .remote import ProtocolClient, RemoteSurrogate, open_transport
from .rng import RngStream
from .search import (
    METHODS,
    GradientAscent,
    SearchConfig,
    SurrogateProvider,
    TrainingTrace,
    interleave,
)

SURROGATE_KINDS = ("idw", "ridge", "remote", "oracle")


class ConfigError(ValueError):
    """Bad experiment configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    objective: str = "planted_quadratic"
    dim: int = 1000
    effective_dim: int = 10
    curvature: float = -1.0
    noise_std: float = 0.0
    objective_seed: int = 7
    state_dim: int = 4        # lqr only
    action_dim: int = 2       # lqr only
    horizon: int = 50         # lqr only
    method: str = "full"
    surrogate: str = "idw"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    budget: int = 200
    step_size: float = 0.02
    out: str = "runs"
    remote: str = ""          # transport spec for surrogate=remote
    rankcheck_pool: int = 64
    search: SearchConfig = field(default_factory=SearchConfig)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.surrogate not in SURROGATE_KINDS:
            raise ConfigError(
                f"surrogate must be one of {SURROGATE_KINDS}, got {self.surrogate!r}"
            )
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.method != "local_only" and self.budget < self.search.warmup_evals:
            raise ConfigError(
                f"budget {self.budget} is below warmup_evals "
                f"{self.search.warmup_evals}; no round would ever fire"
            )
        if self.surrogate == "remote" and not self.remote:
            raise ConfigError("surrogate=remote requires a remote transport spec")


_SEARCH_KEYS = {f.name for f in fields(SearchConfig)}
_TOP_KEYS = {f.name for f in fields(ExperimentConfig)} - {"search", "seeds"}


def parse_flat_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` comments and blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(raw: dict[str, str], **overrides) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from flat string keys."""
    cfg = ExperimentConfig()
    search_kwargs = {}
    for key, value in raw.items():
        if key in _SEARCH_KEYS:
            search_kwargs[key] = _coerce(SearchConfig, key, value)
        elif key == "seeds":
            cfg.seeds = tuple(int(v) for v in str(value).split(",") if str(v).strip())
        elif key in _TOP_KEYS:
            setattr(cfg, key, _coerce(ExperimentConfig, key, value))
        else:
            raise ConfigError(f"unknown config key: {key!r}")
    if search_kwargs:
        cfg.search = replace(cfg.search, **search_kwargs)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seeds":
            cfg.seeds = tuple(value)
        else:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    return config_from_mapping(parse_flat_config(Path(path).read_text()), **overrides)


def _coerce(cls, name: str, value):
    for f in fields(cls):
        if f.name == name:
            if f.type in ("int", int):
                return int(value)
            if f.type in ("float", float):
                return float(value)
            return str(value)
    raise ConfigError(f"unknown field {name!r}")


def build_objective(cfg: ExperimentConfig) -> Objective:
    if cfg.objective == "planted_quadratic":
        spectrum = np.full(cfg.effective_dim, cfg.curvature)
        return make_planted_quadratic(
            cfg.dim, cfg.effective_dim, spectrum,
            seed=cfg.objective_seed, noise_std=cfg.noise_std,
        )
    if cfg.objective == "lqr":
        return LinearQuadraticRollout(
            state_dim=cfg.state_dim, action_dim=cfg.action_dim, horizon=cfg.horizon,
            seed=cfg.objective_seed, noise_std=cfg.noise_std,
        )
    raise ConfigError(f"unknown objective: {cfg.objective!r}")


def build_provider(cfg: ExperimentConfig) -> SurrogateProvider:
    if cfg.surrogate == "remote":
        client = ProtocolClient(open_transport(cfg.remote))
        client.ping()
        return SurrogateProvider("remote", remote_client=RemoteSurrogate(client))
    return SurrogateProvider(cfg.surrogate)


# ---------------------------------------------------------------------------
# Run records and persistence
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Everything persisted about one seed's run."""

    method: str
    surrogate: str
    seed: int
    budget: int
    step_cost: float = 1.0  # evaluations-to-steps scale declared by the objective
    events: list[dict] = field(default_factory=list)
    rounds: list[dict] = field(default_factory=list)
    final_value: float = float("nan")
    local_evals: int = 0
    round_evals: int = 0

    @property
    def total_evals(self) -> int:
        return self.local_evals + self.round_evals

    @property
    def total_steps(self) -> float:
        """The same budget on the objective's declared step axis."""
        return self.total_evals * self.step_cost

    def curve(self) -> list[tuple[int, float]]:
        return [(e["index"], e["incumbent_value"]) for e in self.events]


def record_from_trace(cfg: ExperimentConfig, seed: int, trace: TrainingTrace,
                      step_cost: float = 1.0) -> RunRecord:
    events = [
        {"index": e.index, "phase": e.phase, "value": e.value, "incumbent_value": e.incumbent_value}
        for e in trace.events
    ]
    rounds = []
    for local_step, rt in trace.rounds:
        entry = {
            "local_step": local_step,
            "kind": rt.kind,
            "rollouts": rt.rollout_count,
            "skipped": rt.skipped,
            "rank_effective": rt.rank_effective,
            "initial_best": rt.initial_best,
            "best_return": rt.best_return,
            "fallbacks": sum(it.surrogate_fallback for it in rt.iterations),
        }
        if rt.iterations:
            improvements = metrics.improvement_series(rt)
            entry["improvements"] = [float(v) for v in improvements]
            entry["best_improvement"] = float(improvements.max())
        rounds.append(entry)
    return RunRecord(
        method=cfg.method,
        surrogate=cfg.surrogate,
        seed=seed,
        budget=cfg.budget,
        step_cost=step_cost,
        events=events,
        rounds=rounds,
        final_value=trace.final_value,
        local_evals=trace.local_evals,
        round_evals=trace.round_evals,
    )


def record_to_jsonl(record: RunRecord) -> str:
    """Serialize a run record as the documented JSON-lines event stream."""
    lines = [json.dumps({
        "event": "run_start",
        "method": record.method,
        "surrogate": record.surrogate,
        "seed": record.seed,
        "budget": record.budget,
        "step_cost": record.step_cost,
    }, separators=(",", ":"))]
    for e in record.events:
        lines.append(json.dumps({"event": "eval", **e}, separators=(",", ":")))
    for r in record.rounds:
        lines.append(json.dumps({"event": "round", **r}, separators=(",", ":")))
    lines.append(json.dumps({
        "event": "summary",
        "final_value": record.final_value,
        "local_evals": record.local_evals,
        "round_evals": record.round_evals,
        "total_evals": record.total_evals,
        "total_steps": record.total_steps,
    }, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def record_from_jsonl(text: str) -> RunRecord:
    record = None
    for line in text.splitlines():
        obj = json.loads(line)
        kind = obj.pop("event")
        if kind == "run_start":
            record = RunRecord(
                method=obj["method"], surrogate=obj["surrogate"],
                seed=obj["seed"], budget=obj["budget"],
                step_cost=obj.get("step_cost", 1.0),
            )
        elif kind == "eval":
            record.events.append(obj)
        elif kind == "round":
            record.rounds.append(obj)
        elif kind == "summary":
            record.final_value = obj["final_value"]
            record.local_evals = obj["local_evals"]
            record.round_evals = obj["round_evals"]
    if record is None:
        raise ValueError("no run_start event found")
    return record


def record_to_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eval_index", "phase", "value", "incumbent_value"])
    for e in record.events:
        writer.writerow([e["index"], e["phase"], repr(e["value"]), repr(e["incumbent_value"])])
    return buf.getvalue()


def run_paths(out_dir, method: str, seed: int) -> tuple[Path, Path]:
    base = Path(out_dir) / f"{method}_seed{seed}"
    return base.with_suffix(".jsonl"), base.with_suffix(".csv")


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

def run_single(cfg: ExperimentConfig, seed: int, inspector=None) -> RunRecord:
    """Run one seed to budget and return its record (no I/O)."""
    objective = build_objective(cfg)
    provider = build_provider(cfg) if cfg.method not in ("local_only", "random_search") else None
    trace = interleave(
        np.zeros(objective.dim),
        objective,
        cfg.search,
        GradientAscent(cfg.step_size),
        RngStream(seed),
        budget=cfg.budget,
        method=cfg.method,
        provider=provider,
        inspector=inspector,
    )
    return record_from_trace(cfg, seed, trace, step_cost=objective.step_cost)


def run_experiment(cfg: ExperimentConfig, persist: bool = True):
    """Run every configured seed; failures abort only their own seed.

    Returns (records, failures) where failures is a list of
    (seed, error message) pairs for seeds that did not complete.
    """
    cfg.validate()
    records: list[RunRecord] = []
    failures: list[tuple[int, str]] = []
    out_dir = Path(cfg.out)
    if persist:
        out_dir.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        try:
            record = run_single(cfg, seed)
            if persist:
                jsonl_path, csv_path = run_paths(out_dir, cfg.method, seed)
                jsonl_path.write_text(record_to_jsonl(record))
                csv_path.write_text(record_to_csv(record))
            records.append(record)
        except Exception as exc:
            failures.append((seed, f"{type(exc).__name__}: {exc}"))
    return records, failures


def load_records(out_dir) -> list[RunRecord]:
    paths = sorted(Path(out_dir).glob("*.jsonl"))
    if not paths:
        raise FileNotFoundError(f"no .jsonl run records under {out_dir}")
    return [record_from_jsonl(p.read_text()) for p in paths]


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def summarize(records: list[RunRecord]) -> list[dict]:
    """Per-method summary: mean final value, std as % of mean, steps-to-0.9 as % of budget.

    ``steps_pct`` averages, over seeds, the first unified evaluation index
    whose incumbent value reaches 0.9 of that seed's final value, as a
    percentage of the seed's total evaluations.
    """
    if not records:
        raise ValueError("no records to summarize")
    by_method: dict[str, list[RunRecord]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)

    rows = []
    for method in sorted(by_method):
        group = by_method[method]
        finals = [r.final_value for r in group]
        mean = statistics.fmean(finals)
        std = float(np.std(finals))  # population std, matching n-seed reporting
        std_pct = 100.0 * std / abs(mean) if mean != 0 else float("inf") if std else 0.0
        steps = []
        for r in group:
            curve = r.curve()
            step = metrics.steps_to_fraction(curve, 0.9)
            steps.append(100.0 * step / curve[-1][0])
        rows.append({
            "method": method,
            "seeds": len(group),
            "mean_final": mean,
            "std_pct": std_pct,
            "steps_pct": statistics.fmean(steps),
        })
    return rows


def format_summary(rows: list[dict]) -> str:
    header = f"{'method':<16}{'seeds':>6}{'mean final':>16}{'std (%)':>10}{'steps (%)':>11}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['method']:<16}{row['seeds']:>6}{row['mean_final']:>16.6g}"
            f"{row['std_pct']:>10.1f}{row['steps_pct']:>11.1f}"
        )
    return "\n".join(lines)


def write_curve_csvs(records: list[RunRecord], out_dir) -> list[Path]:
    """Per-method plot data: eval_index, mean, std of the incumbent value across seeds."""
    by_method: dict[str, list[RunRecord]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    written = []
    for method, group in sorted(by_method.items()):
        curves = [r.curve() for r in group]
        length = min(len(c) for c in curves)
        values = np.array([[v for _, v in c[:length]] for c in curves])
        indices = [i for i, _ in curves[0][:length]]
        path = Path(out_dir) / f"curve_{method}.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eval_index", "mean", "std"])
        for col, idx in enumerate(indices):
            writer.writerow([idx, repr(float(values[:, col].mean())),
                             repr(float(values[:, col].std()))])
        path.write_text(buf.getvalue())
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Rank consistency analysis
# ---------------------------------------------------------------------------

class RankCheckCollector:
    """Inspector that scores every candidate pool against brute-force truth.

    For each inner iteration it evaluates the entire pool with the
    objective's noiseless value (not budget-accounted) and records the rank
    agreement of the surrogate's predictions.
    """

    def __init__(self):
        self.reports: list[metrics.RankReport] = []

    def observe(self, pool, predictions, basis, objective) -> None:
        truths = np.asarray([objective.true_value(basis.lift(z)) for z in pool])
        self.reports.append(metrics.rank_report(predictions, truths))


def rankcheck(cfg: ExperimentConfig, seed: int | None = None) -> dict:
    """Run the configured method with pool-level truth instrumentation.

    Uses a reduced candidate pool (``rankcheck_pool``) so brute-forcing the
    pool stays cheap. Returns aggregate rank-consistency statistics in the
    shape of the reference analysis: overall correlation plus the
    percentile-bucket distribution of the selected top-1 candidate.
    """
    run_cfg = replace(
        cfg,
        method="full" if cfg.method in ("local_only", "random_search") else cfg.method,
        search=replace(cfg.search, pool_size=cfg.rankcheck_pool),
    )
    collector = RankCheckCollector()
    run_single(run_cfg, cfg.seeds[0] if seed is None else seed, inspector=collector)
    reports = collector.reports
    if not reports:
        raise RuntimeError("no search rounds fired; increase budget or lower warmup_evals")
    spearmans = [r.spearman for r in reports]
    percentiles = [r.top1_percentile for r in reports]
    buckets = {
        "top_0_20": sum(p < 20.0 for p in percentiles) / len(percentiles),
        "top_20_40": sum(20.0 <= p < 40.0 for p in percentiles) / len(percentiles),
        "top_40_100": sum(p >= 40.0 for p in percentiles) / len(percentiles),
    }
    return {
        "iterations": len(reports),
        "pool_size": run_cfg.search.pool_size,
        "spearman_mean": statistics.fmean(spearmans),
        "spearman_median": statistics.median(spearmans),
        "degenerate_pools": sum(r.degenerate for r in reports),
        "top1_percentile_mean": statistics.fmean(percentiles),
        "top1_buckets": buckets,
    }
