"""Evaluation metrics: rank consistency, selection quality, convergence speed.

All functions here are pure. The rank metrics quantify how well surrogate
predictions order a candidate pool against ground-truth returns; the curve
metric measures how quickly a run reaches a fraction of its final value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RankReport:
    """Rank agreement between predictions and truth over one candidate pool.

    ``top1_percentile`` is the percentage of pool candidates whose true
    return strictly beats the prediction-selected one (0 = best possible).
    ``degenerate`` marks pools where either input was constant, in which
    case the correlation is defined as 0.
    """

    spearman: float
    top1_percentile: float
    pool_size: int
    degenerate: bool = False


def average_ranks(values) -> np.ndarray:
    """Tie-averaged ranks, 1-based: equal values share the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j < len(x) and x[order[j]] == x[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # positions i+1 .. j averaged
        i = j
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of tie-averaged ranks.

    Constant input on either side has no defined rank ordering; the result
    is then 0 rather than NaN (see :func:`rank_report` for the flag).
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    if xa.ndim != 1 or len(xa) < 2:
        raise ValueError("spearman needs two 1-d inputs of length >= 2")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        return 0.0
    rx = average_ranks(xa)
    ry = average_ranks(ya)
    return float(np.corrcoef(rx, ry)[0, 1])


def top1_percentile(pred, truth) -> float:
    """Ground-truth percentile of the prediction-selected top candidate.

    Selects argmax(pred) (lowest index on ties) and returns
    100 * |{j : truth_j > truth_selected}| / N. Strict-greater counting
    means exact ties favor the selection.
    """
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.ndim != 1 or len(p) < 1:
        raise ValueError("top1_percentile needs two 1-d inputs of length >= 1")
    selected = int(np.argmax(p))
    better = int(np.count_nonzero(t > t[selected]))
    return 100.0 * better / len(t)


def rank_report(pred, truth) -> RankReport:
    """Bundle spearman and top-1 percentile for one candidate pool."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    degenerate = bool(np.all(p == p[0]) or np.all(t == t[0]))
    return RankReport(
        spearman=spearman(p, t),
        top1_percentile=top1_percentile(p, t),
        pool_size=len(p),
        degenerate=degenerate,
    )


def improvement_series(trace) -> np.ndarray:
    """Per-iteration improvements of a search round over its initial context.

    Entry n is (true return of the candidate selected at inner iteration n)
    minus (the best return in the round's initial context). Uses true
    returns only; prediction values never enter.
    """
    if trace.initial_best is None:
        raise ValueError("trace has no initial-context baseline")
    return np.asarray(
        [it.actual - trace.initial_best for it in trace.iterations], dtype=float
    )


def best_improvement(trace) -> float:
    """Largest per-iteration improvement within a round (may be negative)."""
    series = improvement_series(trace)
    if len(series) == 0:
        raise ValueError("trace has no inner iterations")
    return float(series.max())


def steps_to_fraction(curve, fraction: float):
    """Earliest step at which the curve reaches ``fraction`` of its final value.

    ``curve`` is a sequence of (step, value) pairs in step order. The target
    is fraction * final value, compared signed as-is (so for negative
    finals the target is *above* the final value and may never be reached);
    if no point qualifies the last step is returned.
    """
    if len(curve) == 0:
        raise ValueError("curve is empty")
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    final = curve[-1][1]
    target = fraction * final
    for step, value in curve:
        if value >= target:
            return step
    return curve[-1][0]
