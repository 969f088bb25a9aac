"""Signal norms, stability checks, and error accounting for simulation output."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fusion import theoretical_error_bound

GRID_RTOL = 1e-12


@dataclass(frozen=True)
class SignalTrace:
    """A scalar signal sampled on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size < 2:
            raise ValueError("a trace needs at least two samples")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        dt = steps[0]
        # uniform grid within relative tolerance; norms assume a constant step
        if np.any(np.abs(steps - dt) > GRID_RTOL * max(1.0, abs(dt))):
            raise ValueError("times must be uniformly spaced")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def lp_norm(trace: SignalTrace, p) -> float:
    """Lp norm of the trace, left-endpoint Riemann sum for finite p.

    Finite p uses samples [0, n-1) weighted by dt; p = inf is the max of
    |values| over all samples.
    """
    if p == math.inf or p == "inf":
        return float(np.abs(trace.values).max())
    p = float(p)
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    body = np.abs(trace.values[:-1]) ** p
    return float((body.sum() * trace.dt) ** (1.0 / p))


@dataclass(frozen=True)
class PairVerdict:
    """One upstream/downstream norm comparison in a vehicle string."""

    upstream_label: str
    downstream_label: str
    upstream_norm: float
    downstream_norm: float
    ratio: float
    passed: bool


def string_stability_check(traces, p=2, tolerance: float = 0.0) -> list[PairVerdict]:
    """Check that signal energy does not grow along the string.

    ``traces`` is ordered upstream to downstream; each downstream norm must
    not exceed its predecessor's by more than ``tolerance`` (relative). The
    underlying definition assumes zero initial conditions, so a trace that
    starts away from zero only warns.
    """
    traces = list(traces)
    if len(traces) < 2:
        raise ValueError("need at least two traces to compare")
    for tr in traces:
        if tr.values[0] != 0.0:
            warnings.warn(
                f"trace {tr.label or '<unlabeled>'} starts at {tr.values[0]!r}, not 0; "
                "the stability definition assumes zero initial conditions",
                stacklevel=2,
            )
    verdicts = []
    norms = [lp_norm(tr, p) for tr in traces]
    for i in range(1, len(traces)):
        up, down = norms[i - 1], norms[i]
        if up == 0.0:
            ratio = 1.0 if down == 0.0 else math.inf
        else:
            ratio = down / up
        verdicts.append(
            PairVerdict(
                upstream_label=traces[i - 1].label,
                downstream_label=traces[i].label,
                upstream_norm=up,
                downstream_norm=down,
                ratio=ratio,
                passed=down <= up * (1.0 + tolerance),
            )
        )
    return verdicts


@dataclass(frozen=True)
class BoundReport:
    """How a fusion-error trace did against its worst-case guarantee."""

    bound: float
    n_samples: int
    violation_count: int
    max_abs_error: float
    time_of_max: float


def bound_violation_report(trace: SignalTrace, noise_sup: float) -> BoundReport:
    """Audit a fusion-error trace against the three-times-noise bound."""
    bound = theoretical_error_bound(noise_sup)
    errs = np.abs(trace.values)
    k = int(errs.argmax())
    return BoundReport(
        bound=bound,
        n_samples=int(errs.size),
        violation_count=int((errs > bound).sum()),
        max_abs_error=float(errs[k]),
        time_of_max=float(trace.times[k]),
    )


@dataclass(frozen=True)
class ConfusionStats:
    """Per-sensor-instant confusion counts for isolation decisions."""

    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int

    @property
    def precision(self) -> float:
        denom = self.true_positives + self.false_positives
        return self.true_positives / denom if denom else float("nan")

    @property
    def recall(self) -> float:
        denom = self.true_positives + self.false_negatives
        return self.true_positives / denom if denom else float("nan")


def confusion_stats(predicted, truth, n_sensors: int) -> ConfusionStats:
    """Aggregate confusion counts over aligned sequences of 1-based index sets."""
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth sequences must have equal length")
    tp = fp = tn = fn = 0
    for pred_set, true_set in zip(predicted, truth):
        p = set(pred_set)
        t = set(true_set)
        for s in (p | t):
            if not 1 <= s <= n_sensors:
                raise ValueError(f"sensor index {s} out of range 1..{n_sensors}")
        tp += len(p & t)
        fp += len(p - t)
        fn += len(t - p)
        tn += n_sensors - len(p | t)
    return ConfusionStats(tp, fp, tn, fn)


__all__ = [
    "BoundReport",
    "ConfusionStats",
    "PairVerdict",
    "SignalTrace",
    "bound_violation_report",
    "confusion_stats",
    "lp_norm",
    "string_stability_check",
]
