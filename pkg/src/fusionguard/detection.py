"""Attack detection and isolation for redundant sensor banks.

Detection compares every reading against the plain average of all sensors;
a sensor whose deviation exceeds its threshold (bank-wide noise amplitude
plus its own) cannot be explained by noise alone, so something in the bank
is corrupted. Windowed detection flags a window as soon as any sample in it
triggers. Isolation picks a reference sensor from the fused subset and
blames every sensor whose distance to the reference exceeds the pairwise
noise budget; the reference itself is never blamed. Misses are possible for
small injections, false alarms are not while noise stays within its bounds
and the reference is clean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_measurement_matrix, check_measurements, check_noise_bounds
from .fusion import FusionConfig, FusionOutput, fuse_series

REFERENCE_POLICIES = ("lowest-index", "seeded-random")


@dataclass(frozen=True)
class NoiseBounds:
    """Declared per-sensor noise amplitudes |nu_i| <= per_sensor[i-1]."""

    per_sensor: tuple[float, ...]

    def __post_init__(self):
        arr = check_noise_bounds(self.per_sensor)
        object.__setattr__(self, "per_sensor", tuple(float(b) for b in arr))

    @property
    def n_sensors(self) -> int:
        return len(self.per_sensor)

    @property
    def sup(self) -> float:
        """Bank-wide noise amplitude, max over sensors."""
        return max(self.per_sensor)


@dataclass(frozen=True)
class DetectionReport:
    """Verdict for one detection window."""

    window_index: int
    detected: bool
    first_trigger_time: float | None
    triggering_sensors: tuple[int, ...]
    partial: bool = False


@dataclass(frozen=True)
class IsolationReport:
    """Blamed sensors at one instant. ``reference_sensor`` is never in ``isolated``."""

    time: float
    reference_sensor: int
    isolated: tuple[int, ...]


def detection_thresholds(bounds: NoiseBounds) -> tuple[float, ...]:
    """Per-sensor detection thresholds: bank sup amplitude plus own amplitude."""
    return tuple(bounds.sup + b for b in bounds.per_sensor)


def detect_sample(values, thresholds) -> tuple[int, ...]:
    """Sensors whose deviation from the bank average strictly exceeds threshold.

    Returns the 1-based indices, sorted. Empty means the sample is consistent
    with in-bound noise.
    """
    vals = check_measurements(values)
    thr = np.asarray(thresholds, dtype=float)
    if thr.shape != vals.shape:
        raise ValueError(f"need one threshold per sensor, got {thr.shape} for {vals.shape}")
    dev = np.abs(vals.mean() - vals)
    return tuple(int(i) for i in np.nonzero(dev > thr)[0] + 1)


def detect_window(X, thresholds, window_size: int, times=None) -> list[DetectionReport]:
    """Windowed detection over a sample series.

    Samples are grouped into consecutive windows of ``window_size``; a window
    is detected as soon as any of its samples triggers any sensor. A trailing
    window shorter than ``window_size`` is still evaluated and marked
    ``partial``. ``times`` optionally maps sample indices to seconds for
    ``first_trigger_time``; by default the sample index is used.
    """
    X = check_measurement_matrix(X)
    if window_size < 1:
        raise ValueError(f"window_size must be >= 1, got {window_size}")
    thr = np.asarray(thresholds, dtype=float)
    if thr.shape != (X.shape[1],):
        raise ValueError(f"need one threshold per sensor, got {thr.shape} for {X.shape[1]} sensors")
    if times is None:
        times = np.arange(X.shape[0], dtype=float)
    else:
        times = np.asarray(times, dtype=float)
        if times.shape != (X.shape[0],):
            raise ValueError("times must have one entry per sample")

    dev = np.abs(X.mean(axis=1, keepdims=True) - X)
    trig = dev > thr
    reports = []
    n = X.shape[0]
    for w, start in enumerate(range(0, n, window_size)):
        stop = min(start + window_size, n)
        block = trig[start:stop]
        hits = np.nonzero(block.any(axis=1))[0]
        detected = hits.size > 0
        first = float(times[start + hits[0]]) if detected else None
        sensors = tuple(int(i) for i in np.nonzero(block.any(axis=0))[0] + 1)
        reports.append(
            DetectionReport(
                window_index=w,
                detected=detected,
                first_trigger_time=first,
                triggering_sensors=sensors,
                partial=(stop - start) < window_size,
            )
        )
    return reports


def select_reference_sensor(subset, policy: str = "lowest-index", rng=None) -> int:
    """Pick the reference sensor from a fused subset.

    ``lowest-index`` is deterministic. ``seeded-random`` draws uniformly from
    the subset and requires an explicit ``rng``; there is no global RNG state
    to fall back on.
    """
    members = tuple(subset)
    if not members:
        raise ValueError("cannot pick a reference from an empty subset")
    if policy == "lowest-index":
        return min(members)
    if policy == "seeded-random":
        if rng is None:
            raise ValueError("seeded-random reference policy requires an explicit rng")
        return int(members[rng.integers(len(members))])
    raise ValueError(f"unknown reference policy {policy!r}, expected one of {REFERENCE_POLICIES}")


def isolation_thresholds(bounds: NoiseBounds, reference: int) -> tuple[float, ...]:
    """Pairwise thresholds |D_ref - D_i| must beat: ref amplitude plus own."""
    if not 1 <= reference <= bounds.n_sensors:
        raise ValueError(f"reference sensor {reference} out of range 1..{bounds.n_sensors}")
    ref_bound = bounds.per_sensor[reference - 1]
    return tuple(ref_bound + b for b in bounds.per_sensor)


def isolate(
    values,
    fusion: FusionOutput,
    bounds: NoiseBounds,
    policy: str = "lowest-index",
    rng=None,
    time: float = 0.0,
) -> IsolationReport:
    """Blame sensors that disagree with a reference drawn from the fused subset.

    The reference comes from the selected subset, so it is clean whenever the
    subset is. A sensor lands in ``isolated`` iff its distance to the
    reference strictly exceeds the pairwise noise budget, which a clean pair
    can never do; the reference is structurally never isolated.
    """
    vals = check_measurements(values)
    if vals.size != bounds.n_sensors:
        raise ValueError(f"expected {bounds.n_sensors} readings, got {vals.size}")
    ref = select_reference_sensor(fusion.selected_subset, policy=policy, rng=rng)
    thr = isolation_thresholds(bounds, ref)
    dev = np.abs(vals[ref - 1] - vals)
    blamed = tuple(int(i) for i in np.nonzero(dev > np.asarray(thr))[0] + 1)
    return IsolationReport(time=float(time), reference_sensor=ref, isolated=blamed)


class AttackDetector(BaseEstimator):
    """Per-sample attack detector over a redundant-sensor matrix.

    Parameters
    ----------
    noise_bounds : sequence of float
        Declared per-sensor noise amplitudes.
    window_size : int, default=10
        Window length for ``window_reports``.

    ``predict`` returns one boolean per row: True when any sensor's deviation
    from the row average exceeds its threshold. No false alarms while noise
    honors its bounds.
    """

    def __init__(self, noise_bounds=(), window_size: int = 10):
        self.noise_bounds = noise_bounds
        self.window_size = window_size

    def fit(self, X, y=None):
        X = check_measurement_matrix(X)
        bounds = NoiseBounds(tuple(self.noise_bounds))
        if bounds.n_sensors != X.shape[1]:
            raise ValueError(
                f"noise_bounds has {bounds.n_sensors} entries, X has {X.shape[1]} sensor columns"
            )
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        self.n_features_in_ = X.shape[1]
        self.bounds_ = bounds
        self.thresholds_ = detection_thresholds(bounds)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_measurement_matrix(X)
        dev = np.abs(X.mean(axis=1, keepdims=True) - X)
        return (dev > np.asarray(self.thresholds_)).any(axis=1)

    def window_reports(self, X, times=None) -> list[DetectionReport]:
        return detect_window(X, self.thresholds_, self.window_size, times=times)


class AttackIsolator(BaseEstimator):
    """Per-sample attacked-sensor identification.

    Fuses each row, picks the reference per ``policy``, and blames sensors
    too far from it. ``predict`` returns a boolean matrix of shape
    (n_samples, n_sensors) with True where a sensor is blamed.

    Parameters
    ----------
    noise_bounds : sequence of float
    max_attacked : int, default=1
    policy : str, "lowest-index" or "seeded-random"
    random_state : int or None
        Seed for the seeded-random policy; each ``predict`` call replays the
        same draws, keeping the estimator deterministic.
    """

    def __init__(self, noise_bounds=(), max_attacked: int = 1,
                 policy: str = "lowest-index", random_state=None):
        self.noise_bounds = noise_bounds
        self.max_attacked = max_attacked
        self.policy = policy
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_measurement_matrix(X)
        bounds = NoiseBounds(tuple(self.noise_bounds))
        if bounds.n_sensors != X.shape[1]:
            raise ValueError(
                f"noise_bounds has {bounds.n_sensors} entries, X has {X.shape[1]} sensor columns"
            )
        if self.policy not in REFERENCE_POLICIES:
            raise ValueError(f"unknown reference policy {self.policy!r}")
        if self.policy == "seeded-random" and self.random_state is None:
            raise ValueError("seeded-random policy requires random_state")
        self.n_features_in_ = X.shape[1]
        self.bounds_ = bounds
        self.config_ = FusionConfig(n_sensors=X.shape[1], max_attacked=self.max_attacked)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_measurement_matrix(X)
        refs = self.reference_sensors(X)
        b = np.asarray(self.bounds_.per_sensor)
        rows = np.arange(X.shape[0])
        thr = b[refs - 1][:, None] + b[None, :]
        dev = np.abs(X[rows, refs - 1][:, None] - X)
        flags = dev > thr
        flags[rows, refs - 1] = False
        return flags

    def reference_sensors(self, X) -> np.ndarray:
        """1-based reference sensor per row."""
        _, selected, _, subsets = fuse_series(X, self.config_)
        subs = np.asarray(subsets, dtype=int)
        if self.policy == "lowest-index":
            return subs[selected, 0]
        rng = np.random.default_rng(self.random_state)
        picks = rng.integers(subs.shape[1], size=selected.size)
        return subs[selected, picks]


__all__ = [
    "REFERENCE_POLICIES",
    "AttackDetector",
    "AttackIsolator",
    "DetectionReport",
    "IsolationReport",
    "NoiseBounds",
    "detect_sample",
    "detect_window",
    "detection_thresholds",
    "isolate",
    "isolation_thresholds",
    "select_reference_sensor",
]
