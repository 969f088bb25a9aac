"""Subset-averaging fusion of redundant sensor readings.

N sensors measure the same scalar. Up to ``max_attacked`` of them may be
corrupted by an adversary on top of bounded measurement noise. For every
subset J of size N - max_attacked the rule computes the subset average and
its spread (the largest distance from the average to a member reading), then
keeps the subset that agrees most tightly. Ties go to the lexicographically
smallest subset. The fused value is exact whenever noise is zero and at most
``max_attacked`` sensors are corrupted, and is otherwise within three times
the worst-case noise amplitude of the truth. Both properties require
``2 * max_attacked < n_sensors``; with half or more of the sensors
corruptible, two different truths can explain identical readings and no rule
can recover the value.

Sensor indices are 1-based at every public surface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_measurement_matrix, check_measurements, check_subset

SUBSET_BUDGET = 10**6


class CombinatorialBudgetError(ValueError):
    """Raised when a subset enumeration would exceed the configured budget."""


def _reconstructability_message(n_sensors: int, max_attacked: int) -> str:
    return (
        f"max_attacked={max_attacked} with n_sensors={n_sensors} is not "
        "reconstructable: once 2 * max_attacked >= n_sensors, two disjoint "
        "attack sets of that size can produce identical readings for two "
        "different true values, so no fusion rule can recover the truth. "
        "Require 2 * max_attacked < n_sensors."
    )


@dataclass(frozen=True)
class FusionConfig:
    """Sensor-bank geometry for the fusion rule.

    Parameters
    ----------
    n_sensors : int
        Number of redundant sensors, N >= 1.
    max_attacked : int
        Attack budget q, the largest number of simultaneously corrupted
        sensors the rule must survive. Must satisfy 2 * q < N.
    """

    n_sensors: int
    max_attacked: int

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise ValueError(f"n_sensors must be a positive integer, got {self.n_sensors!r}")
        if int(self.max_attacked) != self.max_attacked or self.max_attacked < 0:
            raise ValueError(f"max_attacked must be a nonnegative integer, got {self.max_attacked!r}")
        if 2 * self.max_attacked >= self.n_sensors:
            raise ValueError(_reconstructability_message(self.n_sensors, self.max_attacked))

    @property
    def subset_size(self) -> int:
        """Cardinality N - q of every candidate subset."""
        return self.n_sensors - self.max_attacked


@dataclass(frozen=True)
class FusionOutput:
    """Result of fusing one measurement vector.

    Attributes
    ----------
    fused_value : float
        Average of the selected subset's readings.
    selected_subset : tuple of int
        1-based indices of the winning subset, sorted ascending.
    spread : float
        Largest |fused_value - reading| over the selected subset.
    all_spreads : dict or None
        Spread of every candidate subset, only populated on request.
    """

    fused_value: float
    selected_subset: tuple[int, ...]
    spread: float
    all_spreads: dict[tuple[int, ...], float] | None = None


@lru_cache(maxsize=None)
def _subsets_cached(n_sensors: int, subset_size: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(1, n_sensors + 1), subset_size))


def enumerate_subsets(n_sensors: int, subset_size: int, budget: int = SUBSET_BUDGET) -> list[tuple[int, ...]]:
    """All size-``subset_size`` subsets of {1, .., n_sensors} in lexicographic order.

    Raises
    ------
    CombinatorialBudgetError
        If C(n_sensors, subset_size) exceeds ``budget``.
    """
    if n_sensors < 1:
        raise ValueError(f"n_sensors must be >= 1, got {n_sensors}")
    if not 1 <= subset_size <= n_sensors:
        raise ValueError(f"subset_size must be in 1..{n_sensors}, got {subset_size}")
    count = math.comb(n_sensors, subset_size)
    if count > budget:
        raise CombinatorialBudgetError(
            f"combinatorial budget exceeded: C({n_sensors}, {subset_size}) = {count} "
            f"subsets, budget is {budget}"
        )
    return list(_subsets_cached(n_sensors, subset_size))


def _subset_stats(vals: list[float], subset: tuple[int, ...]) -> tuple[float, float]:
    # vals is 0-based, subset is 1-based; single summation pass keeps the
    # scalar and batch paths byte-stable run to run.
    total = 0.0
    for j in subset:
        total += vals[j - 1]
    avg = total / len(subset)
    spread = 0.0
    for j in subset:
        dev = abs(avg - vals[j - 1])
        if dev > spread:
            spread = dev
    return avg, spread


def subset_average(values, subset) -> float:
    """Mean of the readings indexed by ``subset`` (1-based)."""
    vals = check_measurements(values)
    sub = check_subset(subset, vals.size)
    avg, _ = _subset_stats(vals.tolist(), sub)
    return avg


def subset_spread(values, subset) -> float:
    """Largest |subset average - reading| over the subset (1-based indices)."""
    vals = check_measurements(values)
    sub = check_subset(subset, vals.size)
    _, spread = _subset_stats(vals.tolist(), sub)
    return spread


def fuse(values, config: FusionConfig, collect_spreads: bool = False) -> FusionOutput:
    """Fuse one vector of redundant readings.

    Parameters
    ----------
    values : array-like of shape (n_sensors,)
        One instant's readings, finite.
    config : FusionConfig
        Sensor count and attack budget.
    collect_spreads : bool
        When true, the spread of every candidate subset is returned for
        diagnostics.

    Returns
    -------
    FusionOutput
        The tightest subset (lexicographically smallest on ties), its
        average, and its spread.
    """
    vals = check_measurements(values)
    if vals.size != config.n_sensors:
        raise ValueError(
            f"expected {config.n_sensors} readings per FusionConfig, got {vals.size}"
        )
    subsets = enumerate_subsets(config.n_sensors, config.subset_size)
    vlist = vals.tolist()
    best_subset = None
    best_avg = 0.0
    best_spread = math.inf
    all_spreads: dict[tuple[int, ...], float] | None = {} if collect_spreads else None
    for sub in subsets:
        avg, spread = _subset_stats(vlist, sub)
        if all_spreads is not None:
            all_spreads[sub] = spread
        if spread < best_spread:
            best_subset = sub
            best_avg = avg
            best_spread = spread
    assert best_subset is not None
    return FusionOutput(
        fused_value=best_avg,
        selected_subset=best_subset,
        spread=best_spread,
        all_spreads=all_spreads,
    )


def fuse_series(X, config: FusionConfig):
    """Vectorized fusion of a whole series of measurement vectors.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_sensors)
    config : FusionConfig

    Returns
    -------
    fused : ndarray of shape (n_samples,)
    selected : ndarray of int, shape (n_samples,)
        Index into ``subsets`` of each row's winning subset.
    spreads : ndarray of shape (n_samples,)
        Spread of the winning subset per row.
    subsets : list of tuple
        The lexicographic subset enumeration the indices refer to.

    Ties resolve to the first (lexicographically smallest) subset, matching
    :func:`fuse`; fused values may differ from the scalar path in the last
    ulp because numpy sums pairwise.
    """
    X = check_measurement_matrix(X)
    if X.shape[1] != config.n_sensors:
        raise ValueError(
            f"expected {config.n_sensors} sensor columns per FusionConfig, got {X.shape[1]}"
        )
    subsets = enumerate_subsets(config.n_sensors, config.subset_size)
    idx = np.asarray(subsets, dtype=int) - 1
    sub_vals = X[:, idx]
    means = sub_vals.mean(axis=2)
    spreads_all = np.abs(sub_vals - means[:, :, None]).max(axis=2)
    selected = spreads_all.argmin(axis=1)
    rows = np.arange(X.shape[0])
    return means[rows, selected], selected, spreads_all[rows, selected], subsets


def spread_series(X, config: FusionConfig):
    """Spread of every candidate subset for every row of X.

    Returns (spreads of shape (n_samples, n_subsets), subsets). Diagnostic
    companion to :func:`fuse_series`.
    """
    X = check_measurement_matrix(X)
    if X.shape[1] != config.n_sensors:
        raise ValueError(
            f"expected {config.n_sensors} sensor columns per FusionConfig, got {X.shape[1]}"
        )
    subsets = enumerate_subsets(config.n_sensors, config.subset_size)
    idx = np.asarray(subsets, dtype=int) - 1
    sub_vals = X[:, idx]
    means = sub_vals.mean(axis=2)
    return np.abs(sub_vals - means[:, :, None]).max(axis=2), subsets


def reconstructible(n_sensors: int, max_attacked: int) -> bool:
    """Whether the true value can be recovered under ``max_attacked`` corruptions.

    True exactly when 2 * max_attacked < n_sensors. At or above that budget,
    two attack sets can explain the same readings with different truths.
    """
    if int(n_sensors) != n_sensors or n_sensors < 1:
        raise ValueError(f"n_sensors must be a positive integer, got {n_sensors!r}")
    if int(max_attacked) != max_attacked or max_attacked < 0:
        raise ValueError(f"max_attacked must be a nonnegative integer, got {max_attacked!r}")
    return 2 * max_attacked < n_sensors


def theoretical_error_bound(noise_sup: float) -> float:
    """Worst-case |fused - true| guarantee: three times the noise amplitude.

    ``noise_sup`` is the sup of |noise| over all sensors and times. Holds for
    any attack on at most ``max_attacked`` sensors when the bank is
    reconstructable.
    """
    if not math.isfinite(noise_sup) or noise_sup < 0:
        raise ValueError(f"noise_sup must be finite and nonnegative, got {noise_sup!r}")
    return 3.0 * noise_sup


class SubsetFusion(BaseEstimator, TransformerMixin):
    """Robust column fusion for redundant-sensor matrices.

    Each row of X holds one instant's readings from the same quantity by
    ``n_features_in_`` redundant sensors; ``transform`` reduces every row to
    the tightest-subset average, tolerating up to ``max_attacked`` corrupted
    columns per row.

    Parameters
    ----------
    max_attacked : int, default=1
        Attack budget q. Fitting fails unless 2 * q < n_features_in_.

    Attributes
    ----------
    n_features_in_ : int
        Sensor count seen in ``fit``.
    config_ : FusionConfig
    subsets_ : list of tuple
        Candidate subsets in lexicographic order, 1-based.

    Examples
    --------
    >>> SubsetFusion(max_attacked=1).fit_transform([[5.0, 5.1, 50.0]])
    array([[5.05]])
    """

    def __init__(self, max_attacked: int = 1):
        self.max_attacked = max_attacked

    def fit(self, X, y=None):
        X = check_measurement_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.config_ = FusionConfig(n_sensors=X.shape[1], max_attacked=self.max_attacked)
        self.subsets_ = enumerate_subsets(self.config_.n_sensors, self.config_.subset_size)
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        fused, _, _, _ = fuse_series(X, self.config_)
        return fused.reshape(-1, 1)

    def fuse_records(self, X) -> list[FusionOutput]:
        """Per-row FusionOutput records, for callers that need the subsets."""
        self._check_fitted()
        fused, selected, spreads, subsets = fuse_series(X, self.config_)
        return [
            FusionOutput(float(fused[k]), subsets[selected[k]], float(spreads[k]))
            for k in range(fused.size)
        ]

    def get_feature_names_out(self, input_features=None):
        return np.asarray(["fused"], dtype=object)

    def _check_fitted(self):
        if not hasattr(self, "config_"):
            raise RuntimeError("SubsetFusion must be fitted before use")


__all__ = [
    "SUBSET_BUDGET",
    "CombinatorialBudgetError",
    "FusionConfig",
    "FusionOutput",
    "SubsetFusion",
    "enumerate_subsets",
    "fuse",
    "fuse_series",
    "reconstructible",
    "spread_series",
    "subset_average",
    "subset_spread",
    "theoretical_error_bound",
]
