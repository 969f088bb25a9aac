"""Seeded measurement generation: ground truth, sensor noise, attack injection.

All randomness flows through numpy PCG64 generators derived from a master
seed and an integer stream id, so every experiment, and every Monte-Carlo
trial inside one, replays bit-identically from its (seed, stream) pair.
Draw order within a stream is part of the contract: per sample, sensor noise
in index order, then the attacked set, then the attack values. Attack values
are drawn fresh at every sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fusion import enumerate_subsets

RNG_ALGORITHM = "PCG64"

# stream ids, one concern each; Monte-Carlo trial k shifts them by k * STREAMS_PER_TRIAL
STREAM_MEASUREMENT = 0
STREAM_CHANNEL = 1
STREAM_REFERENCE = 2
STREAMS_PER_TRIAL = 4

NOISE_KINDS = ("uniform", "gaussian", "none")
ATTACK_KINDS = ("none", "fixed-set", "rotating-uniform")
TRUTH_KINDS = ("constant", "sinusoid", "from-platoon")


def make_rng_stream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Independent, replayable generator for one concern of one experiment."""
    if master_seed < 0 or stream_id < 0:
        raise ValueError("master_seed and stream_id must be nonnegative integers")
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(stream_id,)))


@dataclass(frozen=True)
class GroundTruth:
    """True scalar signal the sensor bank measures.

    ``constant`` is ``offset``; ``sinusoid`` is offset + amplitude *
    sin(angular_frequency * t); ``from-platoon`` defers to the platoon
    simulator, which feeds each bank the live inter-vehicle spacing.
    """

    kind: str = "constant"
    offset: float = 0.0
    amplitude: float = 0.0
    angular_frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in TRUTH_KINDS:
            raise ValueError(f"unknown ground truth kind {self.kind!r}, expected one of {TRUTH_KINDS}")

    def value(self, t: float) -> float:
        if self.kind == "constant":
            return self.offset
        if self.kind == "sinusoid":
            return self.offset + self.amplitude * math.sin(self.angular_frequency * t)
        raise ValueError("from-platoon ground truth is resolved by the platoon simulator")

    def series(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.kind == "constant":
            return np.full(times.shape, self.offset)
        if self.kind == "sinusoid":
            return self.offset + self.amplitude * np.sin(self.angular_frequency * times)
        raise ValueError("from-platoon ground truth is resolved by the platoon simulator")


@dataclass(frozen=True)
class SensorNoise:
    """Noise model for a single channel.

    ``uniform`` draws from [-bound, bound). ``gaussian`` draws
    N(mean, std**2) and is unbounded, so detection needs an explicit
    ``declared_bound`` to run in that regime. ``none`` is exactly zero.
    """

    kind: str = "none"
    bound: float = 0.0
    mean: float = 0.0
    std: float = 0.0
    declared_bound: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {NOISE_KINDS}")
        if self.kind == "uniform" and (not math.isfinite(self.bound) or self.bound < 0):
            raise ValueError(f"uniform noise bound must be finite and >= 0, got {self.bound!r}")
        if self.kind == "gaussian" and (not math.isfinite(self.std) or self.std < 0):
            raise ValueError(f"gaussian noise std must be finite and >= 0, got {self.std!r}")

    @property
    def known_bound(self) -> float | None:
        """Amplitude usable for thresholds, None when the noise is unbounded."""
        if self.declared_bound is not None:
            return self.declared_bound
        if self.kind == "uniform":
            return self.bound
        if self.kind == "none":
            return 0.0
        return None

    def sample(self, rng) -> float:
        if self.kind == "uniform":
            return float(rng.uniform(-self.bound, self.bound))
        if self.kind == "gaussian":
            return float(rng.normal(self.mean, self.std))
        return 0.0

    def sample_series(self, rng, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-self.bound, self.bound, size=n)
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.std, size=n)
        return np.zeros(n)


@dataclass(frozen=True)
class NoiseModel:
    """One SensorNoise per sensor in the bank."""

    sensors: tuple[SensorNoise, ...]

    def __post_init__(self):
        if len(self.sensors) < 1:
            raise ValueError("noise model needs at least one sensor")

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def known_bounds(self) -> tuple[float, ...]:
        """Per-sensor amplitudes for thresholding; error if any is undeclared."""
        bounds = []
        for i, s in enumerate(self.sensors, start=1):
            b = s.known_bound
            if b is None:
                raise ValueError(
                    f"sensor {i} has unbounded noise and no declared_bound; "
                    "detection and isolation need declared amplitudes"
                )
            bounds.append(b)
        return tuple(bounds)

    def sample(self, rng) -> np.ndarray:
        return np.array([s.sample(rng) for s in self.sensors])

    def sample_series(self, rng, n: int) -> np.ndarray:
        # column per sensor, each sensor's series drawn in one block
        return np.column_stack([s.sample_series(rng, n) for s in self.sensors])


@dataclass(frozen=True)
class AttackSchedule:
    """Which sensors are corrupted when, and by how much.

    ``none`` injects nothing. ``fixed-set`` corrupts the same sensors at
    every sample. ``rotating-uniform`` redraws the attacked set uniformly
    among all size-``max_attacked`` subsets at every sample. Values are
    drawn fresh per sample: ``gaussian`` N(value_mean, value_std**2) or
    ``constant`` value_mean.
    """

    kind: str = "none"
    max_attacked: int = 0
    fixed_set: tuple[int, ...] = ()
    value_kind: str = "gaussian"
    value_mean: float = 0.0
    value_std: float = 1.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}, expected one of {ATTACK_KINDS}")
        if self.value_kind not in ("gaussian", "constant"):
            raise ValueError(f"unknown attack value kind {self.value_kind!r}")
        if self.max_attacked < 0:
            raise ValueError("max_attacked must be >= 0")
        if self.kind == "fixed-set":
            if not self.fixed_set:
                raise ValueError("fixed-set attack needs a nonempty fixed_set")
            if any(int(i) != i or i < 1 for i in self.fixed_set):
                raise ValueError("fixed_set entries must be 1-based sensor indices")
            object.__setattr__(self, "fixed_set", tuple(sorted(int(i) for i in self.fixed_set)))
            if len(set(self.fixed_set)) != len(self.fixed_set):
                raise ValueError("fixed_set contains duplicates")
            if len(self.fixed_set) > self.max_attacked:
                raise ValueError(
                    f"attack budget violated: fixed_set has {len(self.fixed_set)} sensors, "
                    f"max_attacked is {self.max_attacked}"
                )
        if self.kind == "rotating-uniform" and self.max_attacked < 1:
            raise ValueError("rotating-uniform attack needs max_attacked >= 1")

    def validate_bank(self, n_sensors: int):
        if self.kind == "fixed-set":
            for i in self.fixed_set:
                if not 1 <= i <= n_sensors:
                    raise ValueError(f"fixed_set sensor {i} out of range 1..{n_sensors}")
        if self.max_attacked > n_sensors:
            raise ValueError("max_attacked exceeds the sensor count")

    def _values(self, rng, size):
        if self.value_kind == "gaussian":
            return rng.normal(self.value_mean, self.value_std, size=size)
        return np.full(size, self.value_mean)

    def sample(self, rng, n_sensors: int):
        """One sample's (attacked set, injection vector of shape (n_sensors,))."""
        self.validate_bank(n_sensors)
        eta = np.zeros(n_sensors)
        if self.kind == "none":
            return (), eta
        if self.kind == "fixed-set":
            attacked = tuple(sorted(self.fixed_set))
        else:
            subsets = enumerate_subsets(n_sensors, self.max_attacked)
            attacked = subsets[int(rng.integers(len(subsets)))]
        vals = self._values(rng, len(attacked))
        for j, a in enumerate(attacked):
            eta[a - 1] = vals[j]
        return attacked, eta

    def sample_series(self, rng, n_sensors: int, n: int):
        """(mask of shape (n, n_sensors), injections of same shape) for n samples."""
        self.validate_bank(n_sensors)
        mask = np.zeros((n, n_sensors), dtype=bool)
        eta = np.zeros((n, n_sensors))
        if self.kind == "none":
            return mask, eta
        if self.kind == "fixed-set":
            cols = np.asarray(self.fixed_set, dtype=int) - 1
            mask[:, cols] = True
            eta[:, cols] = self._values(rng, (n, cols.size))
            return mask, eta
        subsets = np.asarray(enumerate_subsets(n_sensors, self.max_attacked), dtype=int)
        picks = rng.integers(len(subsets), size=n)
        cols = subsets[picks] - 1
        rows = np.arange(n)[:, None]
        mask[rows, cols] = True
        eta[rows, cols] = self._values(rng, cols.shape)
        return mask, eta


@dataclass(frozen=True)
class ChannelNoise:
    """Bounded disturbances on the signals a follower receives from its predecessor."""

    velocity: SensorNoise = field(default_factory=SensorNoise)
    acceleration: SensorNoise = field(default_factory=SensorNoise)
    input: SensorNoise = field(default_factory=SensorNoise)

    def sample(self, rng) -> tuple[float, float, float]:
        return (
            self.velocity.sample(rng),
            self.acceleration.sample(rng),
            self.input.sample(rng),
        )


@dataclass(frozen=True)
class MeasurementSample:
    """One instant's readings plus the ground truth that produced them."""

    values: np.ndarray
    true_value: float
    attacked: tuple[int, ...]
    attack_values: np.ndarray


@dataclass(frozen=True)
class MeasurementSeries:
    times: np.ndarray
    values: np.ndarray
    true_values: np.ndarray
    attacked_mask: np.ndarray
    attack_values: np.ndarray


def sample_measurements(t: float, truth, noise: NoiseModel, attack: AttackSchedule, rng) -> MeasurementSample:
    """Draw one measurement vector: truth + noise + injected attack.

    ``truth`` is either a plain float (already-evaluated true value, the form
    the platoon loop uses) or a GroundTruth evaluated at ``t``.
    """
    true_value = truth.value(t) if isinstance(truth, GroundTruth) else float(truth)
    nu = noise.sample(rng)
    attacked, eta = attack.sample(rng, noise.n_sensors)
    return MeasurementSample(
        values=true_value + nu + eta,
        true_value=true_value,
        attacked=attacked,
        attack_values=eta,
    )


def sample_measurement_series(times, truth: GroundTruth, noise: NoiseModel,
                              attack: AttackSchedule, rng) -> MeasurementSeries:
    """Vectorized measurement stream over a time grid.

    Consumes the stream in blocks (noise series, then attack sets, then
    values), so it is replayable against itself but not aligned with a loop
    of per-sample draws.
    """
    times = np.asarray(times, dtype=float)
    d = truth.series(times)
    nu = noise.sample_series(rng, times.size)
    mask, eta = attack.sample_series(rng, noise.n_sensors, times.size)
    return MeasurementSeries(
        times=times,
        values=d[:, None] + nu + eta,
        true_values=d,
        attacked_mask=mask,
        attack_values=eta,
    )


__all__ = [
    "ATTACK_KINDS",
    "NOISE_KINDS",
    "RNG_ALGORITHM",
    "STREAM_CHANNEL",
    "STREAM_MEASUREMENT",
    "STREAM_REFERENCE",
    "STREAMS_PER_TRIAL",
    "TRUTH_KINDS",
    "AttackSchedule",
    "ChannelNoise",
    "GroundTruth",
    "MeasurementSample",
    "MeasurementSeries",
    "NoiseModel",
    "SensorNoise",
    "make_rng_stream",
    "sample_measurement_series",
    "sample_measurements",
]
