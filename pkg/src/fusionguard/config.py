"""Scenario configuration: JSON schema, validation, shipped presets.

parse_config accepts a JSON file path or an already-loaded dict, validates
everything it can, and reports all problems at once instead of stopping at
the first.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .fusion import FusionConfig
from .platoon import InputSchedule, PlatoonParams
from .scenario import (
    ATTACK_KINDS,
    NOISE_KINDS,
    TRUTH_KINDS,
    AttackSchedule,
    ChannelNoise,
    GroundTruth,
    NoiseModel,
    SensorNoise,
)

EXPERIMENTS = ("fuse-demo", "detect", "isolate", "platoon", "montecarlo")
REFERENCE_POLICIES = ("lowest-index", "seeded-random")


class ConfigError(ValueError):
    """Invalid configuration; carries every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"invalid configuration ({len(self.errors)} error(s)):\n{lines}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform simulation grid from start to stop inclusive."""

    start: float
    stop: float
    dt: float

    def __post_init__(self):
        for name in ("start", "stop", "dt"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"time.{name} must be finite, got {v!r}")
        if self.dt <= 0:
            raise ValueError(f"time.dt must be > 0, got {self.dt!r}")
        if self.stop <= self.start:
            raise ValueError(f"time.stop must exceed time.start, got [{self.start}, {self.stop}]")
        span = self.stop - self.start
        steps = span / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"time span {span} is not an integer number of dt = {self.dt} steps")

    @property
    def n_samples(self) -> int:
        return int(round((self.stop - self.start) / self.dt)) + 1

    def grid(self) -> np.ndarray:
        return self.start + np.arange(self.n_samples) * self.dt


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated description of one experiment."""

    experiment: str
    seed: int
    fusion: FusionConfig
    noise: NoiseModel
    attack: AttackSchedule
    ground_truth: GroundTruth
    time: TimeGrid
    window_size: int = 10
    reference_policy: str = "lowest-index"
    trials: int = 100
    inner: str | None = None
    platoon: PlatoonParams | None = None
    reference_input: InputSchedule | None = None
    channel_noise: ChannelNoise | None = None
    negate_platoon_input: bool = False
    emit_all_spreads: bool = False
    state_ceiling: float | None = None

    def to_dict(self) -> dict:
        """Normalized JSON-ready echo; parse_config(to_dict()) reproduces self."""
        d = {
            "experiment": self.experiment,
            "seed": self.seed,
            "sensors": {
                "count": self.fusion.n_sensors,
                "max_attacked": self.fusion.max_attacked,
                "noise": [_noise_to_dict(s) for s in self.noise.sensors],
            },
            "attack": _attack_to_dict(self.attack),
            "ground_truth": _truth_to_dict(self.ground_truth),
            "time": {"start": self.time.start, "stop": self.time.stop, "dt": self.time.dt},
            "window_size": self.window_size,
            "reference_policy": self.reference_policy,
            "trials": self.trials,
            "negate_platoon_input": self.negate_platoon_input,
            "emit_all_spreads": self.emit_all_spreads,
        }
        if self.experiment == "montecarlo":
            d["inner"] = self.inner
        if self.platoon is not None:
            p = {
                "vehicles": self.platoon.vehicles,
                "headway": self.platoon.headway,
                "engine_lag": self.platoon.engine_lag,
                "standstill": self.platoon.standstill,
                "gains": {"k_p": self.platoon.k_p, "k_d": self.platoon.k_d, "k_dd": self.platoon.k_dd},
            }
            if self.platoon.hinf_gain is not None:
                p["hinf_gain"] = self.platoon.hinf_gain
            if self.state_ceiling is not None:
                p["state_ceiling"] = self.state_ceiling
            d["platoon"] = p
        if self.reference_input is not None:
            d["reference_input"] = {
                "times": list(self.reference_input.times),
                "values": list(self.reference_input.values),
            }
        if self.channel_noise is not None:
            d["channel_noise"] = {
                "velocity": _noise_to_dict(self.channel_noise.velocity),
                "acceleration": _noise_to_dict(self.channel_noise.acceleration),
                "input": _noise_to_dict(self.channel_noise.input),
            }
        return d


def _noise_to_dict(s: SensorNoise) -> dict:
    d = {"kind": s.kind}
    if s.kind == "uniform":
        d["bound"] = s.bound
    elif s.kind == "gaussian":
        d["mean"] = s.mean
        d["std"] = s.std
    if s.declared_bound is not None:
        d["declared_bound"] = s.declared_bound
    return d


def _attack_to_dict(a: AttackSchedule) -> dict:
    d = {"kind": a.kind}
    if a.kind == "none":
        return d
    d["max_attacked"] = a.max_attacked
    if a.kind == "fixed-set":
        d["sensors"] = list(a.fixed_set)
    if a.value_kind == "gaussian":
        d["value"] = {"kind": "gaussian", "mean": a.value_mean, "std": a.value_std}
    else:
        d["value"] = {"kind": "constant", "value": a.value_mean}
    return d


def _truth_to_dict(g: GroundTruth) -> dict:
    if g.kind == "constant":
        return {"kind": "constant", "offset": g.offset}
    if g.kind == "sinusoid":
        return {
            "kind": "sinusoid",
            "offset": g.offset,
            "amplitude": g.amplitude,
            "angular_frequency": g.angular_frequency,
        }
    return {"kind": "from-platoon"}


# ---------------------------------------------------------------------------
# parsing helpers; each returns None after appending to errs on failure
# ---------------------------------------------------------------------------

def _check_keys(obj, allowed, where, errs):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        errs.append(f"{where}: unknown key(s) {', '.join(unknown)}")


def _number(obj, key, where, errs, required=False, default=None):
    if key not in obj:
        if required:
            errs.append(f"{where}: missing required key '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append(f"{where}.{key}: expected a number, got {v!r}")
        return default
    return float(v)


def _integer(obj, key, where, errs, required=False, default=None, minimum=None):
    if key not in obj:
        if required:
            errs.append(f"{where}: missing required key '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        errs.append(f"{where}.{key}: expected an integer, got {v!r}")
        return default
    if minimum is not None and v < minimum:
        errs.append(f"{where}.{key}: must be >= {minimum}, got {v}")
        return default
    return v


def _boolean(obj, key, where, errs, default=False):
    v = obj.get(key, default)
    if not isinstance(v, bool):
        errs.append(f"{where}.{key}: expected a boolean, got {v!r}")
        return default
    return v


def _parse_noise_entry(obj, where, errs):
    if not isinstance(obj, dict):
        errs.append(f"{where}: expected an object, got {obj!r}")
        return None
    _check_keys(obj, ("kind", "bound", "mean", "std", "declared_bound"), where, errs)
    kind = obj.get("kind")
    if kind not in NOISE_KINDS:
        errs.append(f"{where}.kind: expected one of {NOISE_KINDS}, got {kind!r}")
        return None
    kwargs = {"kind": kind}
    if kind == "uniform":
        b = _number(obj, "bound", where, errs, required=True)
        if b is None:
            return None
        kwargs["bound"] = b
    if kind == "gaussian":
        kwargs["mean"] = _number(obj, "mean", where, errs, default=0.0)
        std = _number(obj, "std", where, errs, required=True)
        if std is None:
            return None
        kwargs["std"] = std
    if "declared_bound" in obj:
        kwargs["declared_bound"] = _number(obj, "declared_bound", where, errs)
    try:
        return SensorNoise(**kwargs)
    except ValueError as e:
        errs.append(f"{where}: {e}")
        return None


def _parse_sensors(raw, errs):
    obj = raw.get("sensors")
    if not isinstance(obj, dict):
        errs.append("sensors: section is required and must be an object")
        return None, None
    _check_keys(obj, ("count", "max_attacked", "noise"), "sensors", errs)
    count = _integer(obj, "count", "sensors", errs, required=True, minimum=1)
    q = _integer(obj, "max_attacked", "sensors", errs, required=True, minimum=0)
    fusion = None
    if count is not None and q is not None:
        try:
            fusion = FusionConfig(n_sensors=count, max_attacked=q)
        except ValueError as e:
            errs.append(f"sensors: {e}")
    noise_list = obj.get("noise")
    noise = None
    if not isinstance(noise_list, list) or not noise_list:
        errs.append("sensors.noise: expected a nonempty list of per-sensor noise objects")
    else:
        entries = [
            _parse_noise_entry(entry, f"sensors.noise[{i}]", errs)
            for i, entry in enumerate(noise_list)
        ]
        if all(e is not None for e in entries):
            if count is not None and len(entries) != count:
                errs.append(f"sensors.noise: has {len(entries)} entries, sensors.count is {count}")
            else:
                noise = NoiseModel(sensors=tuple(entries))
    return fusion, noise


def _parse_attack(raw, fusion, errs):
    obj = raw.get("attack", {"kind": "none"})
    if not isinstance(obj, dict):
        errs.append("attack: expected an object")
        return None
    _check_keys(obj, ("kind", "max_attacked", "sensors", "value"), "attack", errs)
    kind = obj.get("kind")
    if kind not in ATTACK_KINDS:
        errs.append(f"attack.kind: expected one of {ATTACK_KINDS}, got {kind!r}")
        return None
    if kind == "none":
        return AttackSchedule(kind="none")
    default_q = fusion.max_attacked if fusion is not None else None
    q = _integer(obj, "max_attacked", "attack", errs, minimum=0, default=default_q)
    kwargs = {"kind": kind, "max_attacked": q if q is not None else 0}
    if kind == "fixed-set":
        sensors = obj.get("sensors")
        if not isinstance(sensors, list) or not sensors:
            errs.append("attack.sensors: fixed-set attack needs a nonempty sensor list")
            return None
        kwargs["fixed_set"] = tuple(sensors)
        if q is None:
            kwargs["max_attacked"] = len(sensors)
    value = obj.get("value", {"kind": "gaussian", "mean": 0.0, "std": 1.0})
    if not isinstance(value, dict):
        errs.append("attack.value: expected an object")
        return None
    _check_keys(value, ("kind", "mean", "std", "value"), "attack.value", errs)
    vkind = value.get("kind", "gaussian")
    if vkind == "gaussian":
        kwargs["value_kind"] = "gaussian"
        kwargs["value_mean"] = _number(value, "mean", "attack.value", errs, default=0.0)
        kwargs["value_std"] = _number(value, "std", "attack.value", errs, default=1.0)
    elif vkind == "constant":
        kwargs["value_kind"] = "constant"
        kwargs["value_mean"] = _number(value, "value", "attack.value", errs, required=True, default=0.0)
    else:
        errs.append(f"attack.value.kind: expected 'gaussian' or 'constant', got {vkind!r}")
        return None
    try:
        return AttackSchedule(**kwargs)
    except ValueError as e:
        errs.append(f"attack: {e}")
        return None


def _parse_truth(raw, errs):
    obj = raw.get("ground_truth")
    if not isinstance(obj, dict):
        errs.append("ground_truth: section is required and must be an object")
        return None
    _check_keys(obj, ("kind", "offset", "amplitude", "angular_frequency"), "ground_truth", errs)
    kind = obj.get("kind")
    if kind not in TRUTH_KINDS:
        errs.append(f"ground_truth.kind: expected one of {TRUTH_KINDS}, got {kind!r}")
        return None
    return GroundTruth(
        kind=kind,
        offset=_number(obj, "offset", "ground_truth", errs, default=0.0),
        amplitude=_number(obj, "amplitude", "ground_truth", errs, default=0.0),
        angular_frequency=_number(obj, "angular_frequency", "ground_truth", errs, default=1.0),
    )


def _parse_time(raw, errs):
    obj = raw.get("time")
    if not isinstance(obj, dict):
        errs.append("time: section is required and must be an object")
        return None
    _check_keys(obj, ("start", "stop", "dt"), "time", errs)
    start = _number(obj, "start", "time", errs, required=True)
    stop = _number(obj, "stop", "time", errs, required=True)
    dt = _number(obj, "dt", "time", errs, required=True)
    if None in (start, stop, dt):
        return None
    try:
        return TimeGrid(start=start, stop=stop, dt=dt)
    except ValueError as e:
        errs.append(str(e))
        return None


def _parse_platoon(raw, errs):
    obj = raw.get("platoon")
    if obj is None:
        return None, None
    if not isinstance(obj, dict):
        errs.append("platoon: expected an object")
        return None, None
    _check_keys(
        obj,
        ("vehicles", "headway", "engine_lag", "standstill", "gains", "hinf_gain", "state_ceiling"),
        "platoon",
        errs,
    )
    gains = obj.get("gains", {})
    if not isinstance(gains, dict):
        errs.append("platoon.gains: expected an object")
        gains = {}
    _check_keys(gains, ("k_p", "k_d", "k_dd"), "platoon.gains", errs)
    kwargs = {
        "vehicles": _integer(obj, "vehicles", "platoon", errs, required=True, minimum=2),
        "headway": _number(obj, "headway", "platoon", errs, required=True),
        "engine_lag": _number(obj, "engine_lag", "platoon", errs, required=True),
        "standstill": _number(obj, "standstill", "platoon", errs, default=2.0),
    }
    for g in ("k_p", "k_d", "k_dd"):
        if g in gains:
            v = _number(gains, g, "platoon.gains", errs)
            if v is not None:
                kwargs[g] = v
    if "hinf_gain" in obj:
        kwargs["hinf_gain"] = _number(obj, "hinf_gain", "platoon", errs)
    ceiling = _number(obj, "state_ceiling", "platoon", errs) if "state_ceiling" in obj else None
    if ceiling is not None and ceiling <= 0:
        errs.append(f"platoon.state_ceiling: must be > 0, got {ceiling}")
        ceiling = None
    if any(v is None for v in kwargs.values()):
        return None, ceiling
    try:
        return PlatoonParams(**kwargs), ceiling
    except ValueError as e:
        errs.append(f"platoon: {e}")
        return None, ceiling


def _parse_reference_input(raw, errs):
    obj = raw.get("reference_input")
    if obj is None:
        return None
    if not isinstance(obj, dict):
        errs.append("reference_input: expected an object")
        return None
    _check_keys(obj, ("times", "values"), "reference_input", errs)
    times = obj.get("times")
    values = obj.get("values")
    if not isinstance(times, list) or not isinstance(values, list):
        errs.append("reference_input: times and values must be lists")
        return None
    try:
        return InputSchedule(times=tuple(times), values=tuple(values))
    except (TypeError, ValueError) as e:
        errs.append(f"reference_input: {e}")
        return None


def _parse_channel_noise(raw, errs):
    obj = raw.get("channel_noise")
    if obj is None:
        return None
    if not isinstance(obj, dict):
        errs.append("channel_noise: expected an object")
        return None
    _check_keys(obj, ("velocity", "acceleration", "input"), "channel_noise", errs)
    kwargs = {}
    for key in ("velocity", "acceleration", "input"):
        if key in obj:
            entry = _parse_noise_entry(obj[key], f"channel_noise.{key}", errs)
            if entry is not None:
                kwargs[key] = entry
    return ChannelNoise(**kwargs)


_TOP_LEVEL_KEYS = (
    "experiment",
    "seed",
    "sensors",
    "attack",
    "ground_truth",
    "time",
    "window_size",
    "reference_policy",
    "trials",
    "inner",
    "platoon",
    "reference_input",
    "channel_noise",
    "negate_platoon_input",
    "emit_all_spreads",
)


def parse_config(source) -> ScenarioConfig:
    """Validate a scenario from a JSON file path or a dict.

    Raises ConfigError carrying every problem found; returns a frozen
    ScenarioConfig otherwise.
    """
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as e:
            raise ConfigError([f"cannot read config file: {e}"]) from e
        except json.JSONDecodeError as e:
            raise ConfigError([f"config file is not valid JSON: {e}"]) from e
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ConfigError([f"config root must be a JSON object, got {type(raw).__name__}"])

    errs: list[str] = []
    _check_keys(raw, _TOP_LEVEL_KEYS, "config", errs)

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        errs.append(f"experiment: expected one of {EXPERIMENTS}, got {experiment!r}")
    seed = _integer(raw, "seed", "config", errs, required=True, minimum=0)
    fusion, noise = _parse_sensors(raw, errs)
    attack = _parse_attack(raw, fusion, errs)
    truth = _parse_truth(raw, errs)
    time = _parse_time(raw, errs)
    window_size = _integer(raw, "window_size", "config", errs, default=10, minimum=1)
    trials = _integer(raw, "trials", "config", errs, default=100, minimum=1)
    policy = raw.get("reference_policy", "lowest-index")
    if policy not in REFERENCE_POLICIES:
        errs.append(f"reference_policy: expected one of {REFERENCE_POLICIES}, got {policy!r}")
    platoon, ceiling = _parse_platoon(raw, errs)
    reference_input = _parse_reference_input(raw, errs)
    channel_noise = _parse_channel_noise(raw, errs)
    negate = _boolean(raw, "negate_platoon_input", "config", errs)
    emit_spreads = _boolean(raw, "emit_all_spreads", "config", errs)

    inner = raw.get("inner")
    if experiment == "montecarlo":
        if inner not in EXPERIMENTS or inner == "montecarlo":
            errs.append(
                "inner: montecarlo needs an inner experiment, one of "
                f"{tuple(e for e in EXPERIMENTS if e != 'montecarlo')}, got {inner!r}"
            )
    elif inner is not None:
        errs.append("inner: only meaningful when experiment is 'montecarlo'")

    effective = inner if experiment == "montecarlo" else experiment
    if attack is not None and fusion is not None and attack.kind != "none":
        if attack.max_attacked > fusion.max_attacked:
            errs.append(
                f"attack.max_attacked = {attack.max_attacked} exceeds the fusion budget "
                f"sensors.max_attacked = {fusion.max_attacked}"
            )
        try:
            attack.validate_bank(fusion.n_sensors)
        except ValueError as e:
            errs.append(f"attack: {e}")
    if effective in ("detect", "isolate") and noise is not None:
        try:
            noise.known_bounds()
        except ValueError as e:
            errs.append(f"sensors.noise: {e}")
    if truth is not None:
        if effective == "platoon" and truth.kind != "from-platoon":
            errs.append(
                "ground_truth.kind: the platoon experiment measures live spacing, use 'from-platoon'"
            )
        if effective != "platoon" and truth.kind == "from-platoon":
            errs.append("ground_truth.kind: 'from-platoon' only makes sense for the platoon experiment")
    if effective == "platoon" and platoon is None and not any(e.startswith("platoon") for e in errs):
        errs.append("platoon: section is required for the platoon experiment")

    if errs:
        raise ConfigError(errs)
    return ScenarioConfig(
        experiment=experiment,
        seed=seed,
        fusion=fusion,
        noise=noise,
        attack=attack,
        ground_truth=truth,
        time=time,
        window_size=window_size,
        reference_policy=policy,
        trials=trials,
        inner=inner,
        platoon=platoon,
        reference_input=reference_input,
        channel_noise=channel_noise,
        negate_platoon_input=negate,
        emit_all_spreads=emit_spreads,
        state_ceiling=ceiling,
    )


def available_presets() -> list[str]:
    root = resources.files("fusionguard").joinpath("presets")
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    """Raw dict of a shipped preset, by bare name (e.g. 'example1')."""
    path = resources.files("fusionguard").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise KeyError(f"no preset named {name!r}; available: {', '.join(available_presets())}")
    return json.loads(path.read_text())


def preset_path(name: str) -> str:
    """Filesystem path of a shipped preset, for handing to the CLI."""
    path = resources.files("fusionguard").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise KeyError(f"no preset named {name!r}; available: {', '.join(available_presets())}")
    return str(path)


__all__ = [
    "EXPERIMENTS",
    "REFERENCE_POLICIES",
    "ConfigError",
    "ScenarioConfig",
    "TimeGrid",
    "available_presets",
    "load_preset",
    "parse_config",
    "preset_path",
]
