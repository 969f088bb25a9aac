"""Experiment runner: turns a validated config into traces and summaries.

Every experiment writes meta.json (config echo, versions, RNG provenance),
one or more plot-ready CSV traces, and a summary.json. Serialization is
deterministic: sorted keys, no timestamps, repr floats. Reruns with the same
config and seed are byte-identical.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .detection import NoiseBounds, detect_window, detection_thresholds
from .fusion import fuse_series, spread_series, theoretical_error_bound
from .metrics import SignalTrace, bound_violation_report, confusion_stats, lp_norm
from .platoon import simulate_platoon
from .scenario import (
    RNG_ALGORITHM,
    STREAM_CHANNEL,
    STREAM_MEASUREMENT,
    STREAM_REFERENCE,
    STREAMS_PER_TRIAL,
    make_rng_stream,
    sample_measurement_series,
)

STABILITY_TOLERANCE = 0.01


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    summary: dict
    files: dict


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _index_set_label(indices) -> str:
    """Dash-joined 1-based indices; the empty set prints as sensor 0."""
    items = sorted(int(i) for i in indices)
    return "-".join(str(i) for i in items) if items else "0"


# ---------------------------------------------------------------------------
# per-experiment runs
# ---------------------------------------------------------------------------

def _known_sup(cfg):
    try:
        return max(cfg.noise.known_bounds())
    except ValueError:
        return None


def _bounded_noise(cfg) -> bool:
    return all(s.kind in ("uniform", "none") for s in cfg.noise.sensors)


def run_fuse_demo(cfg, trial: int = 0, want_tables: bool = True):
    rng = make_rng_stream(cfg.seed, trial * STREAMS_PER_TRIAL + STREAM_MEASUREMENT)
    series = sample_measurement_series(cfg.time.grid(), cfg.ground_truth, cfg.noise, cfg.attack, rng)
    fused, selected, spreads, subsets = fuse_series(series.values, cfg.fusion)
    error = fused - series.true_values

    violations = []
    summary = {
        "experiment": "fuse-demo",
        "seed": cfg.seed,
        "trial": trial,
        "n_samples": int(series.times.size),
        "mean_abs_fusion_error": float(np.abs(error).mean()),
        "violations": violations,
    }
    sup = _known_sup(cfg)
    if sup is not None:
        report = bound_violation_report(SignalTrace(series.times, error), sup)
        summary.update(
            noise_sup=sup,
            error_bound=report.bound,
            max_abs_fusion_error=report.max_abs_error,
            time_of_max_error=report.time_of_max,
            bound_violations=report.violation_count,
        )
        if report.violation_count and _bounded_noise(cfg):
            violations.append(
                f"fusion error exceeded its worst-case bound {report.bound} "
                f"on {report.violation_count} sample(s)"
            )
    else:
        summary.update(
            noise_sup=None,
            error_bound=None,
            max_abs_fusion_error=float(np.abs(error).max()),
            time_of_max_error=float(series.times[np.abs(error).argmax()]),
            bound_violations=None,
        )

    tables = {}
    if want_tables:
        header = ["t", "d_true", "d_hat", "fusion_error", "sigma"]
        columns = [
            series.times,
            series.true_values,
            fused,
            error,
            ["-".join(map(str, subsets[s])) for s in selected],
        ]
        if cfg.emit_all_spreads:
            all_spreads, _ = spread_series(series.values, cfg.fusion)
            for j, sub in enumerate(subsets):
                header.append("spread_" + "_".join(map(str, sub)))
                columns.append(all_spreads[:, j])
        tables["trace.csv"] = (header, list(zip(*columns)))
    return summary, tables


def run_detect(cfg, trial: int = 0, want_tables: bool = True):
    rng = make_rng_stream(cfg.seed, trial * STREAMS_PER_TRIAL + STREAM_MEASUREMENT)
    series = sample_measurement_series(cfg.time.grid(), cfg.ground_truth, cfg.noise, cfg.attack, rng)
    bounds = NoiseBounds(cfg.noise.known_bounds())
    thresholds = detection_thresholds(bounds)
    reports = detect_window(series.values, thresholds, cfg.window_size, times=series.times)

    deviations = np.abs(series.values.mean(axis=1, keepdims=True) - series.values)
    triggered = deviations > np.asarray(thresholds)
    sample_attacked = (series.attacked_mask & (series.attack_values != 0.0)).any(axis=1)

    n = series.times.size
    window_truth = [
        bool(sample_attacked[w.window_index * cfg.window_size:
                             min((w.window_index + 1) * cfg.window_size, n)].any())
        for w in reports
    ]
    attacked_windows = sum(window_truth)
    hits = sum(1 for w, truth in zip(reports, window_truth) if truth and w.detected)
    false_alarms = sum(1 for w, truth in zip(reports, window_truth) if w.detected and not truth)

    violations = []
    if false_alarms and _bounded_noise(cfg):
        violations.append(
            f"{false_alarms} window(s) detected without any attack while noise honors its bounds"
        )
    summary = {
        "experiment": "detect",
        "seed": cfg.seed,
        "trial": trial,
        "n_samples": int(n),
        "window_size": cfg.window_size,
        "n_windows": len(reports),
        "n_attacked_windows": int(attacked_windows),
        "n_detected_windows": sum(1 for w in reports if w.detected),
        "window_detection_rate": (hits / attacked_windows) if attacked_windows else None,
        "false_alarm_windows": int(false_alarms),
        "thresholds": list(thresholds),
        "per_sensor_trigger_counts": triggered.sum(axis=0).tolist(),
        "windows": [
            {
                "index": w.window_index,
                "detected": w.detected,
                "first_trigger_time": w.first_trigger_time,
                "triggering_sensors": list(w.triggering_sensors),
                "partial": w.partial,
                "attacked": truth,
            }
            for w, truth in zip(reports, window_truth)
        ],
        "violations": violations,
    }

    tables = {}
    if want_tables:
        detected_by_window = {w.window_index: w.detected for w in reports}
        rows = []
        for k in range(n):
            widx = k // cfg.window_size
            rows.append(
                [
                    series.times[k],
                    widx,
                    detected_by_window[widx],
                    _index_set_label(np.nonzero(triggered[k])[0] + 1),
                ]
                + list(deviations[k])
            )
        header = ["t", "window", "window_detected", "triggered"] + [
            f"dev_{i}" for i in range(1, cfg.fusion.n_sensors + 1)
        ]
        tables["trace.csv"] = (header, rows)
    return summary, tables


def run_isolate(cfg, trial: int = 0, want_tables: bool = True):
    rng = make_rng_stream(cfg.seed, trial * STREAMS_PER_TRIAL + STREAM_MEASUREMENT)
    series = sample_measurement_series(cfg.time.grid(), cfg.ground_truth, cfg.noise, cfg.attack, rng)
    bounds = NoiseBounds(cfg.noise.known_bounds())
    fused, selected, _, subsets = fuse_series(series.values, cfg.fusion)

    subs = np.asarray(subsets, dtype=int)
    n = series.times.size
    rows_idx = np.arange(n)
    if cfg.reference_policy == "lowest-index":
        refs = subs[selected, 0]
    else:
        rng_ref = make_rng_stream(cfg.seed, trial * STREAMS_PER_TRIAL + STREAM_REFERENCE)
        picks = rng_ref.integers(subs.shape[1], size=n)
        refs = subs[selected, picks]

    b = np.asarray(bounds.per_sensor)
    thresholds = b[refs - 1][:, None] + b[None, :]
    deviations = np.abs(series.values[rows_idx, refs - 1][:, None] - series.values)
    flags = deviations > thresholds
    flags[rows_idx, refs - 1] = False

    truth_mask = series.attacked_mask & (series.attack_values != 0.0)
    pred_sets = [tuple(np.nonzero(flags[k])[0] + 1) for k in range(n)]
    true_sets = [tuple(np.nonzero(truth_mask[k])[0] + 1) for k in range(n)]
    stats = confusion_stats(pred_sets, true_sets, cfg.fusion.n_sensors)

    attacked_rows = [k for k in range(n) if true_sets[k]]
    isolated_hits = sum(1 for k in attacked_rows if set(true_sets[k]) <= set(pred_sets[k]))
    ref_clean = np.array([refs[k] not in true_sets[k] for k in range(n)])
    fp_clean_ref = int(
        sum(1 for k in range(n) if ref_clean[k] and (set(pred_sets[k]) - set(true_sets[k])))
    )

    violations = []
    if fp_clean_ref and _bounded_noise(cfg):
        violations.append(
            f"{fp_clean_ref} sample(s) blamed a clean sensor from a clean reference "
            "while noise honors its bounds"
        )
    summary = {
        "experiment": "isolate",
        "seed": cfg.seed,
        "trial": trial,
        "n_samples": int(n),
        "reference_policy": cfg.reference_policy,
        "n_attacked_samples": len(attacked_rows),
        "isolation_success_rate": (isolated_hits / len(attacked_rows)) if attacked_rows else None,
        "false_positives_with_clean_reference": fp_clean_ref,
        "per_sensor_isolation_counts": flags.sum(axis=0).tolist(),
        "confusion": {
            "true_positives": stats.true_positives,
            "false_positives": stats.false_positives,
            "true_negatives": stats.true_negatives,
            "false_negatives": stats.false_negatives,
        },
        "violations": violations,
    }

    tables = {}
    if want_tables:
        rows = [
            [
                series.times[k],
                int(refs[k]),
                _index_set_label(pred_sets[k]),
                _index_set_label(true_sets[k]),
                fused[k],
            ]
            for k in range(n)
        ]
        tables["trace.csv"] = (["t", "reference", "isolated", "true_attacked", "d_hat"], rows)
    return summary, tables


def run_platoon(cfg, trial: int = 0, want_tables: bool = True):
    base = trial * STREAMS_PER_TRIAL
    traj = simulate_platoon(
        cfg,
        rng_measurement=make_rng_stream(cfg.seed, base + STREAM_MEASUREMENT),
        rng_channel=make_rng_stream(cfg.seed, base + STREAM_CHANNEL),
    )
    m = traj.n_followers
    times = traj.times
    sup = _known_sup(cfg)
    bound = theoretical_error_bound(sup) if sup is not None else None

    per_vehicle = []
    total_bound_violations = 0
    for i in range(1, m + 1):
        err = traj.fusion_error[:, i - 1]
        entry = {
            "vehicle": i,
            "max_abs_spacing_error": float(np.abs(traj.states[:, i, 0]).max()),
            "max_abs_state": float(np.abs(traj.states[:, i]).max()),
            "velocity_l2_norm": lp_norm(SignalTrace(times, traj.states[:, i, 1]), 2),
            "max_abs_fusion_error": float(np.abs(err).max()),
        }
        if bound is not None:
            count = int((np.abs(err) > bound).sum())
            entry["fusion_bound_violations"] = count
            total_bound_violations += count
        per_vehicle.append(entry)

    noise_free = (
        all(s.kind == "none" for s in cfg.noise.sensors)
        and cfg.attack.kind == "none"
        and (
            cfg.channel_noise is None
            or all(
                ch.kind == "none"
                for ch in (cfg.channel_noise.velocity, cfg.channel_noise.acceleration, cfg.channel_noise.input)
            )
        )
    )
    ratios = []
    for i in range(2, m + 1):
        up = per_vehicle[i - 2]["velocity_l2_norm"]
        down = per_vehicle[i - 1]["velocity_l2_norm"]
        ratios.append(down / up if up else (1.0 if down == 0.0 else float("inf")))
    string_stable = None
    if noise_free:
        string_stable = all(r <= 1.0 + STABILITY_TOLERANCE for r in ratios)

    max_abs_state = max(v["max_abs_state"] for v in per_vehicle)
    max_abs_state = max(max_abs_state, float(np.abs(traj.states[:, 0]).max()))

    violations = []
    if traj.hurwitz_margin >= 0:
        violations.append(
            f"closed loop is not Hurwitz (margin {traj.hurwitz_margin}); boundedness not certified"
        )
    if bound is not None and total_bound_violations and _bounded_noise(cfg):
        violations.append(
            f"in-loop fusion error exceeded its bound {bound} on {total_bound_violations} sample(s)"
        )
    if cfg.state_ceiling is not None and max_abs_state > cfg.state_ceiling:
        violations.append(
            f"state magnitude {max_abs_state} exceeded the declared ceiling {cfg.state_ceiling}"
        )
    if string_stable is False:
        violations.append("velocity norms grow along the string on a noise-free run")

    summary = {
        "experiment": "platoon",
        "seed": cfg.seed,
        "trial": trial,
        "n_samples": int(times.size),
        "vehicles": m,
        "hurwitz_margin": traj.hurwitz_margin,
        "hurwitz_ok": bool(traj.hurwitz_margin < 0),
        "noise_sup": sup,
        "fusion_error_bound": bound,
        "max_abs_fusion_error": float(np.abs(traj.fusion_error).max()),
        "fusion_bound_violations": total_bound_violations if bound is not None else None,
        "max_abs_state": max_abs_state,
        "state_ceiling": cfg.state_ceiling,
        "per_vehicle": per_vehicle,
        "velocity_norm_ratios": ratios,
        "string_stable": string_stable,
        "string_stability_note": (
            "certified on this noise-free run"
            if noise_free
            else "ratios are diagnostics only; certification needs a noise-free run"
        ),
        "violations": violations,
    }

    tables = {}
    if want_tables:
        for i in range(0, m + 1):
            rows = []
            for k in range(times.size):
                e, v, a, u = traj.states[k, i]
                if i == 0:
                    d_true = d_hat = err = float("nan")
                else:
                    d_true = traj.spacing_true[k, i - 1]
                    d_hat = traj.spacing_fused[k, i - 1]
                    err = traj.fusion_error[k, i - 1]
                rows.append([times[k], i, e, v, a, u, d_true, d_hat, err])
            tables[f"trace_vehicle_{i}.csv"] = (
                ["t", "vehicle", "e", "v", "a", "u", "d_true", "d_hat", "fusion_error"],
                rows,
            )
    return summary, tables


_EXPERIMENT_RUNNERS = {
    "fuse-demo": run_fuse_demo,
    "detect": run_detect,
    "isolate": run_isolate,
    "platoon": run_platoon,
}


def montecarlo_summary(cfg, n_trials: int | None = None) -> dict:
    """Repeat the inner experiment over independent RNG streams and aggregate.

    Trial k runs on streams k * STREAMS_PER_TRIAL + {0, 1, 2}, so any single
    trial replays in isolation from the same master seed.
    """
    inner = cfg.inner if cfg.experiment == "montecarlo" else cfg.experiment
    if inner not in _EXPERIMENT_RUNNERS:
        raise ValueError(f"montecarlo cannot wrap experiment {inner!r}")
    trials = n_trials if n_trials is not None else cfg.trials
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    runner = _EXPERIMENT_RUNNERS[inner]

    rows = []
    trial_violations = 0
    for t in range(trials):
        s, _ = runner(cfg, trial=t, want_tables=False)
        row = {"trial": t, "stream_base": t * STREAMS_PER_TRIAL}
        for key, value in s.items():
            if key in ("trial", "seed", "experiment"):
                continue
            if isinstance(value, bool) or value is None:
                row[key] = value
            elif isinstance(value, (int, float, np.integer, np.floating)):
                row[key] = value
        if s["violations"]:
            trial_violations += 1
        row["n_violations"] = len(s["violations"])
        rows.append(row)

    aggregate = {}
    for key in rows[0]:
        if key in ("trial", "stream_base"):
            continue
        values = [r.get(key) for r in rows]
        numeric = [v for v in values if isinstance(v, (int, float)) and not isinstance(v, bool)]
        if len(numeric) == len(values) and numeric:
            aggregate[key] = {
                "mean": float(np.mean(numeric)),
                "min": float(np.min(numeric)),
                "max": float(np.max(numeric)),
            }

    violations = []
    if trial_violations:
        violations.append(f"{trial_violations} of {trials} trials reported invariant violations")
    return {
        "experiment": "montecarlo",
        "inner": inner,
        "seed": cfg.seed,
        "trials": trials,
        "per_trial": rows,
        "aggregate": aggregate,
        "violations": violations,
    }


def run(cfg, out_dir, strict: bool = False, n_trials: int | None = None) -> RunResult:
    """Execute cfg's experiment and write meta.json, traces, summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    meta = {
        "command": cfg.experiment,
        "config": cfg.to_dict(),
        "package": "fusionguard",
        "version": __version__,
        "numpy_version": np.__version__,
        "rng": {
            "algorithm": RNG_ALGORITHM,
            "seeding": "default_rng(SeedSequence(master_seed, spawn_key=(stream_id,)))",
            "master_seed": cfg.seed,
            "streams": {
                "measurement": STREAM_MEASUREMENT,
                "channel": STREAM_CHANNEL,
                "reference": STREAM_REFERENCE,
                "per_trial_stride": STREAMS_PER_TRIAL,
            },
            "attack_values": "redrawn every sample",
        },
    }
    files = {"meta.json": out / "meta.json"}
    write_json(files["meta.json"], meta)

    if cfg.experiment == "montecarlo":
        summary = montecarlo_summary(cfg, n_trials=n_trials)
        tables = {}
    else:
        summary, tables = _EXPERIMENT_RUNNERS[cfg.experiment](cfg, trial=0, want_tables=True)

    for name, (header, rows) in tables.items():
        files[name] = out / name
        write_csv(files[name], header, rows)

    files["summary.json"] = out / "summary.json"
    write_json(files["summary.json"], summary)

    exit_code = 1 if (strict and summary["violations"]) else 0
    return RunResult(exit_code=exit_code, out_dir=out, summary=summary, files=files)


__all__ = [
    "RunResult",
    "montecarlo_summary",
    "run",
    "run_detect",
    "run_fuse_demo",
    "run_isolate",
    "run_platoon",
    "write_csv",
    "write_json",
]
