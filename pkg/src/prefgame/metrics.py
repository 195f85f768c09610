"""Run summaries and CSV/JSON serialization of trajectories."""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, PrefGameError
from .oracles import RNG_NAME
from .solvers import SolverConfig, Step, ToleranceSchedule, Trajectory, run

WINDOW_FRACTION = 0.1
METRIC_COLUMNS = ("kl_to_nash", "duality_gap", "kl_to_reference")


class RecordIOError(PrefGameError, OSError):
    """Reading or writing a run record failed; the message names the path."""


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    config_echo: dict
    trajectory: Trajectory
    summary: dict


def summarize(traj, wall_time_ms=0.0):
    """Final and minimum statistics over the outer iterates.

    ``min_gap_window`` is the minimum duality gap over the last 10% of
    outer iterates (at least one).
    """
    steps = traj.outer_steps()
    if not steps:
        raise DimensionError("cannot summarize an empty trajectory")
    gaps = np.array([s.duality_gap for s in steps])
    window = max(1, int(math.ceil(WINDOW_FRACTION * len(steps))))
    last = steps[-1]
    return {
        "final_gap": float(last.duality_gap),
        "final_kl_to_nash": float(last.kl_to_nash),
        "final_linf_to_nash": float(np.abs(last.policy - traj.nash_reference).max()),
        "min_gap": float(gaps.min()),
        "min_gap_window": float(gaps[-window:].min()),
        "iterations": len(steps),
        "wall_time_ms": float(wall_time_ms),
    }


def config_echo(config):
    echo = config.to_dict()
    echo["rng"] = RNG_NAME
    return echo


def config_from_echo(echo):
    echo = dict(echo)
    echo.pop("rng", None)
    return SolverConfig.from_dict(echo)


def execute(model, config, nash=None):
    """Run ``config`` on ``model`` and wrap the trajectory in a timed record."""
    start = time.perf_counter()
    traj = run(model, config, nash)
    ms = 1e3 * (time.perf_counter() - start)
    return RunRecord(config.run_id, config_echo(config), traj, summarize(traj, ms))


def csv_header(n):
    return ["run_id", "outer_iter", "inner_iter", *(f"p_{i}" for i in range(n)), *METRIC_COLUMNS]


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(record, path):
    steps = record.trajectory.steps
    n = steps[0].policy.size
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(csv_header(n))
            for s in steps:
                w.writerow(
                    [record.run_id, s.outer_iter, s.inner_iter, *map(_fmt, s.policy)]
                    + [_fmt(getattr(s, c)) for c in METRIC_COLUMNS]
                )
    except OSError as exc:
        raise RecordIOError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Return ``(run_id, steps)`` from a file written by :func:`write_csv`."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise RecordIOError(f"cannot read {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    n = len(header) - 3 - len(METRIC_COLUMNS)
    if n < 1 or header != csv_header(n):
        raise RecordIOError(f"{path}: unexpected header {header}")
    steps = []
    run_id = body[0][0] if body else ""
    for row in body:
        vals = [float(x) for x in row[3:]]
        steps.append(Step(int(row[1]), int(row[2]), np.array(vals[:n]), *vals[n:]))
    return run_id, steps


def _info_to_json(info):
    out = {}
    for k, v in info.items():
        out[k] = {"type": "ToleranceSchedule", **asdict(v)} if isinstance(v, ToleranceSchedule) else v
    return out


def _info_from_json(info):
    out = {}
    for k, v in info.items():
        if isinstance(v, dict) and v.get("type") == "ToleranceSchedule":
            v = ToleranceSchedule(**{f: v[f] for f in ("p_sft", "D", "p_min", "c1", "c2", "log_c2")})
        out[k] = v
    return out


def record_to_dict(record):
    traj = record.trajectory
    return {
        "run_id": record.run_id,
        "config_echo": record.config_echo,
        "summary": record.summary,
        "nash_reference": traj.nash_reference.tolist(),
        "info": _info_to_json(traj.info),
        "steps": [
            {
                "outer_iter": s.outer_iter,
                "inner_iter": s.inner_iter,
                "policy": s.policy.tolist(),
                **{c: float(getattr(s, c)) for c in METRIC_COLUMNS},
            }
            for s in traj.steps
        ],
    }


def record_from_dict(d):
    steps = [
        Step(s["outer_iter"], s["inner_iter"], np.array(s["policy"], dtype=np.float64), *(s[c] for c in METRIC_COLUMNS))
        for s in d["steps"]
    ]
    traj = Trajectory(
        config_from_echo(d["config_echo"]), steps, np.array(d["nash_reference"], dtype=np.float64), _info_from_json(d["info"])
    )
    return RunRecord(d["run_id"], d["config_echo"], traj, d["summary"])


def write_json(record, path):
    # json emits repr floats, which round-trip float64 exactly
    try:
        with open(path, "w") as fh:
            json.dump(record_to_dict(record), fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise RecordIOError(f"cannot write {path}: {exc}") from exc


def read_json(path):
    try:
        with open(path) as fh:
            return record_from_dict(json.load(fh))
    except OSError as exc:
        raise RecordIOError(f"cannot read {path}: {exc}") from exc
