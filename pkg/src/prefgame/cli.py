"""Command-line entry point: ``prefgame run | nash | plot``.

Exit codes: 0 success, 1 validation error, 2 solver or runtime error,
3 I/O error.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, DimensionError, DomainError, PrefGameError, SolverError
from .games import PreferenceModel, RegularizedGame, duality_gap, solve_nash, solve_regularized_nash
from .metrics import RecordIOError, execute, read_csv, read_json, write_csv, write_json
from .plot import simplex_svg
from .simplex import as_policy, uniform
from .solvers import SolverConfig

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _data_file(*parts):
    return resources.files("prefgame").joinpath("data", *parts)


def load_schema():
    return json.loads(_data_file("experiment.schema.json").read_text())


def bundled_config(name):
    """Path of a bundled config such as ``appendix_e.json``."""
    return Path(str(_data_file("configs", name)))


def _resolve_config(path):
    p = Path(path)
    if p.exists() or p.is_absolute() or len(p.parts) > 1:
        return p
    bundled = bundled_config(p.name)
    return bundled if bundled.exists() else p


class Experiment:
    """A validated experiment file: game, solver configs, output settings."""

    def __init__(self, model, runs, output_dir, emit):
        self.model = model
        self.runs = runs
        self.output_dir = output_dir
        self.emit = emit

    @classmethod
    def load(cls, path):
        path = _resolve_config(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise RecordIOError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(raw, base=Path(path).parent, source=str(path))

    @classmethod
    def from_dict(cls, raw, base=Path("."), source="<config>"):
        try:
            jsonschema.validate(raw, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
            raise ConfigError(f"{source}: field {where}: {exc.message}") from exc
        game = raw["game"]
        try:
            if isinstance(game, str):
                model = PreferenceModel.load(base / game)
            else:
                model = PreferenceModel.from_dict(game)
        except OSError as exc:
            raise RecordIOError(f"cannot read game file {base / game}: {exc}") from exc
        runs = []
        for i, r in enumerate(raw["runs"]):
            try:
                cfg = SolverConfig.from_dict(r)
            except (ConfigError, DomainError, DimensionError) as exc:
                raise ConfigError(f"{source}: field runs/{i}: {exc}") from exc
            if len(cfg.initial) != model.n:
                raise ConfigError(f"{source}: field runs/{i}/initial: expected {model.n} entries")
            runs.append(cfg)
        out = raw.get("output_dir", "out")
        return cls(model, runs, base / out, set(raw.get("emit", ["csv", "json"])))


def _execute_one(model, config):
    try:
        return execute(model, config), None
    except PrefGameError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_experiment(exp, out_dir, jobs=None, formats=("csv", "json")):
    """Execute every run, write records and ``index.json``; return the index entries."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RecordIOError(f"cannot create {out_dir}: {exc}") from exc
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(exp.runs) == 1:
        results = [_execute_one(exp.model, c) for c in exp.runs]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(exp.runs))) as pool:
            results = list(pool.map(_execute_one, [exp.model] * len(exp.runs), exp.runs))
    entries, plotted = [], []
    for cfg, (record, err) in zip(exp.runs, results):
        entry = {"run_id": cfg.run_id, "algorithm": cfg.algorithm, "status": "ok" if err is None else "error"}
        if err is not None:
            entry["error"] = err
            entries.append(entry)
            continue
        files = []
        if "csv" in formats:
            write_csv(record, out_dir / f"{record.run_id}.csv")
            files.append(f"{record.run_id}.csv")
        if "json" in formats:
            write_json(record, out_dir / f"{record.run_id}.json")
            files.append(f"{record.run_id}.json")
        entry["files"] = files
        entry["summary"] = record.summary
        entries.append(entry)
        plotted.append(record)
    if "svg" in exp.emit and plotted and exp.model.n == 3:
        traj = [(r.trajectory.config.algorithm, r.trajectory.policies()) for r in plotted]
        svg = simplex_svg(traj, nash=plotted[0].trajectory.nash_reference)
        _write_text(out_dir / "trajectories.svg", svg)
    _write_text(out_dir / "index.json", json.dumps({"runs": entries}, indent=1) + "\n")
    return entries


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise RecordIOError(f"cannot write {path}: {exc}") from exc


def cmd_run(args):
    exp = Experiment.load(args.config)
    if args.seed is not None:
        exp.runs = [replace(c, seed=args.seed) for c in exp.runs]
    if args.format is not None:
        formats = ("csv", "json") if args.format == "both" else (args.format,)
    else:
        formats = tuple(f for f in ("csv", "json") if f in exp.emit)
    out = Path(args.out) if args.out else exp.output_dir
    entries = run_experiment(exp, out, args.jobs, formats)
    for e in entries:
        if e["status"] == "ok":
            s = e["summary"]
            print(f"{e['run_id']}  {e['algorithm']:<17} gap={s['final_gap']:.3e}  kl={s['final_kl_to_nash']:.3e}")
        else:
            print(f"{e['run_id']}  {e['algorithm']:<17} FAILED {e['error']}", file=sys.stderr)
    return EXIT_OK if all(e["status"] == "ok" for e in entries) else EXIT_SOLVER


def _load_reference(path, n):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise RecordIOError(f"cannot read reference {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if isinstance(raw, dict):
        raw = raw.get("policy")
    ref = as_policy(raw)
    if ref.size != n:
        raise DimensionError(f"reference has {ref.size} entries, game has {n}")
    return ref


def cmd_nash(args):
    try:
        model = PreferenceModel.load(args.game)
    except OSError as exc:
        raise RecordIOError(f"cannot read game file {args.game}: {exc}") from exc
    if args.tau is None:
        res = solve_nash(model)
        out = {"policy": res.policy.tolist(), "duality_gap": res.gap, "method": res.method}
    else:
        ref = _load_reference(args.ref, model.n) if args.ref else uniform(model.n)
        res = solve_regularized_nash(RegularizedGame(model, args.tau, ref))
        out = {
            "policy": res.policy.tolist(),
            "duality_gap": duality_gap(res.policy, model),
            "tau": args.tau,
            "reference": ref.tolist(),
            "method": res.method,
        }
    print(json.dumps(out))
    return EXIT_OK


def _read_trajectory(path):
    path = Path(path)
    if path.suffix == ".json":
        rec = read_json(path)
        return rec.trajectory.config.algorithm, rec.trajectory.policies(), rec.trajectory.nash_reference
    run_id, steps = read_csv(path)
    sibling = path.with_suffix(".json")
    if sibling.exists():
        rec = read_json(sibling)
        label, nash = rec.trajectory.config.algorithm, rec.trajectory.nash_reference
    else:
        label, nash = run_id, None
    return label, np.array([s.policy for s in steps if s.inner_iter == 0]), nash


def cmd_plot(args):
    loaded = [_read_trajectory(p) for p in args.trajectories]
    for (_, pols, _), p in zip(loaded, args.trajectories):
        if pols.shape[1] != 3:
            raise DimensionError(f"{p}: simplex plots support 3 responses only, got {pols.shape[1]}")
    nash = next((nz for _, _, nz in loaded if nz is not None), None)
    _write_text(args.out, simplex_svg([(lab, pols) for lab, pols, _ in loaded], nash=nash))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="prefgame", description="Preference game dynamics experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an experiment config")
    r.add_argument("--config", required=True, help="config path, or the name of a bundled config")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="override the seed of every run")
    r.add_argument("--jobs", type=int, default=None, help="parallel runs (default: logical CPUs)")
    r.add_argument("--format", choices=("csv", "json", "both"))
    r.set_defaults(func=cmd_run)

    n = sub.add_parser("nash", help="print the equilibrium of a game file")
    n.add_argument("game")
    n.add_argument("--tau", type=float, help="solve the regularized game instead")
    n.add_argument("--ref", help="reference policy JSON for --tau (default uniform)")
    n.set_defaults(func=cmd_nash)

    pl = sub.add_parser("plot", help="draw 3-response trajectories as SVG")
    pl.add_argument("trajectories", nargs="+", help="CSV or JSON run records")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DomainError, DimensionError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PrefGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
