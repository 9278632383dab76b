"""Command line entry point: ``jobreco {serve,load,simulate,report,bench}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import kernels
from .core import RecoError, RecordError, Surface
from .engine import Engine, EngineConfig
from .experiment import ExperimentConfig, OutcomeLog, report
from .replay import Replay, WorldParams, generate_world


class CliError(Exception):
    pass


def _read_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise CliError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a mapping at the top level")
    return data


def load_config(path) -> EngineConfig:
    return EngineConfig.from_dict(_read_yaml(path)) if path else EngineConfig()


def _ingest(engine: Engine, jobs=None, embeddings=None, interactions=None,
            strict: bool = True) -> dict[str, tuple[int, int]]:
    counts = {}
    for name, path, fn in (("jobs", jobs, engine.load_jobs),
                           ("embeddings", embeddings, engine.load_embeddings),
                           ("interactions", interactions, engine.load_interactions)):
        if path is None:
            continue
        try:
            accepted, rejected = fn(path, strict=strict)
        except RecordError as exc:
            raise CliError(f"{path}:{exc.line}: {exc.detail}") from None
        except OSError as exc:
            raise CliError(f"{path}: {exc.strerror}") from None
        counts[name] = (accepted, len(rejected))
        for err in rejected:
            print(f"{path}:{err.line}: {err.detail}", file=sys.stderr)
    return counts


def cmd_serve(args) -> int:
    import uvicorn

    from .service import Service, create_app

    config = load_config(args.config)
    engine = Engine(config)
    data = Path(args.data) if args.data else None
    if data is not None:
        _ingest(engine, *(p if p.exists() else None for p in
                          (data / "jobs.jsonl", data / "embeddings.jsonl",
                           data / "interactions.jsonl")))
    host, _, port = (args.listen or config.listen).rpartition(":")
    uvicorn.run(create_app(Service(engine)), host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_load(args) -> int:
    engine = Engine(load_config(args.config))
    counts = _ingest(engine, args.jobs, args.embeddings, args.interactions, strict=not args.lenient)
    for name, (ok, bad) in counts.items():
        print(f"{name}: accepted={ok} rejected={bad}")
    if args.dump:
        engine.dump(args.dump)
    return 1 if any(bad for _, bad in counts.values()) else 0


def simulation_setup(args) -> tuple[WorldParams, ExperimentConfig, int, str]:
    spec = _read_yaml(args.config) if args.config else {}
    world = dict(spec.get("world") or {})
    world["seed"] = args.seed
    for key, value in (("job_count", args.jobs), ("user_count", args.users),
                       ("dimension", args.dim)):
        if value is not None:
            world[key] = value
    try:
        params = WorldParams(**world)
    except TypeError as exc:
        raise CliError(f"bad world parameters: {exc}") from None
    exp = dict(spec.get("experiment") or {"experiment_id": "sim", "surface": "homepage",
                                          "arm_a": "BLL", "arm_b": "CF"})
    for key, value in (("surface", args.surface), ("arm_a", args.arm_a),
                       ("arm_b", args.arm_b)):
        if value is not None:
            exp[key] = value
    rounds = args.rounds if args.rounds is not None else int(spec.get("rounds", 10_000))
    latency = args.latency or spec.get("latency", "virtual")
    return params, ExperimentConfig.from_dict(exp), rounds, latency


def cmd_simulate(args) -> int:
    params, exp, rounds, latency = simulation_setup(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    world = generate_world(params, out / "world")
    replay = Replay(world, exp, latency=latency)
    rep = replay.run(rounds)
    (out / "report.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    (out / "report.txt").write_text(rep.to_text() + "\n", encoding="utf-8")
    (out / "daily_ctr.csv").write_text(rep.daily_csv(), encoding="utf-8")
    replay.log.dump_jsonl(out / "outcomes.jsonl")
    (out / "experiment.yaml").write_text(yaml.safe_dump(exp.to_dict(), sort_keys=True),
                                         encoding="utf-8")
    print(rep.to_text())
    return 0


def cmd_report(args) -> int:
    if args.experiment:
        exp = ExperimentConfig.from_dict(_read_yaml(args.experiment))
    else:
        config = load_config(args.config)
        matches = [e for e in config.experiments if e.experiment_id == args.experiment_id]
        if not matches:
            raise CliError(f"no experiment {args.experiment_id!r} in {args.config}")
        exp = matches[0]
    log = OutcomeLog()
    try:
        log.load_jsonl(args.outcomes)
    except RecordError as exc:
        raise CliError(f"{args.outcomes}:{exc.line}: {exc.detail}") from None
    except OSError as exc:
        raise CliError(f"{args.outcomes}: {exc.strerror}") from None
    rep = report(exp, log.snapshot(exp.experiment_id))
    print(rep.to_json() if args.json else rep.to_text())
    if args.csv:
        Path(args.csv).write_text(rep.daily_csv(), encoding="utf-8")
    return 0


def cmd_bench(args) -> int:
    from .bench import run_bench

    backends = list(kernels.BACKENDS) if args.backend == "all" else [args.backend]
    for backend in backends:
        if backend not in kernels.BACKENDS:
            raise CliError(f"kernel backend {backend!r} is not available")
        print(f"# jobs={args.jobs} dim={args.dim} users={args.users} kernels={backend}")
        for row in run_bench(args.jobs, args.dim, args.users, args.requests, args.seed,
                             backend=backend):
            print(row.line())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jobreco", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", help="YAML engine config")
    p.add_argument("--data", help="directory with jobs/embeddings/interactions.jsonl")
    p.add_argument("--listen", help="host:port, overrides the config")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("load", help="validate and ingest JSONL files")
    p.add_argument("--config")
    p.add_argument("--jobs")
    p.add_argument("--embeddings")
    p.add_argument("--interactions")
    p.add_argument("--lenient", action="store_true", help="skip bad lines instead of stopping")
    p.add_argument("--dump", help="write the loaded stores to this directory")
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("simulate", help="generate a world and replay an A/B experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sim-out")
    p.add_argument("--config", help="YAML with 'world', 'experiment', 'rounds' sections")
    p.add_argument("--rounds", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--surface", choices=[s.value for s in Surface])
    p.add_argument("--arm-a")
    p.add_argument("--arm-b")
    p.add_argument("--latency", choices=["virtual", "measured"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="recompute a report from an outcome log")
    p.add_argument("--outcomes", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--experiment", help="YAML file with one experiment")
    group.add_argument("--config", help="engine config holding the experiment")
    p.add_argument("--experiment-id", default="sim")
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", help="also write the daily CTR series here")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="latency percentiles per strategy")
    p.add_argument("--jobs", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--users", type=int, default=5_000)
    p.add_argument("--requests", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", default=kernels.backend,
                   help="compiled, python or all")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, RecoError) as exc:
        msg = exc.message if isinstance(exc, RecoError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
