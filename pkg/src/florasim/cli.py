"""``florasim`` command line: simulate, benchmark, braid compilation and rendering.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 benchmark failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .braid import build_layout, compile_program, execute_schedule, parse_program, read_schedule, trace_to_word, verify_schedule, write_schedule
from .config import ScenarioConfig, config_digest, config_from_dict, parse_config, serialize_config
from .engine import iterate, log_header, metrics_from_records, evaluate_benchmark, RunLog
from .errors import (
    ConfigError,
    FlorasimError,
    LayoutError,
    MalformedLine,
    ProgramLayoutMismatch,
    ScaffoldError,
    ScheduleFormatError,
    UnroutableSplit,
)
from .render import RenderOptions, render_svg
from .runlog import read_log, write_log
from .scenarios import benchmark_config

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_BENCHMARK = 0, 1, 2, 3
SEED_ENV = "FLORASIM_SEED"
_INVALID = (ConfigError, LayoutError, ProgramLayoutMismatch, UnroutableSplit, ScheduleFormatError, MalformedLine, ScaffoldError)


class UsageError(Exception):
    pass


def load_config(path: str | None, seed: int | None = None, ticks: int | None = None) -> ScenarioConfig:
    """Config file (or the built-in benchmark) with command-line overrides.

    Seed precedence: ``--seed``, then the file, then ``FLORASIM_SEED``,
    then the default.
    """
    if path is None:
        config, explicit_seed = benchmark_config(), True
    else:
        text = Path(path).read_text(encoding="utf-8")
        config = parse_config(text)
        explicit_seed = "seed" in json.loads(text)
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    elif not explicit_seed and os.environ.get(SEED_ENV):
        try:
            changes["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(SEED_ENV, "must be an integer") from None
    if ticks is not None:
        changes["ticks"] = ticks
    return config.with_overrides(**changes) if changes else config


def _simulate(config: ScenarioConfig, out: Path, snapshot_every: int | None):
    out.mkdir(parents=True, exist_ok=True)
    records, world = [], None
    for world, rec in iterate(config):
        records.append(rec)
        if snapshot_every and rec["tick"] % snapshot_every == 0:
            (out / f"snapshot-{rec['tick']:06d}.svg").write_text(render_svg(world, config.regions), encoding="utf-8")
    log = RunLog(log_header(config), tuple(records))
    metrics = metrics_from_records(records, config)
    result = evaluate_benchmark(metrics, config)
    (out / "run.jsonl").write_text(write_log(log), encoding="utf-8")
    (out / "config.json").write_text(serialize_config(config), encoding="utf-8")
    (out / "final.svg").write_text(render_svg(world, config.regions), encoding="utf-8")
    summary = {"config_digest": config_digest(config), "seed": config.seed, "ticks": config.ticks, **result.to_dict()}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return result


def cmd_simulate(args) -> int:
    config = load_config(args.config, args.seed, args.ticks)
    result = _simulate(config, Path(args.out), args.snapshot_every)
    print(f"simulated {config.ticks} ticks; window clear: {result.window_clear}; repair tick: {result.repair_tick}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = load_config(args.config, args.seed)
    result = _simulate(config, Path(args.out), None)
    status = "PASSED" if result.passed else "FAILED"
    print(f"benchmark {status}: window violations {result.window_violations}, repair-completed-tick {result.repair_tick}")
    return EXIT_OK if result.passed else EXIT_BENCHMARK


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def cmd_compile_braid(args) -> int:
    layout = build_layout(_read_json(args.layout))
    schedule = compile_program(parse_program(_read_json(args.program)), layout)
    Path(args.out).write_text(write_schedule(schedule), encoding="utf-8")
    print(f"compiled {len(schedule)} ticks")
    return EXIT_OK


def cmd_verify_schedule(args) -> int:
    layout = build_layout(_read_json(args.layout))
    schedule = read_schedule(Path(args.schedule).read_text(encoding="utf-8"))
    report = verify_schedule(schedule, layout)
    sys.stdout.write(report.to_text())
    if report.valid and args.word:
        print(trace_to_word(execute_schedule(schedule, layout)))
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_render(args) -> int:
    log = read_log(Path(args.log).read_text(encoding="utf-8"))
    config = config_from_dict(log.header["config"])
    if config_digest(config) != log.header.get("config_digest"):
        raise MalformedLine(1, "config digest does not match the embedded config")
    if not 0 <= args.tick < len(log.records):
        raise UsageError(f"tick {args.tick} is outside the logged range 0..{len(log.records) - 1}")
    world = None
    for world, rec in iterate(config, args.tick + 1):
        pass
    if json.loads(json.dumps(rec)) != log.records[args.tick]:
        print(f"error: replay diverges from the log at tick {args.tick}", file=sys.stderr)
        return EXIT_RUNTIME
    Path(args.out).write_text(render_svg(world, config.regions, RenderOptions(plane=args.plane)), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="florasim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its log, summary and snapshots")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int)
    p.add_argument("--snapshot-every", type=int, metavar="M")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compile-braid", help="compile a braid program into a carrier schedule")
    p.add_argument("--program", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile_braid)

    p = sub.add_parser("verify-schedule", help="check a carrier schedule for collisions")
    p.add_argument("--schedule", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--word", action="store_true", help="also print the braid word of a valid schedule")
    p.set_defaults(func=cmd_verify_schedule)

    p = sub.add_parser("benchmark", help="run the windowed-wall self-repair benchmark")
    p.add_argument("--config", help="scenario file (default: built-in windowed wall)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("render", help="replay a run log to a tick and draw it as SVG")
    p.add_argument("--log", required=True)
    p.add_argument("--tick", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plane", default="xz", choices=("xz", "xy", "yz"))
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (*_INVALID, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FlorasimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
