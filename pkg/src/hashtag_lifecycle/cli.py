"""Command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 model-convergence failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .episodes import CoverageError, EpisodeError
from .events import ParseError, StreamError, read_events, validate_stream, write_events
from .growth import ArmaxConvergenceError, DesignError
from .pipeline import STAGES, ConfigError, PipelineConfig, load_config, run_pipeline, stage_closure
from .synth import ScenarioError, ScenarioSpec, gen_debate_scenario, standard_scenario

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3

_STAGE_COMMANDS = {s: s for s in STAGES}
_STAGE_COMMANDS["km"] = "fit-survival"
_STAGE_COMMANDS["run"] = "fit-survival"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="JSON or YAML pipeline config")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory")
    p.add_argument("--seed", type=int, metavar="N", default=d, help="seed for simulation and clustering")
    p.add_argument("--with-env", action="store_true", default=argparse.SUPPRESS if suppress else False, help="also fit models with environmental covariates")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hashtag-lifecycle", description="Hashtag lifecycle analytics")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="parse an event file and print stream statistics")
    p.add_argument("input")
    p.add_argument("--format", choices=["jsonl", "csv"])
    _add_globals(p, suppress=True)

    p = sub.add_parser("simulate", help="write a synthetic debate scenario and its ground truth")
    p.add_argument("--scenario", default="standard", help="'standard' or a scenario spec file")
    p.add_argument("--zero-noise", action="store_true")
    _add_globals(p, suppress=True)

    for name in ["detect", "features", "curves", "classify", "fit-growth", "fit-survival", "km", "run"]:
        p = sub.add_parser(name, help=f"run the pipeline through {_STAGE_COMMANDS[name]}" if name != "run" else "run every stage")
        p.add_argument("inputs", nargs="*", help="event files (JSONL or CSV)")
        p.add_argument("--scenario", help="'standard' or a scenario spec file, used instead of inputs")
        p.add_argument("--event-start", help="episode start (epoch seconds or RFC-3339) for inputs without a config")
        p.add_argument("--episode-id", default="e1")
        p.add_argument("--keywords", help="comma-separated relevance keywords")
        p.add_argument("--top-n", type=int, help="tags in the cumulative overlay")
        _add_globals(p, suppress=True)

    p = sub.add_parser("report", help="print the rendered tables of a finished run")
    _add_globals(p, suppress=True)
    return parser


def _scenario_arg(value, seed):
    if value is None:
        return None
    if value == "standard":
        return {"standard": True, "seed": seed}
    return load_config(value)


def _pipeline_config(args) -> PipelineConfig:
    data = load_config(args.config) if args.config else {}
    if args.inputs:
        data["inputs"] = list(args.inputs)
    if args.scenario:
        data["scenario"] = _scenario_arg(args.scenario, args.seed or 0)
    if args.event_start is not None:
        data["episodes"] = [{"episode_id": args.episode_id, "event_start": args.event_start}]
    if args.keywords:
        data["keywords"] = [k.strip() for k in args.keywords.split(",") if k.strip()]
    if args.top_n is not None:
        data["top_n"] = args.top_n
    if args.seed is not None:
        data["seed"] = args.seed
    if args.with_env:
        data["with_env"] = True
    if args.out:
        data["out"] = args.out
    data["stages"] = stage_closure(_STAGE_COMMANDS[args.command]) if args.command != "run" else data.get("stages", list(STAGES))
    return PipelineConfig.from_dict(data)


def _cmd_validate(args) -> int:
    stream = read_events(args.input, format=args.format)
    print(validate_stream(stream).render().rstrip("\n"))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = args.seed or 0
    if args.scenario == "standard":
        spec = standard_scenario(seed, zero_noise=args.zero_noise)
    else:
        spec = ScenarioSpec.from_dict(load_config(args.scenario))
    stream, truth = gen_debate_scenario(spec)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    write_events(stream, out / "stream.jsonl")
    (out / "scenario.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "truth.json").write_text(json.dumps(truth.to_json(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(stream)} events to {out / 'stream.jsonl'}")
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    bundle = run_pipeline(cfg)
    for stage, sec in bundle.timings.items():
        print(f"{stage:<13} {sec:8.2f} s", file=sys.stderr)
    if bundle.failure is not None:
        raise bundle.failure
    if args.command in ("fit-growth", "fit-survival", "km", "run"):
        for name, table in bundle.tables.items():
            if args.command == "km" and not name.startswith("persistence"):
                continue
            print(table.render())
    print(f"outputs in {Path(cfg.out)}")
    return EXIT_OK


def _cmd_report(args) -> int:
    tables = sorted(Path(args.out or "out").glob("tables/*.txt"))
    if not tables:
        raise ConfigError(f"no rendered tables under {Path(args.out or 'out') / 'tables'}")
    for p in tables:
        print(p.read_text())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"validate": _cmd_validate, "simulate": _cmd_simulate, "report": _cmd_report}
    try:
        return handlers.get(args.command, _cmd_pipeline)(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArmaxConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ParseError, StreamError, CoverageError, EpisodeError, DesignError, ScenarioError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
