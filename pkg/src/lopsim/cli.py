"""Command-line entry points for the experiment runners.

Subcommands mirror the runner operations: truth-table, fringe, hom,
three-photon-scan, chsh, calibrate, and run for a scenario file. Exit code 0
means every requested run completed with its invariants intact; 1 flags a
tripped invariant (for instance a fit that did not converge); 2 flags a
configuration problem.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError
from .runner import (
    DEFAULT_CALIBRATION_TARGET,
    DEFAULT_PAIR_OVERLAP,
    RunArtifacts,
    calibrate_overlaps,
    execute,
    load_scenario,
    parse_scenario,
    to_csv,
    to_json,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lopsim",
        description=(
            "Desk-scale simulator of a post-selected linear-optical CNOT "
            "gate operating in the coincidence basis"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="sampling seed")
        p.add_argument("--trials", type=int, default=None, help="trials per setting")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument(
            "--exact", action="store_true", help="exact probabilities (default)"
        )
        mode.add_argument("--sampled", action="store_true", help="sampled counts")
        p.add_argument(
            "--preset",
            choices=("cnot1a", "cnot2a", "encoder", "dcnot"),
            default="cnot1a",
        )
        p.add_argument(
            "--overlaps",
            default="ideal",
            help="'ideal', 'paper-like', or a JSON file with pairwise overlaps",
        )
        p.add_argument("--output", default=None, help="write to this path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    for name in ("truth-table", "fringe", "hom", "three-photon-scan", "chsh"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        add_common(p)
        if name == "fringe":
            p.add_argument("--points", type=int, default=None)
            p.add_argument("--theta-c", type=float, default=None)
            p.add_argument(
                "--free-period",
                action="store_true",
                help="fit the fringe period instead of pinning it to 180 degrees",
            )

    run_p = sub.add_parser("run", help="run a scenario file")
    run_p.add_argument("scenario", help="path to a scenario JSON document")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--trials", type=int, default=None)
    mode = run_p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--sampled", action="store_true")
    run_p.add_argument("--output", default=None)
    run_p.add_argument("--format", choices=("csv", "json"), default="csv")

    cal_p = sub.add_parser(
        "calibrate",
        help="solve for the target-photon overlap matching a fringe visibility",
    )
    cal_p.add_argument(
        "--target", type=float, default=DEFAULT_CALIBRATION_TARGET,
        help="three-photon fringe visibility to reproduce",
    )
    cal_p.add_argument(
        "--pair-overlap", type=float, default=DEFAULT_PAIR_OVERLAP,
        help="fixed overlap between the photon-pair photons",
    )
    cal_p.add_argument("--output", default=None)
    return parser


def _overlaps_spec(value: str):
    if value in ("ideal", "paper-like"):
        return value
    with open(value, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _scenario_from_args(args: argparse.Namespace) -> dict:
    raw: dict = {
        "experiment": args.command,
        "preset": args.preset,
        "sources": {"overlaps": _overlaps_spec(args.overlaps)},
        "sweep": {},
        "counting": {},
    }
    if args.command in ("truth-table", "fringe", "chsh"):
        raw["sources"]["target"] = {"kind": "weak-coherent"}
    else:
        raw["sources"]["target"] = {"kind": "single"}
    if args.command == "fringe":
        if args.points is not None:
            raw["sweep"]["points"] = args.points
        if args.theta_c is not None:
            raw["sweep"]["theta_c"] = args.theta_c
        if args.free_period:
            raw["sweep"]["free_period"] = True
    return raw


def _apply_mode_flags(raw: dict, args: argparse.Namespace) -> dict:
    if getattr(args, "sampled", False):
        raw["mode"] = "sampled-counts"
    elif getattr(args, "exact", False):
        raw["mode"] = "exact-probabilities"
    if getattr(args, "seed", None) is not None:
        raw.setdefault("counting", {})["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        raw.setdefault("counting", {})["trials_per_setting"] = args.trials
    return raw


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit(artifacts: RunArtifacts, args: argparse.Namespace) -> int:
    text = to_csv(artifacts) if args.format == "csv" else to_json(artifacts)
    _write(text, args.output)
    return 0 if artifacts.summary.get("invariants_ok", True) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "calibrate":
            overlaps = calibrate_overlaps(args.target, args.pair_overlap)
            text = json.dumps(
                {"".join(k): v for k, v in (("AC", overlaps["AC"]),
                                            ("AT", overlaps["AT"]),
                                            ("CT", overlaps["CT"]))},
                indent=2,
                sort_keys=True,
            ) + "\n"
            _write(text, args.output)
            return 0
        if args.command == "run":
            scenario = load_scenario(args.scenario)
            raw = _apply_mode_flags(dict(scenario.raw), args)
            scenario = parse_scenario(raw)
        else:
            raw = _apply_mode_flags(_scenario_from_args(args), args)
            scenario = parse_scenario(raw)
        return _emit(execute(scenario), args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
