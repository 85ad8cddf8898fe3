"""Command-line interface.

Stage-oriented subcommands over one scenario file::

    olmsim simulate --config scenario.json --out runs/demo
    olmsim estimate did --config scenario.json --out runs/demo
    olmsim run --config scenario.json --out runs/demo --seed 11

``--config builtin:demo`` (the default) loads the bundled demonstration
scenario. Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .errors import NumericError, OlmsimError, PipelineError, ValidationError
from .pipeline import DEFAULT_ALPHA, DEFAULT_CALIPER, run_pipeline, selftest

BUILTIN_DEMO = "builtin:demo"


def _resolve_config(token: str) -> Path:
    if token == BUILTIN_DEMO:
        return Path(str(resources.files("olmsim").joinpath("data/demo_scenario.json")))
    return Path(token)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=BUILTIN_DEMO,
                        help=f"scenario JSON path (default: {BUILTIN_DEMO})")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="significance level")
    parser.add_argument("--caliper", type=float, default=DEFAULT_CALIPER,
                        help="matching caliper on the propensity scale")
    parser.add_argument("--bounds", type=float, default=None,
                        help="TOST equivalence bound (default: 0.36 x outcome SD)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="olmsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("simulate", "write the panel, demand series, and comparative-statics tables"),
        ("match", "run propensity matching and write balance tables"),
        ("tost", "pre-trend equivalence tests from the event-study fits"),
        ("run", "run every stage"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("estimate", help="fit one family of regressions")
    p.add_argument("kind", choices=["did", "event", "dual", "demand"])
    _add_common(p)

    p = sub.add_parser("report", help="write the quadrant classification report")
    p.add_argument("kind", choices=["quadrant"])
    _add_common(p)

    sub.add_parser("selftest", help="run fast internal consistency checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if selftest() else 3

    stages = {
        "simulate": ["simulate"],
        "match": ["match"],
        "estimate": None,  # filled below
        "tost": ["tost"],
        "report": ["report"],
        "run": None,
    }[args.command]
    if args.command == "estimate":
        stages = [f"estimate_{args.kind}"]

    try:
        manifest = run_pipeline(
            _resolve_config(args.config),
            args.out,
            seed=args.seed,
            stages=stages,
            alpha=args.alpha,
            caliper=args.caliper,
            bounds=args.bounds,
        )
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, ValidationError) else 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OlmsimError as exc:  # pragma: no cover - catch-all for new subtypes
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest.outputs)} files to {args.out} (manifest {manifest.manifest_hash[:12]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
