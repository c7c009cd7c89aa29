"""Command-line entry point.

Run a scenario file or a built-in preset and write CSV/JSON curves, or run
the randomized self-check suite.  Exit codes: 0 success, 1 failed
invariants (self-check failures, or sandwich violations under --strict),
2 bad usage or invalid configuration.
"""

import argparse
import sys

from . import __version__
from .harness import load_scenario, preset_scenarios, run_scenario, selfcheck, write_result


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bellfid",
        description="Certified fidelity bounds for Bell-type qudit states.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", metavar="PATH", help="scenario JSON file to run")
    source.add_argument("--preset", choices=("fig1", "fig2", "fig3"), help="built-in scenario set")
    source.add_argument("--selfcheck", action="store_true", help="run the randomized invariant suite")
    parser.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    parser.add_argument("--strict", action="store_true", help="fail on any sandwich violation")
    parser.add_argument("--seed", type=int, default=None, metavar="N", help="base seed for sampling / selfcheck")
    parser.add_argument("--shots", type=int, default=None, metavar="N", help="finite-shot sampling per table")
    parser.add_argument("--trials", type=int, default=200, metavar="N", help="selfcheck trial count (default: 200)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.shots is not None and args.shots < 1:
        parser.error(f"--shots must be >= 1, got {args.shots}")

    if args.selfcheck:
        counts = selfcheck(seed=0 if args.seed is None else args.seed, trials=args.trials)
        failed = 0
        for name, (passed, total) in counts.items():
            print(f"{name}: {passed}/{total} passed")
            failed += total - passed
        print("selfcheck", "ok" if failed == 0 else f"FAILED ({failed} checks)")
        return 0 if failed == 0 else 1

    try:
        scenarios = preset_scenarios(args.preset) if args.preset else [load_scenario(args.scenario)]
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    violations = 0
    for scenario in scenarios:
        try:
            result = run_scenario(scenario, shots=args.shots, seed=args.seed)
        except ValueError as exc:
            print(f"error: {scenario.name}: {exc}", file=sys.stderr)
            return 1
        csv_path, _ = write_result(result, args.out)
        note = "" if result.ok else f"  ({result.violations} sandwich violations)"
        print(f"wrote {csv_path} ({len(result.rows)} rows){note}")
        violations += result.violations

    if violations and args.strict:
        print(f"error: {violations} rows violate the bound sandwich", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
