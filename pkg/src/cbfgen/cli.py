"""Command-line front end.

    cbfgen run SPEC [--out DIR] [--parallel N] [--seed U64]
    cbfgen verify --oracle [--mutate-constraint-sign]

``run`` executes every filter in the experiment spec and writes CSV and JSON
artifacts; exit code 0 on success, 1 if any run failed (stalls are failures
only under the abort stall policy), 2 on a bad spec file. ``verify`` runs the
built-in property checks and exits 0 only when all pass.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ProtocolError, RemoteError, SpecValidationError
from .experiment import load_spec, run_experiment
from .verification import run_verification


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        spec = load_spec(args.spec, seed_override=args.seed)
    except SpecValidationError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    except (RemoteError, ProtocolError) as exc:
        print(f"bridge endpoint check failed: {exc}", file=sys.stderr)
        return 2
    parallel = args.parallel if args.parallel else (os.cpu_count() or 1)
    outcome = run_experiment(spec, args.out, parallel=parallel)
    for line in outcome.summary_lines:
        print(line)
    if outcome.failed:
        for label, fails in outcome.failures.items():
            for sample, reason in sorted(fails.items()):
                print(f"FAILED {label} sample {sample}: {reason}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    if not args.oracle:
        print("nothing to verify (pass --oracle)", file=sys.stderr)
        return 2
    results = run_verification(mutate_constraint_sign=args.mutate_constraint_sign)
    all_passed = True
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail}")
        all_passed = all_passed and result.passed
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbfgen",
        description="Barrier-filtered text generation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment spec")
    run_p.add_argument("spec", help="path to the experiment spec JSON file")
    run_p.add_argument("--out", default="out", help="artifact output directory")
    run_p.add_argument(
        "--parallel", type=int, default=0,
        help="worker threads per batch (default: number of processors)",
    )
    run_p.add_argument(
        "--seed", type=int, default=None,
        help="override the spec's base seed",
    )
    run_p.set_defaults(func=_cmd_run)

    verify_p = sub.add_parser("verify", help="run the built-in property checks")
    verify_p.add_argument(
        "--oracle", action="store_true",
        help="run brute-force oracle equivalence and invariant checks",
    )
    verify_p.add_argument(
        "--mutate-constraint-sign", action="store_true",
        help="sanity hook: flip the barrier inequality and expect a failure",
    )
    verify_p.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
