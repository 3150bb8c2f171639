"""Command line front end.

Three subcommands:

* ``smsc run`` executes a scenario file and reports its assertions;
* ``smsc check-policy`` evaluates one request against a policy file;
* ``smsc conflicts`` statically checks a policy file for opposite-effect
  rule pairs that can fire on the same request.

Exit codes: 0 for success (``run``: scenario passed; ``conflicts``: none
found), 1 for a clean negative, 2 for unusable input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .errors import SmscError
from .governance import DomainSpec, detect_conflicts
from .policy import DecisionRequest, evaluate_request, load_policy_document
from .sim import load_scenario, run_scenario


def _cmd_run(args: argparse.Namespace) -> int:
    spec = load_scenario(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    report = run_scenario(spec, log_path=args.log, report_path=args.report)
    for entry in report["assertions"]:
        marker = "ok" if entry["ok"] else "FAIL"
        print(f"[{marker}] {entry['id']}: {entry['detail']}")
    print(f"{'passed' if report['passed'] else 'failed'} "
          f"after {report['finalTick']} ticks")
    return 0 if report["passed"] else 1


def _cmd_check_policy(args: argparse.Namespace) -> int:
    document = load_policy_document(args.policies)
    with open(args.request, "r", encoding="utf-8") as fh:
        request = DecisionRequest.from_wire(json.load(fh))
    decision = evaluate_request(list(document.rules), request)
    print(json.dumps(decision.to_wire(), indent=2, sort_keys=True))
    return 0


def _cmd_conflicts(args: argparse.Namespace) -> int:
    document = load_policy_document(args.policies)
    with open(args.domains, "r", encoding="utf-8") as fh:
        spec = DomainSpec.from_wire(json.load(fh))
    reports = detect_conflicts(list(document.rules), spec)
    print(json.dumps([r.to_wire() for r in reports], indent=2, sort_keys=True))
    return 0 if not reports else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smsc",
        description="Run and inspect self-managed security cell federations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--log", default=None, help="write the event log here")
    run.add_argument("--report", default=None, help="write the report here")
    run.set_defaults(func=_cmd_run)

    check = sub.add_parser("check-policy", help="evaluate one request")
    check.add_argument("--policies", required=True, help="policy JSON file")
    check.add_argument("--request", required=True, help="request JSON file")
    check.set_defaults(func=_cmd_check_policy)

    conflicts = sub.add_parser("conflicts", help="find conflicting rule pairs")
    conflicts.add_argument("--policies", required=True, help="policy JSON file")
    conflicts.add_argument("--domains", required=True,
                           help="finite value universes JSON file")
    conflicts.set_defaults(func=_cmd_conflicts)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SmscError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
