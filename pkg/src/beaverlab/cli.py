"""Command-line interface: run, score, verify, collatz, enumerate."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import collatz, rules
from .accel import run_accelerated
from .enumerate import SUPPORTED, BudgetExceeded, Kind, busy_beaver
from .expr import ExprError
from .machine import Configuration, MachineFormatError, Status, parse_machine, run_direct

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CUTOFF = 2
EXIT_VERIFY = 3
FULL_DIGITS = 10**5

if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def format_int(value: int) -> str:
    """Full digits up to 10^5 of them, otherwise a leading-digits form."""
    text = str(abs(value))
    sign = "-" if value < 0 else ""
    if len(text) <= FULL_DIGITS:
        return sign + text
    return f"{sign}{text[:20]}...e+{len(text) - 1}"


def _emit(fields: list[tuple[str, object]], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        doc = {k: format_int(v) if isinstance(v, int) and not isinstance(v, bool) else v for k, v in fields}
        out.write(json.dumps(doc, indent=2) + "\n")
        return
    width = max(len(k) for k, _ in fields)
    for key, val in fields:
        if isinstance(val, int) and not isinstance(val, bool):
            val = format_int(val)
        elif isinstance(val, (list, tuple)):
            val = " ".join(map(str, val))
        out.write(f"{key:<{width}}  {val}\n")


# ---------------------------------------------------------------------------


def _load_machine(args: argparse.Namespace):
    if args.builtin:
        return rules.load_builtin(args.builtin).machine
    return parse_machine(Path(args.machine).read_text())


def cmd_run(args: argparse.Namespace) -> int:
    machine = _load_machine(args)
    runner = run_accelerated if args.accelerate else run_direct
    out = runner(machine, Configuration.blank(), args.max_steps)
    _emit(
        [
            ("machine", str(machine)),
            ("status", out.status.value),
            ("steps", out.steps),
            ("sigma", out.sigma),
            ("final", str(out.final)),
        ],
        args.format,
    )
    return EXIT_OK if out.status is Status.HALTED else EXIT_CUTOFF


def _load_ruleset(args: argparse.Namespace) -> rules.Ruleset:
    if args.builtin:
        return rules.load_builtin(args.builtin)
    return rules.parse_ruleset(Path(args.rules).read_text())


def cmd_score(args: argparse.Namespace) -> int:
    rs = _load_ruleset(args)
    try:
        rep = rules.score(rs, max_transitions=args.max_transitions)
    except rules.ScoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CUTOFF
    _emit(
        [
            ("ruleset", rs.name),
            ("machine", str(rs.machine)),
            ("transitions", rep.trace.transitions),
            ("s", rep.s),
            ("s_digits", rep.s_digits),
            ("sigma", rep.sigma),
            ("sigma_digits", rep.sigma_digits),
        ],
        args.format,
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    rs = _load_ruleset(args)
    selected = [r for r in rs.rules if not args.rule or r.id in args.rule]
    rows = []
    ok = True
    for rule in selected:
        k_max = args.exp_k_max if rule.time.exponential else args.k_max
        rep = rules.verify_rule(rs, rule, range(k_max + 1))
        ok &= rep.passed
        failed = [c for c in rep.cases if not c.passed]
        rows.append((rule.id, len(rep.cases), rep.passed, failed[0].detail if failed else ""))
    if args.format == "json":
        doc = [{"rule": r, "cases": str(n), "passed": p, "detail": d} for r, n, p, d in rows]
        print(json.dumps({"ruleset": rs.name, "rules": doc, "passed": ok}, indent=2))
    else:
        for rid, n, passed, detail in rows:
            print(f"{rid:<10} {n:>4} cases  {'pass' if passed else 'FAIL'}  {detail}".rstrip())
        print(f"{rs.name}: {'all rules pass' if ok else 'verification failed'}")
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_start(text: str):
    parts = [int(x) for x in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _load_mapping(name: str):
    if name in collatz.BUILTIN_MAPPINGS:
        return collatz.load_builtin(name)
    return collatz.parse_mapping(Path(name).read_text())


def cmd_collatz(args: argparse.Namespace) -> int:
    mapping = _load_mapping(args.function)
    start = _parse_start(args.start)
    until = _parse_start(args.until) if args.until is not None else None
    if isinstance(mapping, collatz.ExpCollatzMapping):
        if not isinstance(start, int):
            raise UsageError("exponential mappings take a single integer start")
        if args.mode == "residue":
            precision = args.precision
            while True:
                try:
                    traj = collatz.residue_iterate_exponential(mapping, start, args.max_iters, precision)
                    break
                except collatz.PrecisionExhausted:
                    precision *= 2
        else:
            traj = collatz.iterate_exponential(mapping, start, args.max_iters, args.cap_digits)
    else:
        if args.mode == "residue":
            raise UsageError("residue mode needs an exponential mapping")
        traj = collatz.iterate(mapping, start, args.max_iters, until=until)
    fields: list[tuple[str, object]] = [
        ("function", args.function),
        ("start", args.start),
        ("mode", args.mode),
        ("status", traj.status.value),
        ("iterations", traj.iterations),
        ("h", traj.h if traj.h is not None else "-"),
    ]
    if traj.cycle_length is not None:
        fields.append(("cycle_length", traj.cycle_length))
    if traj.branches:
        fields.append(("branches", traj.branches))
    if args.values:
        fields.append(("values", [_show_value(v) for v in traj.values]))
    _emit(fields, args.format)
    if traj.status in (collatz.TrajStatus.CAP,):
        return EXIT_CUTOFF
    return EXIT_OK


def _show_value(v) -> str:
    if isinstance(v, int):
        return format_int(v)
    if isinstance(v, tuple):
        return "(" + ",".join(format_int(x) for x in v) + ")"
    return str(v).replace(" ", "")


def cmd_enumerate(args: argparse.Namespace) -> int:
    n, m = args.states, args.symbols
    listed = []

    def visitor(leaf):
        c = leaf.classification
        if args.all or c.kind is Kind.HOLDOUT:
            extra = c.proof.decider if c.proof else (f"sigma={c.sigma}" if c.kind is Kind.HALTED else c.reason)
            listed.append(f"{leaf.machine} {c.kind.value} steps={c.steps} {extra} weight={leaf.weight}")

    try:
        report = busy_beaver(
            n,
            m,
            step_cutoff=args.cutoff,
            space_cutoff=args.space,
            workers=args.threads,
            visitor=visitor,
            allow_unsupported=args.force,
        )
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = report.summary()
    if args.format == "json":
        print(json.dumps({"summary": summary, "machines": listed}, indent=2))
    else:
        for line in listed:
            print(line)
        width = max(len(k) for k in summary)
        for key, val in summary.items():
            print(f"{key:<{width}}  {val}")
    return EXIT_OK if report.exact else EXIT_CUTOFF


# ---------------------------------------------------------------------------


def _source_args(p: argparse.ArgumentParser, file_flag: str, builtin_help: str) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument(f"--{file_flag}", metavar="FILE")
    g.add_argument("--builtin", choices=rules.BUILTIN_RULESETS, help=builtin_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beaverlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("run", parents=[fmt], help="simulate a machine from the blank tape")
    _source_args(p, "machine", "one of the built-in champion machines")
    p.add_argument("--accelerate", action="store_true", help="use run-length block moves")
    p.add_argument("--max-steps", type=int, default=10**7)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", parents=[fmt], help="exact s and sigma through the rules engine")
    _source_args(p, "rules", "one of the built-in rulesets")
    p.add_argument("--max-transitions", type=int, default=10**6)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("verify", parents=[fmt], help="check rules against direct simulation")
    _source_args(p, "rules", "one of the built-in rulesets")
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--exp-k-max", type=int, default=2, help="k bound for rules with exponential times")
    p.add_argument("--rule", action="append", help="only check this rule id (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("collatz", parents=[fmt], help="iterate a Collatz-like function")
    p.add_argument("--function", required=True, help=f"{'|'.join(collatz.BUILTIN_MAPPINGS)} or a FILE")
    p.add_argument("--start", required=True, help="integer, or n,s for mappings on pairs")
    p.add_argument("--mode", choices=("explicit", "residue"), default="explicit")
    p.add_argument("--max-iters", type=int, default=10**6)
    p.add_argument("--cap-digits", type=int, default=10**7)
    p.add_argument("--precision", type=int, default=64, help="starting residue level")
    p.add_argument("--until", help="stop when this value is reached")
    p.add_argument("--values", action="store_true", help="print the trajectory")
    p.set_defaults(func=cmd_collatz)

    p = sub.add_parser("enumerate", parents=[fmt], help="busy beaver search")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--symbols", type=int, required=True)
    p.add_argument("--cutoff", type=int, default=10**5)
    p.add_argument("--space", type=int, default=10**4)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--all", action="store_true", help="list every leaf, not only holdouts")
    p.add_argument("--force", action="store_true", help=f"allow classes beyond {SUPPORTED}")
    p.set_defaults(func=cmd_enumerate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MachineFormatError, rules.RulesetError, collatz.MappingFormatError, ExprError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
