"""Configuration-rewrite rules with exact time formulas.

A ruleset file describes a machine, named configuration families and a list
of rules, one per line::

    name M1
    machine 1RB2LA1LC_0LA2RB1LB_1RH1RA1RC
    family C(n) = (A0) 2^n
    a | (A0)     | C(1)             | 3
    b | C(8k+1)  | C(14k+3)         | 112k^2+116k+13
    f | C(8k+5)  | 1 (H1) 2^(14k+9) | 112k^2+228k+97

Tape patterns list the finite part of the tape left to right with the head
cell written ``(Sa)``; blank margins are implicit.  A token is a symbol word
with an optional exponent (``2^n``, ``(011)^k``, ``0101``) or ``rbin(p)``,
the binary writing of ``p`` reversed.  Family arguments in a match pattern
must be affine in one variable each; result arguments and times are any
exact integer expression.  A rule with id ``normalize`` is a zero-time
identity applied before matching.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from itertools import product
from typing import Iterable, Iterator, Optional, Sequence, Union

from .expr import Affine, Expr, ExprError, NonIntegralError, bind_affine
from .machine import (
    HALT_LETTER,
    HALTED,
    STATE_LETTERS,
    Configuration,
    MachineSpec,
    Status,
    parse_machine,
    run_direct,
)

BUILTIN_RULESETS = ("M1", "M2", "M3", "M4", "M5", "M6", "M7")
NORMALIZE = "normalize"
MATERIALIZE_LIMIT = 10**7


class RulesetError(ValueError):
    pass


class NoMatch(LookupError):
    pass


class PaddingExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Tape patterns


@dataclass(frozen=True)
class Block:
    word: tuple[int, ...]
    count: Expr


@dataclass(frozen=True)
class RBin:
    value: Expr


Item = Union[Block, RBin]


def _rbin(p: int) -> list[tuple[tuple[int, ...], int]]:
    if p < 0:
        raise ValueError("rbin of a negative number")
    return [((int(b),), 1) for b in reversed(bin(p)[2:])] if p else []


@dataclass(frozen=True)
class SymbolicTape:
    """A tape whose blocks repeat whole words, possibly astronomically often."""

    left: tuple[tuple[tuple[int, ...], int], ...]
    head: int
    right: tuple[tuple[tuple[int, ...], int], ...]
    state: int

    @property
    def halted(self) -> bool:
        return self.state == HALTED

    def sigma(self) -> int:
        total = 1 if self.head else 0
        for word, cnt in self.left + self.right:
            total += cnt * sum(1 for s in word if s)
        return total

    def size(self) -> int:
        return 1 + sum(len(w) * c for w, c in self.left + self.right)

    def to_configuration(self, limit: int = MATERIALIZE_LIMIT) -> Configuration:
        if self.size() > limit:
            raise OverflowError(f"tape of {self.size()} cells exceeds materialization limit")

        def flat(items: Iterable[tuple[tuple[int, ...], int]]) -> list[tuple[int, int]]:
            out: list[tuple[int, int]] = []
            for word, cnt in items:
                if len(word) == 1:
                    out.append((word[0], cnt))
                else:
                    out.extend((s, 1) for s in word * cnt)
            return out

        return Configuration.make(flat(self.left), self.head, flat(self.right), self.state)

    def __str__(self) -> str:
        def fmt(items: Iterable[tuple[tuple[int, ...], int]]) -> list[str]:
            out = []
            for word, cnt in items:
                w = "".join(map(str, word))
                if cnt == 1:
                    out.append(w)
                elif len(word) == 1:
                    out.append(f"{w}^{cnt}")
                else:
                    out.append(f"({w})^{cnt}")
            return out

        letter = HALT_LETTER if self.halted else STATE_LETTERS[self.state]
        return " ".join(["^w0", *fmt(self.left), f"({letter}{self.head})", *fmt(self.right), "0^w"])


@dataclass(frozen=True)
class TapePattern:
    left: tuple[Item, ...]
    state: int
    head: int
    right: tuple[Item, ...]
    text: str = field(compare=False, default="")

    @property
    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for item in self.left + self.right:
            out |= item.count.variables if isinstance(item, Block) else item.value.variables
        return frozenset(out)

    def instantiate(self, env: dict[str, int]) -> SymbolicTape:
        def side(items: Sequence[Item]) -> tuple[tuple[tuple[int, ...], int], ...]:
            out: list[tuple[tuple[int, ...], int]] = []
            for item in items:
                if isinstance(item, RBin):
                    out.extend(_rbin(item.value(env)))
                    continue
                cnt = item.count(env)
                if cnt < 0:
                    raise ValueError(f"negative exponent {cnt} in {self.text!r}")
                if cnt:
                    out.append((item.word, cnt))
            return tuple(out)

        return SymbolicTape(side(self.left), self.head, side(self.right), self.state)

    def __str__(self) -> str:
        return self.text


_HEAD_TOKEN = re.compile(r"\(([A-H])([0-9])\)")
_RBIN_TOKEN = re.compile(r"rbin\((.+)\)")
_BLOCK_TOKEN = re.compile(r"(\([0-9]+\)|[0-9]+)(?:\^(.+))?")


def parse_tape_pattern(text: str) -> TapePattern:
    left: list[Item] = []
    right: list[Item] = []
    head = None
    for tok in text.split():
        hm = _HEAD_TOKEN.fullmatch(tok)
        if hm:
            if head is not None:
                raise RulesetError(f"two heads in {text!r}")
            letter = hm.group(1)
            state = HALTED if letter == HALT_LETTER else STATE_LETTERS.index(letter)
            head = (state, int(hm.group(2)))
            continue
        side = left if head is None else right
        rm = _RBIN_TOKEN.fullmatch(tok)
        if rm:
            side.append(RBin(Expr(rm.group(1))))
            continue
        bm = _BLOCK_TOKEN.fullmatch(tok)
        if bm is None:
            raise RulesetError(f"bad tape token {tok!r} in {text!r}")
        word = tuple(int(ch) for ch in bm.group(1).strip("()"))
        exp = bm.group(2)
        if exp is not None and exp.startswith("(") and exp.endswith(")"):
            exp = exp[1:-1]
        side.append(Block(word, Expr(exp) if exp is not None else Expr("1")))
    if head is None:
        raise RulesetError(f"tape pattern {text!r} has no head")
    return TapePattern(tuple(left), head[0], head[1], tuple(right), text.strip())


# ---------------------------------------------------------------------------
# Families and abstract configurations


@dataclass(frozen=True)
class FamilyConfig:
    """A member of a named family, e.g. ``C(14, 3)``."""

    name: str
    args: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.name}({','.join(map(str, self.args))})"


AbstractConfig = Union[FamilyConfig, SymbolicTape]


@dataclass(frozen=True)
class FamilyTemplate:
    name: str
    params: tuple[Affine, ...]
    tape: TapePattern

    def bind(self, args: Sequence[int]) -> Optional[dict[str, int]]:
        return bind_affine(self.params, args)


@dataclass(frozen=True)
class FamilyPattern:
    name: str
    args: tuple[Expr, ...]
    text: str = field(compare=False, default="")
    params: tuple[Optional[Affine], ...] = field(compare=False, default=(), repr=False)

    def __post_init__(self) -> None:
        try:
            params = tuple(Affine(a) for a in self.args)
        except ExprError:
            params = ()
        object.__setattr__(self, "params", params)

    @property
    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for a in self.args:
            out |= a.variables
        return frozenset(out)

    def instantiate(self, env: dict[str, int]) -> FamilyConfig:
        return FamilyConfig(self.name, tuple(a(env) for a in self.args))

    def __str__(self) -> str:
        return self.text


Pattern = Union[FamilyPattern, TapePattern]


def _split_args(inner: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in inner:
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    out.append("".join(cur))
    return [a.strip() for a in out]


_CALL = re.compile(r"([A-Za-z_]\w*)\((.*)\)")


def _parse_pattern(text: str, families: Iterable[str]) -> Pattern:
    text = text.strip()
    cm = _CALL.fullmatch(text)
    if cm and cm.group(1) in families:
        return FamilyPattern(cm.group(1), tuple(Expr(a) for a in _split_args(cm.group(2))), text)
    return parse_tape_pattern(text)


# ---------------------------------------------------------------------------
# Rules


@dataclass(frozen=True)
class Rule:
    id: str
    match: Pattern
    result: Pattern
    time: Expr

    @property
    def is_normalization(self) -> bool:
        return self.id == NORMALIZE

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted(self.match.variables))

    def bind(self, config: AbstractConfig) -> Optional[dict[str, int]]:
        """Variable assignment making ``match`` equal to ``config``."""
        if isinstance(self.match, FamilyPattern):
            if not isinstance(config, FamilyConfig) or config.name != self.match.name:
                return None
            return bind_affine(self.match.params, config.args)
        if not isinstance(config, SymbolicTape):
            return None
        if self.match.variables:
            raise RulesetError("tape match patterns may not contain variables")
        want = self.match.instantiate({})
        if want == config:
            return {}
        try:
            return {} if want.to_configuration() == config.to_configuration() else None
        except OverflowError:
            return None

    def __str__(self) -> str:
        return f"{self.id} | {self.match} | {self.result} | {self.time}"


def apply_rule(rule: Rule, config: AbstractConfig) -> tuple[AbstractConfig, int]:
    """Rewrite ``config`` with ``rule``; returns the result and its time."""
    env = rule.bind(config)
    if env is None:
        raise NoMatch(f"rule {rule.id} does not match {config}")
    return _fire(rule, env)


def _fire(rule: Rule, env: dict[str, int]) -> tuple[AbstractConfig, int]:
    steps = rule.time(env)
    if steps < 0:
        raise NonIntegralError(f"rule {rule.id}: negative time {steps} for {env}")
    return rule.result.instantiate(env), steps


# ---------------------------------------------------------------------------
# Rulesets


@dataclass
class Ruleset:
    name: str
    machine: MachineSpec
    families: dict[str, list[FamilyTemplate]]
    rules: list[Rule]
    start: AbstractConfig
    ordered: bool = False

    def __post_init__(self) -> None:
        ids = [r.id for r in self.rules if not r.is_normalization]
        if len(set(ids)) != len(ids):
            raise RulesetError(f"{self.name}: duplicate rule ids")
        for r in self.rules:
            if isinstance(r.match, FamilyPattern) and r.match.args and not r.match.params:
                raise RulesetError(f"{self.name}: rule {r.id} match arguments must be affine in one variable each")
        if not self.ordered:
            self._check_disjoint()

    @property
    def transition_rules(self) -> list[Rule]:
        return [r for r in self.rules if not r.is_normalization]

    @property
    def normalizations(self) -> list[Rule]:
        return [r for r in self.rules if r.is_normalization]

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def _check_disjoint(self) -> None:
        fam_rules = [r for r in self.rules if isinstance(r.match, FamilyPattern)]
        for i, r1 in enumerate(fam_rules):
            for r2 in fam_rules[i + 1 :]:
                if _patterns_overlap(r1.match, r2.match):
                    raise RulesetError(f"{self.name}: rules {r1.id} and {r2.id} overlap")

    def materialize(self, config: AbstractConfig) -> Configuration:
        """Concrete configuration for an abstract one."""
        if isinstance(config, SymbolicTape):
            return config.to_configuration()
        for tmpl in self.families.get(config.name, []):
            env = tmpl.bind(config.args)
            if env is not None:
                return tmpl.tape.instantiate(env).to_configuration()
        raise NoMatch(f"no family template for {config}")

    def symbolic(self, config: AbstractConfig) -> SymbolicTape:
        if isinstance(config, SymbolicTape):
            return config
        for tmpl in self.families.get(config.name, []):
            env = tmpl.bind(config.args)
            if env is not None:
                return tmpl.tape.instantiate(env)
        raise NoMatch(f"no family template for {config}")

    def normalize(self, config: AbstractConfig) -> AbstractConfig:
        changed = True
        while changed:
            changed = False
            for rule in self.normalizations:
                env = rule.bind(config)
                if env is not None:
                    config = rule.result.instantiate(env)
                    changed = True
        return config

    def find(self, config: AbstractConfig) -> Optional[tuple[Rule, dict[str, int]]]:
        for rule in self.transition_rules:
            env = rule.bind(config)
            if env is not None:
                return rule, env
        return None


def _patterns_overlap(p1: FamilyPattern, p2: FamilyPattern) -> bool:
    if p1.name != p2.name or len(p1.args) != len(p2.args):
        return False
    a1, a2 = p1.params, p2.params
    if not a1 or not a2:
        raise RulesetError(f"match patterns must be affine: {p1}, {p2}")
    shared = any(
        len([a for a in aff if a.var == a_.var]) > 1 for aff in (a1, a2) for a_ in aff if a_.var
    )
    if not shared:
        return all(x.intersects(y) for x, y in zip(a1, a2))
    # a variable used twice: search a bounded box of values
    bound = 64
    for vals in product(range(bound), repeat=len(p1.variables)):
        env = dict(zip(sorted(p1.variables), vals))
        args = tuple(a(env) for a in p1.args)
        if bind_affine(a2, args) is not None:
            return True
    return False


def parse_ruleset(text: str) -> Ruleset:
    name = "?"
    machine: Optional[MachineSpec] = None
    families: dict[str, list[FamilyTemplate]] = {}
    rule_lines: list[tuple[int, str]] = []
    start_text = "(A0)"
    ordered = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("name "):
                name = line[5:].strip()
            elif line.startswith("machine "):
                machine = parse_machine(line[8:].strip())
            elif line.startswith("start "):
                start_text = line[6:].strip()
            elif line == "ordered":
                ordered = True
            elif line.startswith("family "):
                lhs, rhs = line[7:].split("=", 1)
                cm = _CALL.fullmatch(lhs.strip())
                if cm is None:
                    raise RulesetError(f"bad family head {lhs!r}")
                params = tuple(Affine(Expr(a)) for a in _split_args(cm.group(2)))
                families.setdefault(cm.group(1), []).append(
                    FamilyTemplate(cm.group(1), params, parse_tape_pattern(rhs))
                )
            elif "|" in line:
                rule_lines.append((lineno, line))
            else:
                raise RulesetError("unrecognized line")
        except (ExprError, ValueError) as exc:
            raise RulesetError(f"line {lineno}: {exc}") from exc
    if machine is None:
        raise RulesetError("missing machine line")
    rules = []
    for lineno, line in rule_lines:
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise RulesetError(f"line {lineno}: expected 'id | match | result | time'")
        rid, match, result, time = parts
        try:
            rules.append(
                Rule(rid, _parse_pattern(match, families), _parse_pattern(result, families), Expr(time))
            )
        except (ExprError, ValueError) as exc:
            raise RulesetError(f"line {lineno}: {exc}") from exc
    start_pat = _parse_pattern(start_text, families)
    start = start_pat.instantiate({})
    return Ruleset(name, machine, families, rules, start, ordered)


def format_ruleset(rs: Ruleset) -> str:
    lines = [f"name {rs.name}", f"machine {rs.machine}"]
    for templates in rs.families.values():
        for t in templates:
            args = ",".join(p.expr.text for p in t.params)
            lines.append(f"family {t.name}({args}) = {t.tape}")
    if rs.ordered:
        lines.append("ordered")
    lines.extend(str(r) for r in rs.rules)
    return "\n".join(lines) + "\n"


def load_builtin(name: str) -> Ruleset:
    if name not in BUILTIN_RULESETS:
        raise KeyError(f"unknown builtin {name!r}")
    text = resources.files("beaverlab").joinpath("data", "rules", f"{name}.rules").read_text()
    return parse_ruleset(text)


# ---------------------------------------------------------------------------
# Running rules


class TraceStatus(str, enum.Enum):
    HALTED = "halted"
    NO_RULE = "no-applicable-rule"
    CAP = "iteration-cap"


@dataclass(frozen=True)
class TraceEntry:
    rule: str
    env: dict[str, int]
    config: AbstractConfig
    delta: int


@dataclass
class RuleTrace:
    start: AbstractConfig
    entries: list[TraceEntry]
    status: TraceStatus
    final: AbstractConfig
    steps: int

    @property
    def transitions(self) -> int:
        return len(self.entries)

    def cumulative(self) -> Iterator[int]:
        total = 0
        for e in self.entries:
            total += e.delta
            yield total


def run_rules(ruleset: Ruleset, start: Optional[AbstractConfig] = None, max_transitions: int = 10**6) -> RuleTrace:
    """Apply the unique matching rule repeatedly, summing exact times."""
    config = ruleset.start if start is None else start
    first = config
    entries: list[TraceEntry] = []
    total = 0
    while True:
        if isinstance(config, SymbolicTape) and config.halted:
            status = TraceStatus.HALTED
            break
        config = ruleset.normalize(config)
        found = ruleset.find(config)
        if found is None:
            status = TraceStatus.NO_RULE
            break
        if len(entries) >= max_transitions:
            status = TraceStatus.CAP
            break
        rule, env = found
        config, delta = _fire(rule, env)
        total += delta
        entries.append(TraceEntry(rule.id, env, config, delta))
    return RuleTrace(first, entries, status, config, total)


@dataclass(frozen=True)
class ScoreReport:
    s: int
    sigma: int
    trace: RuleTrace

    @property
    def s_digits(self) -> int:
        return len(str(self.s))

    @property
    def sigma_digits(self) -> int:
        return len(str(self.sigma))


class ScoreError(RuntimeError):
    pass


def score(ruleset: Ruleset, max_transitions: int = 10**6) -> ScoreReport:
    """Exact step count and non-blank count of the blank-tape run."""
    trace = run_rules(ruleset, max_transitions=max_transitions)
    if trace.status is not TraceStatus.HALTED:
        raise ScoreError(f"{ruleset.name}: rules stopped with {trace.status.value} at {trace.final}")
    final = ruleset.symbolic(trace.final)
    return ScoreReport(trace.steps, final.sigma(), trace)


# ---------------------------------------------------------------------------
# Verification against direct simulation


@dataclass(frozen=True)
class CaseResult:
    env: dict[str, int]
    passed: bool
    expected_steps: int
    detail: str = ""


@dataclass
class VerifyReport:
    rule: str
    cases: list[CaseResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)


def _padding_for(config: Configuration) -> int:
    longest = max([c for _, c in config.left + config.right] + [1])
    return 8 * longest + 64


def _check_case(ruleset: Ruleset, rule: Rule, env: dict[str, int], padding: Optional[int]) -> CaseResult:
    try:
        before = ruleset.materialize(rule.match.instantiate(env))
        after_abs, steps = _fire(rule, env)
        after = ruleset.materialize(ruleset.symbolic(after_abs))
    except (NoMatch, ValueError, ArithmeticError) as exc:
        return CaseResult(env, False, -1, f"instantiation failed: {exc}")
    if steps == 0:
        ok = before == after
        return CaseResult(env, ok, 0, "" if ok else f"{before} != {after}")
    pad = padding if padding is not None else _padding_for(before)
    while True:
        out = run_direct(ruleset.machine, before, steps)
        width = len(before.cells()[0])
        idx = before.cells()[1]
        lo, hi = out.span
        if -lo <= idx + pad and hi <= width - 1 - idx + pad:
            break
        if padding is not None:
            raise PaddingExceeded(f"rule {rule.id} {env}: head left the padded window")
        pad *= 2
    if after.halted:
        ok = out.status is Status.HALTED and out.steps == steps and out.final == after
    else:
        ok = out.status is Status.CUTOFF and out.final == after
    detail = "" if ok else f"expected {after} after {steps}, got {out.final} ({out.status.value} at {out.steps})"
    return CaseResult(env, ok, steps, detail)


def verify_rule(
    ruleset: Ruleset,
    rule: Rule,
    k_values: Iterable[int],
    padding: Optional[int] = None,
) -> VerifyReport:
    """Check ``rule`` by direct simulation for every assignment of its variables."""
    values = list(k_values)
    names = rule.variables
    cases = [
        _check_case(ruleset, rule, dict(zip(names, combo)), padding)
        for combo in product(values, repeat=len(names))
    ]
    return VerifyReport(rule.id, cases)


# ---------------------------------------------------------------------------
# Closed-form iteration of M5's rule (f)


def m5_meta_rule(n: int, r: int) -> tuple[int, int]:
    """``C(2, 4n + r)`` reaches ``C(u_n, r)`` in ``t_n`` steps."""
    if n < 0 or not 0 <= r <= 3:
        raise ValueError("need n >= 0 and 0 <= r <= 3")
    u = (3 ** (n + 2) - 5) // 2
    t_num = 3 * 9 ** (n + 3) - 80 * 3 ** (n + 3) + 584 * n - 27
    t, rem = divmod(t_num, 32)
    if rem:
        raise NonIntegralError("t_n numerator not divisible by 32")
    return u, t
