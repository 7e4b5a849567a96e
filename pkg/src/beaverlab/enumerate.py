"""Tree-normal-form enumeration, non-halting deciders and busy beaver search.

Machines are grown lazily from the blank tape: a transition is chosen only
when the run first needs it, states and symbols are introduced in order of
first use, and the first move is fixed to the right (mirror images behave
identically).  Every search leaf carries the number of raw machines it
stands for, so the leaf weights add up to ``(2nm+1)^(nm)``.
"""
from __future__ import annotations

import enum
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

from .machine import (
    HALT_LETTER,
    STATE_LETTERS,
    UNDEFINED_CELL,
    Action,
    MachineSpec,
)

SUPPORTED = ((1, 2), (2, 2), (3, 2), (2, 3), (4, 2))
DEFAULT_STEP_CUTOFF = 10**5
DEFAULT_SPACE_CUTOFF = 10**4
RECORD_HISTORY = 16

Trans = Optional[tuple[int, int, int]]


class BudgetExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class ExactCycle:
    start: int
    period: int


@dataclass(frozen=True)
class TranslatedCycle:
    start: int
    end: int
    side: int  # +1 for right records, -1 for left records


@dataclass(frozen=True)
class BoundedTape:
    width: int
    steps: int


@dataclass(frozen=True)
class NoHaltTransition:
    pass


Certificate = Union[ExactCycle, TranslatedCycle, BoundedTape, NoHaltTransition]


@dataclass(frozen=True)
class DeciderResult:
    decider: str
    certificate: Certificate
    steps: int


class Kind(str, enum.Enum):
    HALTED = "halted"
    NON_HALTING = "non-halting"
    HOLDOUT = "holdout"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    steps: int
    sigma: int = 0
    proof: Optional[DeciderResult] = None
    reason: str = ""


# ---------------------------------------------------------------------------
# Simulation kernel


@dataclass(frozen=True)
class _Undefined:
    steps: int  # transitions executed before the missing one
    state: int
    symbol: int
    sigma: int  # after the missing transition acts as a halt writing 1


def _nonzero(tape: bytearray, lo: int, hi: int) -> int:
    region = tape[lo : hi + 1]
    return len(region) - region.count(0)


def _simulate(
    trans: Sequence[Trans],
    n: int,
    m: int,
    step_cutoff: int,
    space: int,
) -> Union[_Undefined, DeciderResult, tuple[str, int]]:
    """Run from blank with all deciders online.

    Returns an :class:`_Undefined` when a missing transition is reached, a
    :class:`DeciderResult` for a proof, or ``(reason, steps)`` on a cutoff.
    """
    size = 2 * space + 1
    tape = bytearray(size)
    pos = lo = hi = space
    state = 0
    steps = 0
    history = array("i")
    # exact cycles: Brent-style snapshots at powers of two
    snap_step, snap_state, snap_pos, snap_lo, snap_hi, snap_tape = 0, 0, pos, lo, hi, b"\0"
    next_snap = 1
    records: tuple[dict, dict] = ({}, {})  # left, right
    bound = n * m  # BoundedTape threshold for the current width
    while True:
        sym = tape[pos]
        t = trans[state * m + sym]
        if t is None:
            sigma = _nonzero(tape, lo, hi) - (sym != 0) + 1
            return _Undefined(steps, state, sym, sigma)
        if steps >= step_cutoff:
            return ("step cutoff", steps)
        tape[pos] = t[0]
        pos += t[1]
        state = t[2]
        steps += 1
        history.append(pos)
        if pos < lo or pos > hi:
            if pos < 0 or pos >= size:
                return ("space cutoff", steps)
            side = 0 if pos < lo else 1
            if side:
                hi = pos
                window = bytes(tape[lo : pos + 1])
                base = lo
            else:
                lo = pos
                window = bytes(tape[pos : hi + 1])
                base = hi
            width = hi - lo + 1
            bound = n * width * m**width if width < 40 else 1 << 200
            found = _translated(records[side], state, steps, pos, base, window, tape, history, side)
            if found is not None:
                return DeciderResult("TranslatedCycle", found, steps)
            continue
        if state == snap_state and pos == snap_pos and lo == snap_lo and hi == snap_hi:
            if tape[lo : hi + 1] == snap_tape:
                return DeciderResult("ExactCycle", ExactCycle(snap_step, steps - snap_step), steps)
        if steps >= next_snap:
            snap_step, snap_state, snap_pos, snap_lo, snap_hi = steps, state, pos, lo, hi
            snap_tape = bytes(tape[lo : hi + 1])
            next_snap *= 2
        if steps > bound:
            return DeciderResult("BoundedTape", BoundedTape(hi - lo + 1, steps), steps)


def _translated(
    records: dict,
    state: int,
    steps: int,
    pos: int,
    base: int,
    window: bytes,
    tape: bytearray,
    history: array,
    side: int,
) -> Optional[TranslatedCycle]:
    """Check the new record against earlier records in the same state."""
    prior = records.setdefault(state, [])
    for t1, p1, base1, win1 in reversed(prior):
        span = history[t1 - 1 : steps]
        if side:
            d = pos - p1
            low = min(span)  # leftmost cell read since t1
            old = win1[low - base1 :] if low >= base1 else bytes(base1 - low) + win1
            if tape[low + d : pos + 1] == old:
                return TranslatedCycle(t1, steps, 1)
        else:
            d = p1 - pos
            high = max(span)
            old = win1[: high - p1 + 1] if high <= base1 else win1 + bytes(high - base1)
            if tape[pos : high - d + 1] == old:
                return TranslatedCycle(t1, steps, -1)
    prior.append((steps, pos, base, window))
    if len(prior) > RECORD_HISTORY:
        del prior[0]
    return None


def _flat(machine: MachineSpec) -> list[Trans]:
    return [None if a is None else (a.write, a.move, a.next) for a in machine.flat()]


def classify(
    machine: MachineSpec,
    step_cutoff: int = DEFAULT_STEP_CUTOFF,
    space_cutoff: int = DEFAULT_SPACE_CUTOFF,
) -> Classification:
    """Halted with exact counts, non-halting with a certificate, or holdout."""
    if step_cutoff <= 0 or space_cutoff <= 0:
        raise ValueError("cutoffs must be positive")
    trans = _flat(machine)
    if all(t is not None for t in trans):
        return Classification(Kind.NON_HALTING, 0, proof=DeciderResult("NoHaltTransition", NoHaltTransition(), 0))
    out = _simulate(trans, machine.n_states, machine.n_symbols, step_cutoff, space_cutoff)
    if isinstance(out, _Undefined):
        return Classification(Kind.HALTED, out.steps + 1, out.sigma)
    if isinstance(out, DeciderResult):
        return Classification(Kind.NON_HALTING, out.steps, proof=out)
    return Classification(Kind.HOLDOUT, out[1], reason=out[0])


# ---------------------------------------------------------------------------
# Certificate replay, independent of the kernel above


@dataclass
class _Replay:
    heads: list[int]  # head position at times 0..steps
    snapshots: dict[int, tuple[dict[int, int], int, int]]  # time -> (tape, head, state)


def _replay_run(machine: MachineSpec, steps: int, keep: Sequence[int]) -> Optional[_Replay]:
    """Plain dict-tape run for ``steps`` steps; None if it halts first."""
    tape: dict[int, int] = {}
    head, state = 0, 0
    wanted = set(keep)
    heads = [0]
    snaps = {0: ({}, 0, 0)} if 0 in wanted else {}
    for t in range(1, steps + 1):
        act = machine.action(state, tape.get(head, 0))
        if act is None:
            return None
        if act.write:
            tape[head] = act.write
        else:
            tape.pop(head, None)
        head += act.move
        state = act.next
        heads.append(head)
        if t in wanted:
            snaps[t] = (dict(tape), head, state)
    return _Replay(heads, snaps)


def replay(machine: MachineSpec, proof: DeciderResult) -> bool:
    """Re-check a non-halting certificate from scratch."""
    cert = proof.certificate
    if isinstance(cert, NoHaltTransition):
        return all(a is not None for a in machine.flat())
    if isinstance(cert, ExactCycle):
        if cert.period < 1 or cert.start < 0:
            return False
        t1, t2 = cert.start, cert.start + cert.period
        run = _replay_run(machine, t2, (t1, t2))
        return run is not None and run.snapshots[t1] == run.snapshots[t2]
    if isinstance(cert, BoundedTape):
        run = _replay_run(machine, cert.steps, ())
        if run is None:
            return False
        width = max(run.heads) - min(run.heads) + 1
        n, m = machine.n_states, machine.n_symbols
        return width <= cert.width and cert.steps + 1 > n * cert.width * m**cert.width
    if isinstance(cert, TranslatedCycle):
        t1, t2, s = cert.start, cert.end, cert.side
        if not 0 < t1 < t2 or s not in (1, -1):
            return False
        run = _replay_run(machine, t2, (t1, t2))
        if run is None:
            return False
        heads = [s * h for h in run.heads]  # mirror left records to the right
        tape1, _, q1 = run.snapshots[t1]
        tape2, _, q2 = run.snapshots[t2]
        if q1 != q2 or heads[t1] <= max(heads[:t1]) or heads[t2] <= max(heads[:t2]):
            return False
        d = heads[t2] - heads[t1]
        low = min(heads[t1 : t2 + 1])
        for x in range(low, heads[t1] + 1):
            if tape1.get(s * x, 0) != tape2.get(s * (x + d), 0):
                return False
        return True
    return False


# ---------------------------------------------------------------------------
# Tree normal form search


@dataclass(frozen=True)
class Leaf:
    """A search leaf standing for ``weight`` raw machines."""

    machine: str
    classification: Classification
    weight: int


def _format_partial(n: int, m: int, trans: Sequence[Trans], halt_at: Optional[int] = None) -> str:
    rows = []
    for q in range(n):
        cells = []
        for s in range(m):
            idx = q * m + s
            t = trans[idx]
            if idx == halt_at:
                cells.append(f"1R{HALT_LETTER}")
            elif t is None:
                cells.append(UNDEFINED_CELL)
            else:
                cells.append(f"{t[0]}{'R' if t[1] > 0 else 'L'}{STATE_LETTERS[t[2]]}")
        rows.append("".join(cells))
    return "_".join(rows)


def _spec(n: int, m: int, trans: Sequence[Trans]) -> MachineSpec:
    table = tuple(
        tuple(None if t is None else Action(*t) for t in trans[q * m : (q + 1) * m]) for q in range(n)
    )
    return MachineSpec(n, m, table)


@dataclass
class _Node:
    trans: list[Trans]
    weight: int
    states: int  # states named so far (A is always named)
    symbols: int  # symbols named so far (0 is always named)


def _children(node: _Node, n: int, m: int, idx: int) -> Iterator[_Node]:
    first = all(t is None for t in node.trans)
    moves = (1,) if first else (1, -1)
    for write in range(min(node.symbols + 1, m)):
        wmul = m - node.symbols if write == node.symbols else 1
        for move in moves:
            for nxt in range(min(node.states + 1, n)):
                qmul = n - node.states if nxt == node.states else 1
                trans = list(node.trans)
                trans[idx] = (write, move, nxt)
                yield _Node(
                    trans,
                    node.weight * wmul * qmul * (2 if first else 1),
                    max(node.states, nxt + 1),
                    max(node.symbols, write + 1),
                )


def _search(
    n: int,
    m: int,
    roots: list[_Node],
    step_cutoff: int,
    space_cutoff: int,
    max_nodes: Optional[int],
) -> Iterator[Leaf]:
    base = 2 * n * m + 1
    stack = list(reversed(roots))
    visited = 0
    while stack:
        node = stack.pop()
        visited += 1
        if max_nodes is not None and visited > max_nodes:
            raise BudgetExceeded(f"more than {max_nodes} search nodes")
        undefined = sum(t is None for t in node.trans)
        if undefined == 0:
            proof = DeciderResult("NoHaltTransition", NoHaltTransition(), 0)
            yield Leaf(_format_partial(n, m, node.trans), Classification(Kind.NON_HALTING, 0, proof=proof), node.weight)
            continue
        out = _simulate(node.trans, n, m, step_cutoff, space_cutoff)
        if isinstance(out, _Undefined):
            idx = out.state * m + out.symbol
            yield Leaf(
                _format_partial(n, m, node.trans, idx),
                Classification(Kind.HALTED, out.steps + 1, out.sigma),
                node.weight * base ** (undefined - 1),
            )
            stack.extend(reversed(list(_children(node, n, m, idx))))
            continue
        free = node.weight * base**undefined
        text = _format_partial(n, m, node.trans)
        if isinstance(out, DeciderResult):
            yield Leaf(text, Classification(Kind.NON_HALTING, out.steps, proof=out), free)
        else:
            yield Leaf(text, Classification(Kind.HOLDOUT, out[1], reason=out[0]), free)


def _root(n: int, m: int) -> _Node:
    return _Node([None] * (n * m), 1, 1, 1)


def enumerate_tnf(
    n: int,
    m: int,
    step_cutoff: int = DEFAULT_STEP_CUTOFF,
    space_cutoff: int = DEFAULT_SPACE_CUTOFF,
    visitor: Optional[Callable[[Leaf], None]] = None,
    max_nodes: Optional[int] = None,
) -> Iterator[Leaf]:
    """Yield every leaf of the search tree in canonical (depth-first) order."""
    if n < 1 or m < 2 or n > len(STATE_LETTERS):
        raise ValueError("need 1 <= n <= 7 and m >= 2")
    for leaf in _search(n, m, [_root(n, m)], step_cutoff, space_cutoff, max_nodes):
        if visitor is not None:
            visitor(leaf)
        yield leaf


def _frontier(n: int, m: int, step_cutoff: int, space_cutoff: int, depth: int) -> tuple[list, list[_Node]]:
    """Expand the first ``depth`` levels, keeping early leaves and open nodes in order.

    Items are either a :class:`Leaf` or a :class:`_Node` still to search.
    """
    items: list = [_root(n, m)]
    base = 2 * n * m + 1
    for _ in range(depth):
        nxt: list = []
        for item in items:
            if isinstance(item, Leaf):
                nxt.append(item)
                continue
            undefined = sum(t is None for t in item.trans)
            out = _simulate(item.trans, n, m, step_cutoff, space_cutoff) if undefined else None
            if not isinstance(out, _Undefined):
                nxt.append(item)
                continue
            idx = out.state * m + out.symbol
            nxt.append(
                Leaf(
                    _format_partial(n, m, item.trans, idx),
                    Classification(Kind.HALTED, out.steps + 1, out.sigma),
                    item.weight * base ** (undefined - 1),
                )
            )
            nxt.extend(_children(item, n, m, idx))
        items = nxt
    return items, [i for i in items if isinstance(i, _Node)]


def _search_list(args: tuple) -> list[Leaf]:
    n, m, node, step_cutoff, space_cutoff = args
    return list(_search(n, m, [node], step_cutoff, space_cutoff, None))


# ---------------------------------------------------------------------------
# Busy beaver reports


@dataclass
class EnumerationReport:
    n: int
    m: int
    step_cutoff: int
    total: int = 0
    leaves: int = 0
    counts: dict[str, int] = field(default_factory=lambda: {k.value: 0 for k in Kind})
    deciders: dict[str, int] = field(default_factory=dict)
    S: int = 0
    Sigma: int = 0
    S_champions: list[str] = field(default_factory=list)
    Sigma_champions: list[str] = field(default_factory=list)
    holdouts: list[str] = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.counts[Kind.HOLDOUT.value] == 0

    def add(self, leaf: Leaf) -> None:
        c = leaf.classification
        self.total += leaf.weight
        self.leaves += 1
        self.counts[c.kind.value] += leaf.weight
        if c.kind is Kind.HALTED:
            if c.steps > self.S:
                self.S, self.S_champions = c.steps, []
            if c.steps == self.S:
                self.S_champions.append(leaf.machine)
            if c.sigma > self.Sigma:
                self.Sigma, self.Sigma_champions = c.sigma, []
            if c.sigma == self.Sigma:
                self.Sigma_champions.append(leaf.machine)
        elif c.kind is Kind.NON_HALTING and c.proof is not None:
            self.deciders[c.proof.decider] = self.deciders.get(c.proof.decider, 0) + 1
        else:
            self.holdouts.append(leaf.machine)

    def summary(self) -> dict[str, str]:
        """Flat key-value view, identical for any worker count."""
        rel = "=" if self.exact else ">="
        out = {
            "states": str(self.n),
            "symbols": str(self.m),
            "step_cutoff": str(self.step_cutoff),
            "raw_machines": str(self.total),
            "tnf_leaves": str(self.leaves),
        }
        for k, v in self.counts.items():
            out[f"count_{k}"] = str(v)
        for k in sorted(self.deciders):
            out[f"decider_{k}"] = str(self.deciders[k])
        out.update(
            {
                "holdout_leaves": str(len(self.holdouts)),
                "S": f"{rel}{self.S}",
                "Sigma": f"{rel}{self.Sigma}",
                "S_champion": self.S_champions[0] if self.S_champions else "",
                "Sigma_champion": self.Sigma_champions[0] if self.Sigma_champions else "",
            }
        )
        return out


def busy_beaver(
    n: int,
    m: int,
    step_cutoff: int = DEFAULT_STEP_CUTOFF,
    space_cutoff: int = DEFAULT_SPACE_CUTOFF,
    workers: int = 1,
    visitor: Optional[Callable[[Leaf], None]] = None,
    allow_unsupported: bool = False,
) -> EnumerationReport:
    """Search all ``n``-state ``m``-symbol machines from the blank tape."""
    if (n, m) not in SUPPORTED and not allow_unsupported:
        raise BudgetExceeded(f"{n}x{m} is outside the supported classes {SUPPORTED}")
    report = EnumerationReport(n, m, step_cutoff)
    if workers <= 1:
        for leaf in enumerate_tnf(n, m, step_cutoff, space_cutoff):
            report.add(leaf)
            if visitor is not None:
                visitor(leaf)
        return report
    items, _ = _frontier(n, m, step_cutoff, space_cutoff, depth=3)
    jobs = [(n, m, it, step_cutoff, space_cutoff) for it in items if isinstance(it, _Node)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = iter(pool.map(_search_list, jobs))
        for it in items:
            for leaf in [it] if isinstance(it, Leaf) else next(results):
                report.add(leaf)
                if visitor is not None:
                    visitor(leaf)
    return report
