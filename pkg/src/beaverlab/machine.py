"""Machine model, text format and exact direct simulation.

A machine with ``n`` states and ``m`` symbols is written as ``n`` rows joined
by ``_``; each row holds ``m`` cells ``<write><move><next>`` such as ``1RB``.
The halting cell is always ``1RH``: the machine writes 1, moves right and
stops.
"""
from __future__ import annotations

import enum
import re
from itertools import groupby
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

STATE_LETTERS = "ABCDEFG"
HALT_LETTER = "H"
HALTED = -1
UNDEFINED_CELL = "---"
MAX_SYMBOLS = 10


class MachineFormatError(ValueError):
    pass


class Action(NamedTuple):
    write: int
    move: int  # +1 right, -1 left
    next: int


@dataclass(frozen=True)
class MachineSpec:
    """Transition table; ``None`` entries are halting cells (``1RH``)."""

    n_states: int
    n_symbols: int
    table: tuple[tuple[Optional[Action], ...], ...]

    def __post_init__(self) -> None:
        if not 1 <= self.n_states <= len(STATE_LETTERS):
            raise MachineFormatError(f"unsupported state count {self.n_states}")
        if not 2 <= self.n_symbols <= MAX_SYMBOLS:
            raise MachineFormatError(f"unsupported symbol count {self.n_symbols}")
        if len(self.table) != self.n_states:
            raise MachineFormatError("table row count differs from state count")
        for row in self.table:
            if len(row) != self.n_symbols:
                raise MachineFormatError("table row width differs from symbol count")
            for act in row:
                if act is None:
                    continue
                if not 0 <= act.write < self.n_symbols or not 0 <= act.next < self.n_states:
                    raise MachineFormatError(f"transition {act} out of range")
                if act.move not in (-1, 1):
                    raise MachineFormatError(f"bad move {act.move}")

    def action(self, state: int, symbol: int) -> Optional[Action]:
        return self.table[state][symbol]

    def flat(self) -> list[Optional[Action]]:
        """Row-major table, indexed by ``state * n_symbols + symbol``."""
        return [act for row in self.table for act in row]

    def __str__(self) -> str:
        return format_machine(self)


def _format_cell(act: Optional[Action]) -> str:
    if act is None:
        return "1R" + HALT_LETTER
    return f"{act.write}{'R' if act.move > 0 else 'L'}{STATE_LETTERS[act.next]}"


def format_machine(machine: MachineSpec) -> str:
    return "_".join("".join(_format_cell(a) for a in row) for row in machine.table)


_CELL = re.compile(r"([0-9])([LR])([A-H])")


def parse_machine(text: str) -> MachineSpec:
    """Parse ``1RB1LE_1RC1RF_...`` into a :class:`MachineSpec`."""
    rows = text.strip().split("_")
    n = len(rows)
    if n > len(STATE_LETTERS):
        raise MachineFormatError(f"too many states ({n})")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise MachineFormatError("row width mismatch between states")
    width = widths.pop()
    if width % 3 or width < 6:
        raise MachineFormatError(f"row width mismatch: {width} characters is not m >= 2 cells")
    m = width // 3
    table = []
    for row in rows:
        cells: list[Optional[Action]] = []
        for j in range(m):
            cell = row[3 * j : 3 * j + 3]
            if cell == UNDEFINED_CELL:
                # never-reached transition; halts like 1RH if it is reached
                cells.append(None)
                continue
            mt = _CELL.fullmatch(cell)
            if mt is None:
                raise MachineFormatError(f"malformed cell {cell!r}")
            w, d, q = int(mt.group(1)), mt.group(2), mt.group(3)
            if q == HALT_LETTER:
                if cell != "1RH":
                    raise MachineFormatError(f"halting cell must be 1RH, got {cell!r}")
                cells.append(None)
                continue
            nxt = STATE_LETTERS.index(q)
            if nxt >= n:
                raise MachineFormatError(f"unknown state letter {q!r} in {cell!r}")
            if w >= m:
                raise MachineFormatError(f"symbol {w} out of range in {cell!r}")
            cells.append(Action(w, 1 if d == "R" else -1, nxt))
        table.append(tuple(cells))
    return MachineSpec(n, m, tuple(table))


# ---------------------------------------------------------------------------
# Configurations


def _canonical(blocks: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Merge equal neighbours and drop empty blocks (order preserved)."""
    out: list[list[int]] = []
    for sym, cnt in blocks:
        if cnt < 0:
            raise ValueError("negative block length")
        if cnt == 0:
            continue
        if out and out[-1][0] == sym:
            out[-1][1] += cnt
        else:
            out.append([sym, cnt])
    return tuple((s, c) for s, c in out)


@dataclass(frozen=True)
class Configuration:
    """Two-way infinite tape as run-length blocks around the head.

    ``left`` and ``right`` are both listed in reading order (left to right);
    blank margins are implicit.  ``steps`` does not take part in equality.
    """

    left: tuple[tuple[int, int], ...]
    head: int
    right: tuple[tuple[int, int], ...]
    state: int
    steps: int = field(default=0, compare=False)

    @classmethod
    def make(
        cls,
        left: Iterable[tuple[int, int]],
        head: int,
        right: Iterable[tuple[int, int]],
        state: int,
        steps: int = 0,
    ) -> "Configuration":
        lb = list(_canonical(left))
        rb = list(_canonical(right))
        if lb and lb[0][0] == 0:
            lb.pop(0)
        if rb and rb[-1][0] == 0:
            rb.pop()
        return cls(tuple(lb), head, tuple(rb), state, steps)

    @classmethod
    def blank(cls, state: int = 0) -> "Configuration":
        return cls((), 0, (), state, 0)

    @property
    def halted(self) -> bool:
        return self.state == HALTED

    def with_steps(self, steps: int) -> "Configuration":
        return Configuration(self.left, self.head, self.right, self.state, steps)

    def cells(self) -> tuple[list[int], int]:
        """Materialize the finite part: (cells, head index)."""
        cells: list[int] = []
        for s, c in self.left:
            cells.extend([s] * c)
        idx = len(cells)
        cells.append(self.head)
        for s, c in self.right:
            cells.extend([s] * c)
        return cells, idx

    @classmethod
    def from_cells(cls, cells: Sequence[int], pos: int, state: int, steps: int = 0) -> "Configuration":
        return cls.make(_rle(cells[:pos]), cells[pos], _rle(cells[pos + 1 :]), state, steps)

    def __str__(self) -> str:
        return format_config(self)


def _rle(cells: Sequence[int]) -> list[tuple[int, int]]:
    return [(s, sum(1 for _ in grp)) for s, grp in groupby(cells)]


def _fmt_block(sym: int, cnt: int) -> str:
    return str(sym) if cnt == 1 else f"{sym}^{cnt}"


def format_config(config: Configuration) -> str:
    state = HALT_LETTER if config.halted else STATE_LETTERS[config.state]
    parts = ["^w0"]
    parts += [_fmt_block(s, c) for s, c in config.left]
    parts.append(f"({state}{config.head})")
    parts += [_fmt_block(s, c) for s, c in config.right]
    parts.append("0^w")
    return " ".join(parts)


_HEAD = re.compile(r"\(([A-H])([0-9])\)")
_BLOCK = re.compile(r"([0-9]+)(?:\^([0-9]+))?")


def parse_config(text: str, steps: int = 0) -> Configuration:
    """Parse the printed notation, e.g. ``^w0 1^3 (A0) 2 0^w``.

    A run written ``011`` without exponent is read symbol by symbol.
    """
    toks = text.split()
    if toks and toks[0] in ("^w0", "^ω0"):
        toks = toks[1:]
    if toks and toks[-1] in ("0^w", "0^ω"):
        toks = toks[:-1]
    left: list[tuple[int, int]] = []
    right: list[tuple[int, int]] = []
    head = state = None
    for tok in toks:
        hm = _HEAD.fullmatch(tok)
        if hm:
            if head is not None:
                raise ValueError(f"two heads in {text!r}")
            letter = hm.group(1)
            state = HALTED if letter == HALT_LETTER else STATE_LETTERS.index(letter)
            head = int(hm.group(2))
            continue
        bm = _BLOCK.fullmatch(tok)
        if bm is None:
            raise ValueError(f"bad token {tok!r}")
        word, exp = bm.group(1), bm.group(2)
        count = 1 if exp is None else int(exp)
        side = left if head is None else right
        if len(word) == 1:
            side.append((int(word), count))
        else:
            side.extend((int(ch), 1) for ch in word * count)
    if head is None or state is None:
        raise ValueError(f"no head in {text!r}")
    return Configuration.make(left, head, right, state, steps)


def count_nonblank(config: Configuration) -> int:
    """Number of non-zero cells, head included."""
    total = sum(c for s, c in config.left if s) + sum(c for s, c in config.right if s)
    return total + (1 if config.head else 0)


# ---------------------------------------------------------------------------
# Simulation


class Status(str, enum.Enum):
    HALTED = "halted"
    CUTOFF = "cutoff"
    NON_HALTING = "non-halting"


@dataclass(frozen=True)
class RunOutcome:
    status: Status
    steps: int
    sigma: int
    final: Configuration
    reason: Optional[str] = None
    # head excursion relative to the start cell (min, max)
    span: tuple[int, int] = (0, 0)


def step(machine: MachineSpec, config: Configuration) -> Configuration:
    """Apply exactly one transition."""
    if config.halted:
        raise ValueError("configuration is already halted")
    act = machine.action(config.state, config.head)
    if act is None:
        write, move, nxt = 1, 1, HALTED
    else:
        write, move, nxt = act.write, act.move, act.next
    left, right = list(config.left), list(config.right)
    if move > 0:
        left.append((write, 1))
        head = _pop_front(right)
    else:
        right.insert(0, (write, 1))
        head = _pop_back(left)
    return Configuration.make(left, head, right, nxt, config.steps + 1)


def _pop_front(blocks: list[tuple[int, int]]) -> int:
    if not blocks:
        return 0
    s, c = blocks[0]
    if c == 1:
        blocks.pop(0)
    else:
        blocks[0] = (s, c - 1)
    return s


def _pop_back(blocks: list[tuple[int, int]]) -> int:
    if not blocks:
        return 0
    s, c = blocks[-1]
    if c == 1:
        blocks.pop()
    else:
        blocks[-1] = (s, c - 1)
    return s


def run_direct(machine: MachineSpec, start: Configuration, max_steps: int) -> RunOutcome:
    """Step-by-step simulation until halt or ``max_steps`` total steps.

    The working tape is a dense byte array grown on demand; the result is
    converted back to canonical run-length form.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    cells, pos = start.cells()
    margin = 1024
    tape = bytearray(margin) + bytearray(cells) + bytearray(margin)
    pos += margin
    origin = pos
    lo = hi = pos
    m = machine.n_symbols
    trans = [None if a is None else (a.write, a.move, a.next) for a in machine.flat()]
    state = start.state
    steps = start.steps
    budget = max_steps - steps
    halted = state == HALTED
    done = 0
    while done < budget and not halted:
        # inner loop runs until the head leaves the allocated tape
        size = len(tape)
        while done < budget:
            t = trans[state * m + tape[pos]]
            if t is None:
                tape[pos] = 1
                pos += 1
                done += 1
                state = HALTED
                halted = True
                break
            tape[pos] = t[0]
            pos += t[1]
            state = t[2]
            done += 1
            if pos < lo:
                lo = pos
                if pos < 0:
                    break
            elif pos > hi:
                hi = pos
                if pos >= size:
                    break
        if pos < 0 or pos >= len(tape):
            grow = bytearray(len(tape))
            if pos < 0:
                tape = grow + tape
                shift = len(grow)
                pos += shift
                lo += shift
                hi += shift
                origin += shift
            else:
                tape = tape + grow
    steps += done
    hi = max(hi, pos)
    body = bytes(tape)
    first = len(body) - len(body.lstrip(b"\0"))
    last = len(body.rstrip(b"\0"))
    a, b = min(first, pos), max(last, pos + 1)
    final = Configuration.from_cells(body[a:b], pos - a, state, steps)
    status = Status.HALTED if halted else Status.CUTOFF
    return RunOutcome(status, steps, count_nonblank(final), final, span=(lo - origin, hi - origin))
