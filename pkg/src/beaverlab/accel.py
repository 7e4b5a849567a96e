"""Accelerated simulation over run-length blocks.

When ``delta(q, s) = (s', D, q)`` the machine keeps its state while crossing a
run of ``s``; the whole run is consumed in one block operation.
"""
from __future__ import annotations

from .machine import (
    HALTED,
    Configuration,
    MachineSpec,
    RunOutcome,
    Status,
    count_nonblank,
)


def _push(stack: list[list[int]], sym: int, cnt: int) -> None:
    if stack and stack[-1][0] == sym:
        stack[-1][1] += cnt
    else:
        stack.append([sym, cnt])


def _run(machine: MachineSpec, start: Configuration, max_steps: int) -> tuple[RunOutcome, int]:
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    m = machine.n_symbols
    trans = [None if a is None else (a.write, a.move, a.next) for a in machine.flat()]
    # both stacks have the cell adjacent to the head on top (end of list)
    left = [[s, c] for s, c in start.left]
    right = [[s, c] for s, c in reversed(start.right)]
    head = start.head
    state = start.state
    steps = start.steps
    ops = 0
    while state != HALTED and steps < max_steps:
        ops += 1
        t = trans[state * m + head]
        if t is None:
            write, move, nxt = 1, 1, HALTED
        else:
            write, move, nxt = t
        ahead, behind = (right, left) if move > 0 else (left, right)
        if nxt == state:
            budget = max_steps - steps
            if ahead and ahead[-1][0] == head:
                run = ahead[-1][1]
            elif not ahead and head == 0:
                run = None  # blank to infinity
            else:
                run = 0
            if run is not None and run + 1 <= budget:
                if run:
                    ahead.pop()
                _push(behind, write, run + 1)
                steps += run + 1
                if ahead:
                    top = ahead[-1]
                    head = top[0]
                    top[1] -= 1
                    if not top[1]:
                        ahead.pop()
                else:
                    head = 0
            else:
                # stop inside the run: head keeps reading ``head``
                _push(behind, write, budget)
                if run is not None:
                    ahead[-1][1] -= budget
                    if not ahead[-1][1]:
                        ahead.pop()
                steps += budget
            continue
        _push(behind, write, 1)
        steps += 1
        state = nxt
        if ahead:
            top = ahead[-1]
            head = top[0]
            top[1] -= 1
            if not top[1]:
                ahead.pop()
        else:
            head = 0
    final = Configuration.make(
        [(s, c) for s, c in left],
        head,
        [(s, c) for s, c in reversed(right)],
        state,
        steps,
    )
    status = Status.HALTED if state == HALTED else Status.CUTOFF
    return RunOutcome(status, steps, count_nonblank(final), final), ops


def run_accelerated(machine: MachineSpec, start: Configuration, max_steps: int) -> RunOutcome:
    """Same outcome as :func:`run_direct`, computed with block operations.

    A block operation that would cross ``max_steps`` is cut at the exact
    step, so the final configuration always matches the direct simulator.
    """
    return _run(machine, start, max_steps)[0]


def sweep_stats(machine: MachineSpec, start: Configuration, max_steps: int) -> tuple[int, int]:
    """Return ``(block_ops, steps)`` for an accelerated run."""
    out, ops = _run(machine, start, max_steps)
    return ops, out.steps
