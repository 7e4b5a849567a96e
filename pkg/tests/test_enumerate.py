import itertools
from collections import Counter

import pytest
from hypothesis import given, settings

from beaverlab.enumerate import (
    BoundedTape,
    BudgetExceeded,
    DeciderResult,
    ExactCycle,
    Kind,
    TranslatedCycle,
    busy_beaver,
    classify,
    enumerate_tnf,
    replay,
)
from beaverlab.machine import Action, Configuration, MachineSpec, Status, parse_machine, run_direct

from .conftest import machines


def _raw_machines(n, m):
    cells = [None] + [Action(w, mv, q) for w in range(m) for mv in (-1, 1) for q in range(n)]
    for combo in itertools.product(cells, repeat=n * m):
        yield MachineSpec(n, m, tuple(tuple(combo[q * m : (q + 1) * m]) for q in range(n)))


def _raw_halting(n, m, cutoff):
    found = Counter()
    total = 0
    for machine in _raw_machines(n, m):
        total += 1
        out = run_direct(machine, Configuration.blank(), cutoff)
        if out.status is Status.HALTED:
            found[(out.steps, out.sigma)] += 1
    return total, found


def _tnf_halting(n, m, cutoff):
    found = Counter()
    for leaf in enumerate_tnf(n, m, step_cutoff=cutoff, space_cutoff=cutoff):
        c = leaf.classification
        if c.kind is Kind.HALTED:
            found[(c.steps, c.sigma)] += leaf.weight
    return found


def test_one_state_all_25_machines():
    total, raw = _raw_halting(1, 2, 100)
    assert total == 25
    rep = busy_beaver(1, 2)
    assert rep.total == 25
    assert rep.exact
    assert (rep.S, rep.Sigma) == (1, 1)
    assert max(s for s, _ in raw) == 1
    assert _tnf_halting(1, 2, 100) == raw


def test_two_state_raw_halting_multiset_matches_tnf():
    total, raw = _raw_halting(2, 2, 200)
    assert total == 9**4
    assert _tnf_halting(2, 2, 200) == raw


@pytest.mark.parametrize("n,m", [(1, 2), (2, 2), (1, 3)])
def test_leaf_weights_count_every_raw_machine(n, m):
    weights = sum(leaf.weight for leaf in enumerate_tnf(n, m, 1000, 1000))
    assert weights == (2 * n * m + 1) ** (n * m)


def test_two_state_values():
    rep = busy_beaver(2, 2)
    assert rep.exact
    assert (rep.S, rep.Sigma) == (6, 4)
    assert rep.holdouts == []
    assert rep.summary()["S"] == "=6"


def test_certificates_replay_for_two_states():
    proofs = 0
    for leaf in enumerate_tnf(2, 2):
        c = leaf.classification
        if c.kind is Kind.NON_HALTING:
            proofs += 1
            assert replay(parse_machine(leaf.machine), c.proof), leaf.machine
    assert proofs > 0


def test_determinism_across_workers():
    def collect(workers):
        lines = []
        rep = busy_beaver(2, 2, workers=workers, visitor=lambda leaf: lines.append(leaf))
        return rep.summary(), lines

    assert collect(1) == collect(2)


def test_classify_champion_halts(builtins):
    c = classify(builtins["M2"].machine, step_cutoff=10**7, space_cutoff=10**5)
    assert c.kind is Kind.HALTED
    assert (c.steps, c.sigma) == (3932964, 2050)


def test_classify_long_runner_is_holdout(builtins):
    c = classify(builtins["M1"].machine, step_cutoff=10**6, space_cutoff=10**5)
    assert c.kind is Kind.HOLDOUT
    assert c.steps == 10**6


def test_translated_cycler():
    m = parse_machine("0RA---")
    c = classify(m)
    assert c.kind is Kind.NON_HALTING
    assert isinstance(c.proof.certificate, TranslatedCycle)
    assert replay(m, c.proof)


def test_exact_cycler():
    m = parse_machine("0RB---_0LA---")
    c = classify(m)
    assert c.kind is Kind.NON_HALTING
    assert isinstance(c.proof.certificate, (ExactCycle, BoundedTape))
    assert replay(m, c.proof)


def test_fully_defined_machine_never_halts():
    c = classify(parse_machine("1RB1LB_1LA0RA"))
    assert c.kind is Kind.NON_HALTING
    assert c.proof.decider == "NoHaltTransition"


def test_tampered_certificates_rejected():
    m = parse_machine("0RB---_0LA---")
    assert not replay(m, DeciderResult("ExactCycle", ExactCycle(0, 3), 3))
    assert not replay(m, DeciderResult("TranslatedCycle", TranslatedCycle(1, 3, 1), 3))
    halter = parse_machine("1RB1LB_1LA1RH")
    assert not replay(halter, DeciderResult("ExactCycle", ExactCycle(0, 2), 2))
    assert not replay(halter, DeciderResult("BoundedTape", BoundedTape(2, 100), 100))


def test_unsupported_class_needs_force():
    with pytest.raises(BudgetExceeded):
        busy_beaver(5, 2)


def test_node_budget():
    with pytest.raises(BudgetExceeded):
        list(enumerate_tnf(3, 2, max_nodes=10))


@settings(max_examples=200, deadline=None)
@given(machines(max_states=3, max_symbols=3))
def test_classification_agrees_with_simulation(machine):
    c = classify(machine, step_cutoff=2000, space_cutoff=2000)
    out = run_direct(machine, Configuration.blank(), 2000)
    if c.kind is Kind.HALTED:
        assert out.status is Status.HALTED
        assert (c.steps, c.sigma) == (out.steps, out.sigma)
    elif c.kind is Kind.NON_HALTING:
        assert out.status is not Status.HALTED
        assert replay(machine, c.proof)
