import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beaverlab.machine import (
    HALTED,
    Configuration,
    MachineFormatError,
    Status,
    count_nonblank,
    format_config,
    format_machine,
    parse_config,
    parse_machine,
    run_direct,
    step,
)

from .conftest import machines

M1 = "1RB2LA1LC_0LA2RB1LB_1RH1RA1RC"


def test_parse_m1_shape():
    m = parse_machine(M1)
    assert (m.n_states, m.n_symbols) == (3, 3)
    assert m.action(2, 0) is None
    assert m.action(0, 0) == (1, 1, 1)
    assert str(m) == M1


@pytest.mark.parametrize(
    "text",
    [
        "1RB2LA_0LA",  # row width mismatch
        "1XB1RH_1LA1RA",  # malformed cell
        "1RB0LH_1LA1RA",  # halting cell other than 1RH
        "1RC1RH_1LA1RA",  # unknown state
        "1RB3RH_1LA1RA",  # bad halting cell
        "2RB1RH_1LA1RA",  # symbol out of range
    ],
)
def test_parse_errors(text):
    with pytest.raises(MachineFormatError):
        parse_machine(text)


def test_undefined_cells_parse_as_halting():
    m = parse_machine("1RB---_1LA1RH")
    assert m.action(0, 1) is None


@given(machines())
def test_format_parse_roundtrip(m):
    assert parse_machine(format_machine(m)) == m


def test_config_canonical_form():
    c = Configuration.make([(0, 3), (1, 2), (1, 1)], 0, [(2, 0), (1, 1), (0, 5)], 0)
    assert c.left == ((1, 3),)
    assert c.right == ((1, 1),)
    assert format_config(c) == "^w0 1^3 (A0) 1 0^w"


def test_parse_config():
    c = parse_config("^w0 1 (H1) 2^5 0^w")
    assert c.state == HALTED and c.head == 1 and c.right == ((2, 5),)
    assert count_nonblank(c) == 7
    assert parse_config(str(c)) == c


def test_sigma_counts_head_cell():
    assert count_nonblank(parse_config("^w0 (A1) 0^w")) == 1
    assert count_nonblank(parse_config("^w0 (A0) 0^w")) == 0


@given(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), max_size=6),
    st.integers(0, 3),
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), max_size=6),
    st.integers(0, 4),
)
def test_config_text_roundtrip(left, head, right, state):
    c = Configuration.make(left, head, right, state)
    assert parse_config(format_config(c)) == c


def test_single_steps_match_run_direct():
    m = parse_machine(M1)
    c = Configuration.blank()
    for i in range(1, 60):
        c = step(m, c)
        assert run_direct(m, Configuration.blank(), i).final == c


def test_step_on_halted_raises():
    m = parse_machine("1RH1RH")
    c = step(m, Configuration.blank())
    assert c.halted
    with pytest.raises(ValueError):
        step(m, c)


def test_m2_blank_tape_run():
    out = run_direct(parse_machine("1RB2LA1RA1RA_1LB1LA3RB1RH"), Configuration.blank(), 10**7)
    assert out.status is Status.HALTED
    assert (out.steps, out.sigma) == (3932964, 2050)
    assert str(out.final) == "^w0 1 3^2047 1 (H1) 0^w"


def test_m4_reaches_c9_in_29_steps():
    out = run_direct(parse_machine("1RB1LE_1RC1RF_1LD0RB_1RE0LC_1LA0RD_1RH1RC"), Configuration.blank(), 29)
    assert out.status is Status.CUTOFF
    assert str(out.final) == "^w0 (A0) 1^9 0^w"


def test_m7_reaches_c24():
    m = parse_machine("1RB0LB_0RC1LB_1RD0LA_1LE1LF_1LA0LD_1RH1LE")
    out = run_direct(m, Configuration.blank(), 1 + 408)
    assert str(out.final) == "^w0 1^24 (B0) 0^w"


def test_cutoff_is_exact():
    m = parse_machine(M1)
    out = run_direct(m, Configuration.blank(), 12345)
    assert out.steps == 12345 and out.status is Status.CUTOFF


def test_zero_steps():
    m = parse_machine(M1)
    out = run_direct(m, Configuration.blank(), 0)
    assert out.steps == 0 and out.final == Configuration.blank()


@settings(max_examples=200)
@given(machines(), st.integers(0, 300))
def test_run_direct_agrees_with_step(m, n):
    c = Configuration.blank()
    for _ in range(n):
        if c.halted:
            break
        c = step(m, c)
    out = run_direct(m, Configuration.blank(), n)
    assert out.final == c
    assert out.sigma == count_nonblank(c)
