from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.ntheory import n_order

from beaverlab.collatz import (
    CollatzMapping,
    ExpCollatzMapping,
    Form,
    MappingFormatError,
    PrecisionExhausted,
    Residue,
    TrajStatus,
    convert_form,
    format_mapping,
    iterate,
    iterate_exponential,
    load_builtin,
    m5_explicit_trace,
    m5_residue_trace,
    m5_u,
    multiplicative_order,
    parse_mapping,
    residue_iterate_exponential,
    type_of,
)


def test_forms_of_3x_plus_1():
    T = load_builtin("T")
    assert convert_form(T, Form.I) == ((Fraction(1, 2), 0), (Fraction(3, 2), Fraction(1, 2)))
    assert convert_form(T, "iii") == ((1, 0), (3, 2))


def test_form_ii_of_halving():
    f = CollatzMapping(2, ((1, 0), None))
    assert convert_form(f, Form.II) == ((1, 0), None)


def test_g1_form_i_slopes():
    assert all(q == Fraction(14, 8) for q, _ in filter(None, convert_form(load_builtin("g1"), Form.I)))


def test_types():
    assert type_of(load_builtin("g1")) == (8, 14)
    assert type_of(load_builtin("g2")) == (3, 5)
    assert type_of(load_builtin("g3")) == (2, 3)
    assert type_of(load_builtin("T")) is None


def test_form_constraints_enforced():
    with pytest.raises(ValueError):
        CollatzMapping.from_form_i(2, [(Fraction(1, 4), 0), None])
    with pytest.raises(ValueError):
        CollatzMapping.from_form_ii(3, [(2, 1), None, None])


@st.composite
def mappings(draw):
    d = draw(st.integers(2, 12))
    branch = st.one_of(st.none(), st.tuples(st.integers(-50, 50), st.integers(-50, 50)))
    return CollatzMapping(d, tuple(draw(branch) for _ in range(d)))


@settings(max_examples=1000)
@given(mappings())
def test_form_roundtrip(f):
    fi = convert_form(f, Form.I)
    fii = convert_form(f, Form.II)
    assert CollatzMapping.from_form_i(f.d, fi) == f
    assert CollatzMapping.from_form_ii(f.d, fii) == f
    for i, (c1, c2) in enumerate(zip(fi, fii)):
        if c1 is None:
            continue
        q, r = c1
        m, p = c2
        assert (q * f.d).denominator == 1 and (q * i + r).denominator == 1
        assert (p - i * m) % f.d == 0
        for n in (i, i + f.d, i + 5 * f.d):
            assert q * n + r == Fraction(m * n - p, f.d) == f(n)


EXPECTED = {
    "g1": (8, [(14, 2), (14, 3), (14, 7), (14, 8), (14, 9), None, (14, 14), (14, 15)]),
    "T": (2, [(1, 0), (3, 2)]),
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_builtin_tables(name):
    f = load_builtin(name)
    d, rows = EXPECTED[name]
    assert f.d == d and list(f.branches) == rows


def test_builtin_g2_g3_tables():
    g2 = load_builtin("g2")
    assert g2.branches == {
        (0, 1): (5, 1, 1), (1, 1): None, (2, 1): (5, 4, 2),
        (0, 2): (5, 1, 2), (1, 2): (5, 3, 1), (2, 2): None,
    }
    g3 = load_builtin("g3")
    evens = {1: (1, 1), 2: (2, 1), 3: (0, 1), 4: (3, 1), 5: (4, 1), 6: (2, 1), 7: (3, 1), 8: (1, 1)}
    odds = {1: (1, 2), 2: (2, 3), 3: (1, 4), 4: (1, 5), 5: (2, 6), 6: (1, 7), 7: (2, 8)}
    for s, (b, p) in evens.items():
        assert g3.branches[(0, s)] == (3, b, p)
    for s, (b, p) in odds.items():
        assert g3.branches[(1, s)] == (3, b, p)
    assert g3.branches[(1, 8)] is None


def test_builtin_g4_table():
    g4 = load_builtin("g4")
    assert isinstance(g4, ExpCollatzMapping)
    assert (g4.d, g4.base) == (9, 4)
    assert g4.special == {0: 9, 2: 11, 3: 13}
    for k in range(4):
        assert g4(9 * k + 5) == (98 * 4**k - 11) // 3
        assert g4(9 * k + 6) == (50 * 4 ** (k + 1) - 59) // 3
        assert g4(9 * k + 8) == (98 * 4**k + 1) // 3
        assert g4(9 * k + 9) == (50 * 4 ** (k + 1) - 11) // 3
        assert g4(9 * k + 11) == (98 * 4 ** (k + 1) - 59) // 3
        assert g4(9 * k + 12) == (50 * 4 ** (k + 1) + 1) // 3
        assert g4(3 * k + 1) is None


def test_builtin_g5():
    g5 = load_builtin("g5")
    assert g5((7, 0)) is None
    assert g5((7, 1)) == (2, 23)
    assert g5((7, 2)) == (9, 4)
    assert g5((7, 3)) == (2, 29)
    assert g5((7, 9)) == (26, 5)


def test_text_roundtrip():
    for name in ("g1", "T", "g4"):
        f = load_builtin(name)
        assert parse_mapping(format_mapping(f)) == f


def test_bad_mapping_text():
    with pytest.raises(MappingFormatError):
        parse_mapping("d=3; 0: 1,0; 1: 1,1")
    with pytest.raises(MappingFormatError):
        parse_mapping("hello")


@pytest.mark.parametrize("start,h", [(1, 33), (144, 41), (270, 51)])
def test_h1(start, h):
    assert iterate(load_builtin("g1"), start).h == h


@pytest.mark.parametrize("start,h", [((1, 2), 13), ((137, 1), 16), ((210, 2), 20)])
def test_h2(start, h):
    assert iterate(load_builtin("g2"), start).h == h


def test_g3_and_g5_long_runs():
    assert iterate(load_builtin("g3"), (0, 1)).h == 2001
    assert iterate(load_builtin("g5"), (2, 5)).h == 22157


def test_3x_plus_1_from_27():
    t = iterate(load_builtin("T"), 27, until=1)
    assert t.status is TrajStatus.REACHED and t.iterations == 70


def test_3x_plus_1_from_26_takes_eight_iterations():
    assert iterate(load_builtin("T"), 26, until=1).values == [26, 13, 20, 10, 5, 8, 4, 2, 1]


def test_cycle_detection():
    t = iterate(load_builtin("T"), 7)
    assert t.status is TrajStatus.CYCLE and t.cycle_length == 2


def test_cycle_detection_after_memo(monkeypatch):
    import beaverlab.collatz as c

    monkeypatch.setattr(c, "SET_MEMO_LIMIT", 3)
    t = iterate(load_builtin("T"), 27)
    assert t.status is TrajStatus.CYCLE and t.cycle_length == 2


def test_iteration_cap():
    t = iterate(load_builtin("T"), 27, max_iters=5)
    assert t.status is TrajStatus.CAP and t.iterations == 5


def test_negative_start_rejected():
    with pytest.raises(ValueError):
        iterate(load_builtin("T"), -3)


def test_h4_explicit():
    t = iterate_exponential(load_builtin("g4"), 0)
    assert t.h == 5
    assert t.values[:4] == [0, 9, 63, 273063]
    assert t.values[4] == (50 * 4**30340 + 1) // 3
    assert iterate_exponential(load_builtin("g4"), 4).h == 1


def test_explicit_stops_before_huge_values():
    t = iterate_exponential(load_builtin("g4"), 2, size_cap_digits=10**6)
    assert t.status is TrajStatus.CAP
    assert t.values[-1].digits > 10**6


@pytest.mark.parametrize("start,h", [(0, 5), (2, 8), (36, 15)])
def test_h4_residue(start, h):
    t = residue_iterate_exponential(load_builtin("g4"), start, precision=40)
    assert t.h == h
    assert all(isinstance(v, Residue) for v in t.values)


def test_h4_branch_sequence_from_2():
    t = residue_iterate_exponential(load_builtin("g4"), 2, precision=12)
    assert len(t.branches) == 8


def test_residue_precision_exhausted():
    with pytest.raises(PrecisionExhausted):
        residue_iterate_exponential(load_builtin("g4"), 36, precision=10)


def test_residue_agrees_with_explicit():
    g4 = load_builtin("g4")
    for start in range(200):
        exp = iterate_exponential(g4, start, max_iters=40, size_cap_digits=5000)
        res = residue_iterate_exponential(g4, start, max_iters=40, precision=90)
        known = [v for v in exp.values if isinstance(v, int)]
        assert res.branches[: len(known)] == [v % 9 for v in known]
        for v, r in zip(known, res.values):
            assert v % 3**r.level == r.value
        if exp.status is TrajStatus.UNDEFINED:
            assert res.h == exp.h


def test_orders_of_four():
    for J in range(2, 21):
        assert multiplicative_order(4, 3**J) == 3 ** (J - 1)


@settings(max_examples=200)
@given(st.integers(2, 500), st.integers(2, 10**6))
def test_order_matches_sympy(a, m):
    from math import gcd

    if gcd(a, m) != 1:
        return
    assert multiplicative_order(a, m) == n_order(a, m)


def test_m5_chain_from_9_1():
    chain = m5_residue_trace((9, 1), 5)
    assert [(c.q, c.r) for c in chain] == [(7, 1), (35, 3), (19, 1), (5, 3), (4, 1), (2, 0)]
    assert m5_u(7) % 64 == 47


def test_m5_chain_levels_exhausted():
    with pytest.raises(PrecisionExhausted):
        m5_residue_trace((9, 1), 3)


def test_u_7379_size():
    assert len(str(m5_u(7379))) > 3521


def test_u_congruence_lemma():
    for k in range(1, 7):
        for n in range(40):
            for m in range(40):
                assert (n % 2**k == m % 2**k) == (m5_u(n) % 2 ** (k + 1) == m5_u(m) % 2 ** (k + 1))


@pytest.mark.parametrize("a", [1, 3])
def test_m5_chain_matches_explicit(a):
    for n in range(1, 31):
        explicit = m5_explicit_trace((n, a), max_q=3000)
        chain = m5_residue_trace((n, a), 40)
        for (q, r), link in zip(explicit, chain):
            assert r == link.r
            assert q % 2**link.level == link.q % 2**link.level


def test_m5_chain_first_link_decided_immediately():
    for n in range(1, 21):
        for a in (1, 3):
            if (3 * n + 3 * a - 1) % 4 == 2:
                chain = m5_residue_trace((n, a), 0)
                assert len(chain) == 1 and chain[0].r == 2
