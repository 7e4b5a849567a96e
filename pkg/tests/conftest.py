import sys

import pytest
from hypothesis import strategies as st

from beaverlab.machine import Action, MachineSpec
from beaverlab.rules import BUILTIN_RULESETS, load_builtin

if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)


@pytest.fixture(scope="session")
def builtins():
    return {name: load_builtin(name) for name in BUILTIN_RULESETS}


@st.composite
def machines(draw, max_states=4, max_symbols=3):
    n = draw(st.integers(1, max_states))
    m = draw(st.integers(2, max_symbols))
    cell = st.one_of(
        st.none(),
        st.builds(Action, st.integers(0, m - 1), st.sampled_from((-1, 1)), st.integers(0, n - 1)),
    )
    table = tuple(tuple(draw(cell) for _ in range(m)) for _ in range(n))
    return MachineSpec(n, m, table)
