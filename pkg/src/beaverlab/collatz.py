"""Generalized Collatz mappings and their iteration.

A mapping of modulus ``d`` is stored by branch: ``f(d*n + i) = a_i*n + b_i``
or undefined.  The two other usual coefficient forms are derived from it:

* form (i):   ``f(n) = q_i*n + r_i``        with ``q_i = a_i/d``
* form (ii):  ``f(n) = (m_i*n - p_i)/d``    with ``m_i = a_i``
* form (iii): ``f(d*n + i) = a_i*n + b_i``
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterator, Optional, Sequence, Union

from .expr import Affine, Expr, NonIntegralError, bind_affine

BUILTIN_MAPPINGS = ("g1", "g2", "g3", "g4", "g5", "T")
SET_MEMO_LIMIT = 10**6


class MappingFormatError(ValueError):
    pass


class PrecisionExhausted(RuntimeError):
    """Residue iteration ran out of precision before deciding a branch."""


class Form(str, enum.Enum):
    I = "i"
    II = "ii"
    III = "iii"


Pair = Optional[tuple[int, int]]


@dataclass(frozen=True)
class CollatzMapping:
    d: int
    branches: tuple[Pair, ...]

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError("modulus must be >= 2")
        if len(self.branches) != self.d:
            raise ValueError(f"expected {self.d} branches, got {len(self.branches)}")

    def __call__(self, n: int) -> Optional[int]:
        k, i = divmod(n, self.d)
        br = self.branches[i]
        if br is None:
            return None
        return br[0] * k + br[1]

    def form_i(self) -> tuple[Optional[tuple[Fraction, Fraction]], ...]:
        out = []
        for i, br in enumerate(self.branches):
            if br is None:
                out.append(None)
                continue
            q = Fraction(br[0], self.d)
            out.append((q, br[1] - q * i))
        return tuple(out)

    def form_ii(self) -> tuple[Pair, ...]:
        return tuple(
            None if br is None else (br[0], i * br[0] - self.d * br[1])
            for i, br in enumerate(self.branches)
        )

    @classmethod
    def from_form_i(cls, d: int, coeffs: Sequence[Optional[tuple[Fraction, Fraction]]]) -> "CollatzMapping":
        branches: list[Pair] = []
        for i, c in enumerate(coeffs):
            if c is None:
                branches.append(None)
                continue
            q, r = Fraction(c[0]), Fraction(c[1])
            a, b = q * d, q * i + r
            if a.denominator != 1 or b.denominator != 1:
                raise ValueError(f"branch {i}: q*d and q*i + r must be integers")
            branches.append((int(a), int(b)))
        return cls(d, tuple(branches))

    @classmethod
    def from_form_ii(cls, d: int, coeffs: Sequence[Pair]) -> "CollatzMapping":
        branches: list[Pair] = []
        for i, c in enumerate(coeffs):
            if c is None:
                branches.append(None)
                continue
            m, p = c
            if (p - i * m) % d:
                raise ValueError(f"branch {i}: p must be congruent to i*m mod d")
            branches.append((m, (i * m - p) // d))
        return cls(d, tuple(branches))


def convert_form(mapping: CollatzMapping, target: Union[Form, str]) -> tuple:
    """Coefficient table of ``mapping`` in the requested form."""
    target = Form(target)
    if target is Form.I:
        return mapping.form_i()
    if target is Form.II:
        return mapping.form_ii()
    return mapping.branches


@dataclass(frozen=True)
class ParamCollatzMapping:
    """``f(d*n + i, s) = (a*n + b, s')`` for parameters ``s`` in a finite set."""

    d: int
    params: tuple[int, ...]
    branches: dict[tuple[int, int], Optional[tuple[int, int, int]]] = field(hash=False)

    def __post_init__(self) -> None:
        for i in range(self.d):
            for s in self.params:
                if (i, s) not in self.branches:
                    raise ValueError(f"missing branch ({i},{s})")
                br = self.branches[(i, s)]
                if br is not None and br[2] not in self.params:
                    raise ValueError(f"branch ({i},{s}) leaves the parameter set")

    def __call__(self, x: tuple[int, int]) -> Optional[tuple[int, int]]:
        n, s = x
        k, i = divmod(n, self.d)
        br = self.branches[(i, s)]
        if br is None:
            return None
        return br[0] * k + br[1], br[2]


@dataclass(frozen=True)
class PatternMapping:
    """Mapping on tuples given by affine patterns; first matching line wins."""

    arity: int
    lines: tuple[tuple[tuple[Affine, ...], Optional[tuple[Expr, ...]]], ...]

    def __call__(self, x: tuple[int, ...]) -> Optional[tuple[int, ...]]:
        for params, result in self.lines:
            env = bind_affine(params, x)
            if env is not None:
                return None if result is None else tuple(e(env) for e in result)
        raise ValueError(f"no pattern matches {x}")


@dataclass(frozen=True)
class ExpCollatzMapping:
    """``f(d*n + i) = (a_i * p^n + b_i) / c_i`` with a few special values."""

    d: int
    base: int
    branches: tuple[Optional[tuple[int, int, int]], ...]
    special: dict[int, int] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if len(self.branches) != self.d:
            raise ValueError(f"expected {self.d} branches")
        if self.base < 2:
            raise ValueError("base must be >= 2")

    def branch(self, n: int) -> Optional[tuple[int, int, int]]:
        return self.branches[n % self.d]

    def __call__(self, n: int) -> Optional[int]:
        if n in self.special:
            return self.special[n]
        k, i = divmod(n, self.d)
        br = self.branches[i]
        if br is None:
            return None
        return _exp_value(br, self.base, k)


def _exp_value(br: tuple[int, int, int], base: int, k: int) -> int:
    a, b, c = br
    q, r = divmod(a * base**k + b, c)
    if r:
        raise NonIntegralError(f"({a}*{base}^{k} + {b}) is not divisible by {c}")
    return q


def _exp_digits(br: tuple[int, int, int], base: int, k: int) -> int:
    """Estimated decimal digits of ``(a*base^k + b)/c``; exact in integers for any ``k``."""
    a, _, c = br
    scale = 10**18
    log_base = round(math.log10(base) * scale)
    log_ac = round((math.log10(abs(a)) - math.log10(c)) * scale)
    return (k * log_base + log_ac) // scale + 1


Mapping = Union[CollatzMapping, ParamCollatzMapping, PatternMapping, ExpCollatzMapping]


def type_of(mapping: Mapping) -> Optional[tuple[int, int]]:
    """``(d, a)`` when every defined branch multiplies by the same ``a``."""
    if isinstance(mapping, CollatzMapping):
        slopes = {br[0] for br in mapping.branches if br is not None}
    elif isinstance(mapping, ParamCollatzMapping):
        slopes = {br[0] for br in mapping.branches.values() if br is not None}
    else:
        return None
    if len(slopes) != 1:
        return None
    return mapping.d, slopes.pop()


# ---------------------------------------------------------------------------
# Text format


def _chunks(text: str) -> Iterator[str]:
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for part in line.split(";"):
            part = part.strip()
            if part:
                yield part


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def parse_mapping(text: str) -> Mapping:
    """Parse a mapping definition.

    Plain:         ``d=2; 0: 1,0; 1: 3,2``
    Parameterized: ``d=3; S=1,2; 0,1: 5,1,1; 1,1: undef; ...``
    Exponential:   ``d=9; p=4; 5: 98,-11,3; 1: undef; special 0: 9``
    Pattern:       ``(k,1) -> (2,3k+2); (k,0) -> undef``
    """
    header: dict[str, str] = {}
    body: list[tuple[str, str]] = []
    special: dict[int, int] = {}
    patterns: list[tuple[str, str]] = []
    for chunk in _chunks(text):
        if "->" in chunk:
            lhs, rhs = chunk.split("->", 1)
            patterns.append((lhs.strip(), rhs.strip()))
        elif chunk.startswith("special "):
            key, val = chunk[8:].split(":", 1)
            special[int(key)] = int(val)
        elif ":" in chunk:
            key, val = chunk.split(":", 1)
            body.append((key.strip(), val.strip()))
        elif "=" in chunk:
            key, val = chunk.split("=", 1)
            header[key.strip()] = val.strip()
        else:
            raise MappingFormatError(f"cannot read {chunk!r}")
    try:
        if patterns:
            return _pattern_mapping(patterns)
        d = int(header["d"])
        if "S" in header:
            params = tuple(_ints(header["S"]))
            table: dict[tuple[int, int], Optional[tuple[int, int, int]]] = {}
            for key, val in body:
                i, s = _ints(key)
                table[(i, s)] = None if val == "undef" else tuple(_ints(val))  # type: ignore[assignment]
            return ParamCollatzMapping(d, params, table)
        rows: list = [None] * d
        seen = set()
        for key, val in body:
            i = int(key)
            seen.add(i)
            rows[i] = None if val == "undef" else tuple(_ints(val))
        if seen != set(range(d)):
            raise MappingFormatError(f"branches must cover 0..{d - 1}")
        if "p" in header:
            return ExpCollatzMapping(d, int(header["p"]), tuple(rows), special)
        return CollatzMapping(d, tuple(rows))
    except (KeyError, ValueError) as exc:
        raise MappingFormatError(str(exc)) from exc


def _tuple_args(text: str) -> list[str]:
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise MappingFormatError(f"expected a tuple, got {text!r}")
    return [a.strip() for a in text[1:-1].split(",")]


def _pattern_mapping(lines: list[tuple[str, str]]) -> PatternMapping:
    out = []
    arity = None
    for lhs, rhs in lines:
        params = tuple(Affine(Expr(a)) for a in _tuple_args(lhs))
        result = None if rhs == "undef" else tuple(Expr(a) for a in _tuple_args(rhs))
        if arity is None:
            arity = len(params)
        if len(params) != arity or (result is not None and len(result) != arity):
            raise MappingFormatError("all patterns must have the same arity")
        out.append((params, result))
    return PatternMapping(arity or 0, tuple(out))


def format_mapping(mapping: Union[CollatzMapping, ExpCollatzMapping]) -> str:
    head = [f"d={mapping.d}"]
    if isinstance(mapping, ExpCollatzMapping):
        head.append(f"p={mapping.base}")
    lines = ["; ".join(head)]
    for i, br in enumerate(mapping.branches):
        lines.append(f"{i}: " + ("undef" if br is None else ",".join(map(str, br))))
    if isinstance(mapping, ExpCollatzMapping):
        lines.extend(f"special {k}: {v}" for k, v in sorted(mapping.special.items()))
    return "\n".join(lines) + "\n"


def load_builtin(name: str) -> Mapping:
    if name not in BUILTIN_MAPPINGS:
        raise KeyError(f"unknown builtin {name!r}")
    text = resources.files("beaverlab").joinpath("data", "maps", f"{name}.map").read_text()
    return parse_mapping(text)


# ---------------------------------------------------------------------------
# Iteration


class TrajStatus(str, enum.Enum):
    UNDEFINED = "reached-undefined"
    REACHED = "reached-target"
    CYCLE = "cycle-detected"
    CAP = "cap"


@dataclass(frozen=True)
class Residue:
    """A value known only modulo ``prime**level``."""

    value: int
    prime: int
    level: int

    def __str__(self) -> str:
        return f"{self.value} mod {self.prime}^{self.level}"


@dataclass(frozen=True)
class Pending:
    """``(a * p^k + b) / c`` left unevaluated because it is too large."""

    a: int
    b: int
    c: int
    base: int
    k: int
    digits: int

    def __str__(self) -> str:
        return f"({self.a}*{self.base}^{self.k}{self.b:+d})/{self.c}"


@dataclass
class Trajectory:
    start: object
    values: list
    status: TrajStatus
    h: Optional[int] = None
    cycle_length: Optional[int] = None
    branches: list[int] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        """Number of applications performed."""
        return len(self.values) - 1


def iterate(
    mapping: Union[CollatzMapping, ParamCollatzMapping, PatternMapping],
    start,
    max_iters: int = 10**6,
    until=None,
) -> Trajectory:
    """Iterate until an undefined branch, ``until``, a cycle or the cap.

    ``h`` counts applications up to and including the undefined one, so
    ``values`` holds ``g^0(x) .. g^(h-1)(x)``.
    """
    first = start[0] if isinstance(start, tuple) else start
    if first < 0 or (isinstance(start, tuple) and min(start) < 0):
        raise ValueError("starting value must be nonnegative")
    values = [start]
    seen: Optional[dict] = {start: 0}
    # Brent's method once the memo is full
    tortoise, power, lam = None, 1, 0
    v = start
    while True:
        if until is not None and v == until:
            return Trajectory(start, values, TrajStatus.REACHED)
        nxt = mapping(v)
        if nxt is None:
            return Trajectory(start, values, TrajStatus.UNDEFINED, h=len(values))
        if len(values) - 1 >= max_iters:
            return Trajectory(start, values, TrajStatus.CAP)
        v = nxt
        values.append(v)
        if seen is not None:
            if v in seen:
                return Trajectory(start, values, TrajStatus.CYCLE, cycle_length=len(values) - 1 - seen[v])
            seen[v] = len(values) - 1
            if len(seen) > SET_MEMO_LIMIT:
                seen, tortoise = None, v
            continue
        lam += 1
        if v == tortoise:
            return Trajectory(start, values, TrajStatus.CYCLE, cycle_length=lam)
        if lam == power:
            tortoise, power, lam = v, power * 2, 0


def iterate_exponential(
    mapping: ExpCollatzMapping,
    start: int,
    max_iters: int = 1000,
    size_cap_digits: int = 10**7,
) -> Trajectory:
    """Explicit iteration; stops with ``CAP`` before materializing a value
    whose estimated digit count exceeds ``size_cap_digits``."""
    if start < 0:
        raise ValueError("starting value must be nonnegative")
    values: list = [start]
    branches: list[int] = []
    v = start
    while True:
        i = v % mapping.d
        branches.append(i)
        if v in mapping.special:
            nxt = mapping.special[v]
        else:
            br = mapping.branches[i]
            if br is None:
                return Trajectory(start, values, TrajStatus.UNDEFINED, h=len(values), branches=branches)
            k = v // mapping.d
            digits = _exp_digits(br, mapping.base, k)
            if digits > size_cap_digits:
                values.append(Pending(*br, mapping.base, k, digits))
                return Trajectory(start, values, TrajStatus.CAP, branches=branches)
            nxt = _exp_value(br, mapping.base, k)
        if len(values) - 1 >= max_iters:
            return Trajectory(start, values, TrajStatus.CAP, branches=branches)
        v = nxt
        values.append(v)


# ---------------------------------------------------------------------------
# Residue iteration


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def multiplicative_order(a: int, m: int) -> int:
    """Least ``t >= 1`` with ``a^t = 1 (mod m)``."""
    if m < 1 or math.gcd(a, m) != 1:
        raise ValueError(f"{a} is not a unit modulo {m}")
    if m == 1:
        return 1
    phi = 1
    for p, e in _factor(m).items():
        phi *= p ** (e - 1) * (p - 1)
    order = phi
    for p in _factor(phi):
        while order % p == 0 and pow(a, order // p, m) == 1:
            order //= p
    return order


def _prime_power(n: int) -> Optional[tuple[int, int]]:
    f = _factor(n)
    if len(f) != 1:
        return None
    return next(iter(f.items()))


def _valuation(n: int, p: int) -> int:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class ResiduePlan:
    """Precision bookkeeping for residue iteration of an exponential mapping."""

    prime: int
    e: int  # d = prime**e
    c_exp: dict[int, int]  # branch -> f with c_i = prime**f

    @classmethod
    def for_mapping(cls, mapping: ExpCollatzMapping) -> "ResiduePlan":
        pp = _prime_power(mapping.d)
        if pp is None:
            raise ValueError("residue mode needs a prime-power modulus")
        prime, e = pp
        if mapping.base % prime == 0:
            raise ValueError("residue mode needs the base coprime to the modulus")
        c_exp = {}
        for i, br in enumerate(mapping.branches):
            if br is None:
                continue
            c = br[2]
            f = _valuation(c, prime)
            if prime**f != c:
                raise ValueError(f"branch {i}: divisor {c} is not a power of {prime}")
            c_exp[i] = f
        return cls(prime, e, c_exp)

    def order_exponent(self, base: int, level: int) -> int:
        """``t`` with ``ord(base, prime^level) = prime^t``."""
        order = multiplicative_order(base, self.prime**level)
        t = _valuation(order, self.prime)
        if self.prime**t != order:
            raise ValueError(f"order of {base} modulo {self.prime}^{level} is not a power of {self.prime}")
        return t

    def next_level(self, base: int, branch: int, level: int) -> int:
        """Largest output level reachable from an input known to ``level``."""
        f = self.c_exp[branch]
        out = level
        while out >= 0:
            if self.e + self.order_exponent(base, out + f) <= level:
                return out
            out -= 1
        return -1


def residue_iterate_exponential(
    mapping: ExpCollatzMapping,
    start: int,
    max_iters: int = 1000,
    precision: int = 64,
    shadow_digits: int = 10**5,
) -> Trajectory:
    """Iterate on residues modulo ``prime^level`` without materializing values.

    Each step needs the exponent modulo the order of the base, which costs
    precision.  While the explicit value stays below ``shadow_digits`` digits
    it is computed alongside: every residue step is checked against it and
    the level is refreshed to ``precision``.  Once the value is too large
    the level only decreases, and :class:`PrecisionExhausted` is raised
    when it can no longer select a branch.
    """
    if start < 0:
        raise ValueError("starting value must be nonnegative")
    plan = ResiduePlan.for_mapping(mapping)
    prime, level = plan.prime, precision
    r = start % prime**level
    shadow: Optional[int] = start
    values: list = [Residue(r, prime, level)]
    branches: list[int] = []
    while True:
        if level < plan.e:
            # the undefined classes may still be recognizable
            step = prime**level
            if all(mapping.branches[i] is None for i in range(r % step, mapping.d, step)):
                return Trajectory(start, values, TrajStatus.UNDEFINED, h=len(values), branches=branches)
            raise PrecisionExhausted(f"precision exhausted after {len(values) - 1} iterations")
        i = r % mapping.d
        branches.append(i)
        if shadow is not None and shadow in mapping.special:
            shadow = mapping.special[shadow]
            r = shadow % prime**precision
            level = precision
            values.append(Residue(r, prime, level))
            continue
        br = mapping.branches[i]
        if br is None:
            return Trajectory(start, values, TrajStatus.UNDEFINED, h=len(values), branches=branches)
        if len(values) - 1 >= max_iters:
            return Trajectory(start, values, TrajStatus.CAP, branches=branches)
        nlevel = plan.next_level(mapping.base, i, level)
        if nlevel < 0:
            raise PrecisionExhausted(f"precision exhausted after {len(values) - 1} iterations")
        a, b, c = br
        f = plan.c_exp[i]
        t = plan.order_exponent(mapping.base, nlevel + f)
        k_res = ((r - i) // mapping.d) % prime**t
        big = prime ** (nlevel + f)
        x = (a * pow(mapping.base, k_res, big) + b) % big
        if x % c:
            raise NonIntegralError(f"branch {i} does not divide exactly")
        r, level = x // c, nlevel
        if shadow is not None:
            k = shadow // mapping.d
            if _exp_digits(br, mapping.base, k) > shadow_digits:
                shadow = None
            else:
                shadow = _exp_value(br, mapping.base, k)
                if shadow % prime**level != r:
                    raise AssertionError(f"residue {r} disagrees with explicit value modulo {prime}^{level}")
                r, level = shadow % prime**precision, precision
        values.append(Residue(r, prime, level))


# ---------------------------------------------------------------------------
# M5 residue chain


def m5_u(n: int) -> int:
    return (3 ** (n + 2) - 5) // 2


@dataclass(frozen=True)
class ChainLink:
    q: int  # surrogate quotient, exact only modulo 2**level
    r: int
    level: int


def m5_residue_trace(start: tuple[int, int], levels: int) -> list[ChainLink]:
    """Residue chain of ``C(n, a)``: each link is ``(q', r)`` with
    ``3u + 3a - 1 = 4q' + r`` computed from ``u_{q'}`` modulo ``2^(level+1)``.

    The first link is exact.  The chain stops at ``r`` in ``{0, 2}``.
    ``levels`` is the precision (in bits) of the first quotient.
    """
    n, a = start
    if n < 1 or a not in (1, 3):
        raise ValueError("start must be (n, a) with n >= 1 and a in {1, 3}")
    q, r = divmod(3 * n + 3 * a - 1, 4)
    chain = [ChainLink(q, r, levels)]
    k = levels
    while r in (1, 3):
        if k < 1:
            raise PrecisionExhausted(f"levels exhausted after {len(chain)} links")
        u = pow(3, q + 2, 2 ** (k + 2))
        u = ((u - 5) // 2) % 2 ** (k + 1)
        q, r = divmod(3 * u + 3 * r - 1, 4)
        k -= 1
        chain.append(ChainLink(q, r, k))
    return chain


def m5_explicit_trace(start: tuple[int, int], max_q: int = 10**5) -> list[tuple[int, int]]:
    """Exact ``(q, r)`` chain while ``u_q`` stays small enough to compute."""
    n, a = start
    out = []
    r = a
    while True:
        q, r = divmod(3 * n + 3 * r - 1, 4)
        out.append((q, r))
        if r not in (1, 3) or q > max_q:
            return out
        n = m5_u(q)
