"""Exact real arithmetic over arbitrary-precision rationals.

A real is a memoized fast Cauchy sequence: a function from a precision index
n to a rational a_n with |a_n - a_{n+1}| <= 2^-n.  The limit is then pinned
inside [a_n - 2^(1-n), a_n + 2^(1-n)], which is what `enclosure` returns.
Every derived operation (arithmetic, sqrt/log/exp, reciprocal) produces a
sequence that keeps this contract by evaluating its inputs at shifted
precision, so precision requests never lie.

Refinements that cannot terminate on all inputs (separating a value from
zero, certifying a domain, comparing two reals) are fuel-bounded: they raise
`Diverged` or answer `Comparison.UNDECIDED` instead of spinning forever.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import isqrt
from typing import Callable, Optional

Rational = Fraction

DEFAULT_FUEL = 64


def default_fuel() -> int:
    """Fuel bound used when a caller does not supply one.

    Overridable through the CDIST_DEFAULT_FUEL environment variable.
    """
    raw = os.environ.get("CDIST_DEFAULT_FUEL")
    if raw:
        try:
            value = int(raw)
            if value > 0:
                return value
        except ValueError:
            pass
    return DEFAULT_FUEL


class Diverged(Exception):
    """A fuel-bounded computation gave up.  `reason` says which loop."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class DomainError(Exception):
    """A partial operation was certifiably applied outside its domain."""


class FastCauchyViolation(Exception):
    """Debug-mode check caught |a_n - a_{n+1}| > 2^-n."""


def parse_rational(text: str) -> Fraction:
    """Parse "p/q", integer, or decimal notation into an exact rational."""
    return Fraction(text.strip())


def format_rational(q: Fraction) -> str:
    return "%d/%d" % (q.numerator, q.denominator)


@dataclass(frozen=True)
class Interval:
    """Closed rational interval, used as a certified enclosure."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, q) -> bool:
        return self.lo <= q <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def to_json(self, precision: int) -> dict:
        return {
            "lo": format_rational(self.lo),
            "hi": format_rational(self.hi),
            "precision": precision,
        }


class CReal:
    """A real as a memoized fast Cauchy sequence of rationals.

    The wrapped function is the caller's promise; `debug_check=True` makes
    every query also probe the next index and raise FastCauchyViolation on a
    broken step.  Memoized values never change, so repeat queries (from any
    thread) return identical rationals.

    `exact` optionally records that the value is a known rational; purely an
    internal fast path for exact rational pipelines, never affecting the
    enclosure contract.
    """

    __slots__ = ("_fn", "_memo", "_lock", "_debug", "exact")

    def __init__(self, fn: Callable[[int], Fraction], debug_check: bool = False,
                 exact: Optional[Fraction] = None):
        self._fn = fn
        self._memo: dict[int, Fraction] = {}
        self._lock = threading.RLock()
        self._debug = debug_check
        self.exact = exact

    def approx(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError("precision index must be nonnegative")
        with self._lock:
            cached = self._memo.get(n)
            if cached is None:
                cached = Fraction(self._fn(n))
                self._memo[n] = cached
            if self._debug:
                succ = self._memo.get(n + 1)
                if succ is None:
                    succ = Fraction(self._fn(n + 1))
                    self._memo[n + 1] = succ
                if abs(cached - succ) > Fraction(1, 2 ** n):
                    raise FastCauchyViolation(
                        "|a_%d - a_%d| = %s > 2^-%d"
                        % (n, n + 1, abs(cached - succ), n))
            return cached

    def enclosure(self, n: int) -> Interval:
        a = self.approx(n)
        r = Fraction(2, 2 ** n)
        return Interval(a - r, a + r)

    def __repr__(self):
        if self.exact is not None:
            return "CReal(exact=%s)" % (self.exact,)
        return "CReal(?)"


def make_creal(fn: Callable[[int], Fraction], debug_check: bool = False) -> CReal:
    """Wrap a fast Cauchy sequence.  The fast Cauchy property is the
    caller's obligation; pass debug_check=True to have it spot-checked."""
    return CReal(fn, debug_check=debug_check)


def from_rational(q) -> CReal:
    q = Fraction(q)
    return CReal(lambda n: q, exact=q)


def from_int(k: int) -> CReal:
    return from_rational(Fraction(k))


def approx(x: CReal, n: int) -> Fraction:
    return x.approx(n)


def enclosure(x: CReal, n: int) -> Interval:
    return x.enclosure(n)


def _ceil_log2(v: Fraction) -> int:
    """Smallest s with 2^s >= v, for v > 0."""
    s = 0
    while (1 << s) < v:
        s += 1
    return s


def _mag_shift(x: CReal) -> int:
    iv = x.enclosure(0)
    return _ceil_log2(max(abs(iv.lo), abs(iv.hi)) + 1)


def _linear_pair(x: CReal, y: CReal, combine, exact) -> CReal:
    # Each operand is evaluated at least two indices ahead, plus a
    # magnitude-derived margin; any nonnegative extra keeps the result fast
    # Cauchy, and the margin keeps operand evaluation depth tied to the
    # operand rather than to its position in the expression.
    state: dict[str, tuple[int, int]] = {}

    def ap(n: int) -> Fraction:
        shifts = state.get("shifts")
        if shifts is None:
            shifts = (2 + _mag_shift(x), 2 + _mag_shift(y))
            state["shifts"] = shifts
        return combine(x.approx(n + shifts[0]), y.approx(n + shifts[1]))

    return CReal(ap, exact=exact)


def add(x: CReal, y: CReal) -> CReal:
    if x.exact is not None and y.exact is not None:
        return from_rational(x.exact + y.exact)
    return _linear_pair(x, y, lambda a, b: a + b, None)


def sub(x: CReal, y: CReal) -> CReal:
    if x.exact is not None and y.exact is not None:
        return from_rational(x.exact - y.exact)
    return _linear_pair(x, y, lambda a, b: a - b, None)


def neg(x: CReal) -> CReal:
    exact = -x.exact if x.exact is not None else None
    return CReal(lambda n: -x.approx(n), exact=exact)


def mul(x: CReal, y: CReal) -> CReal:
    # Magnitude bounds come from the index-0 enclosures; shifting both
    # factors by ceil(log2(Bx+By+2)) + 2 keeps the product fast Cauchy.
    exact = None
    if x.exact is not None and y.exact is not None:
        exact = x.exact * y.exact
    state: dict[str, int] = {}

    def ap(n: int) -> Fraction:
        shift = state.get("shift")
        if shift is None:
            ex, ey = x.enclosure(0), y.enclosure(0)
            bx = max(abs(ex.lo), abs(ex.hi))
            by = max(abs(ey.lo), abs(ey.hi))
            shift = _ceil_log2(bx + by + 2) + 2
            state["shift"] = shift
        return x.approx(n + shift) * y.approx(n + shift)

    return CReal(ap, exact=exact)


def abs_creal(x: CReal) -> CReal:
    exact = abs(x.exact) if x.exact is not None else None
    return CReal(lambda n: abs(x.approx(n)), exact=exact)


def arith(op: str, x: CReal, y: Optional[CReal] = None) -> CReal:
    if op == "add":
        return add(x, y)
    if op == "sub":
        return sub(x, y)
    if op == "mul":
        return mul(x, y)
    if op == "neg":
        return neg(x)
    raise ValueError("unknown arithmetic op %r" % (op,))


def _from_interval_fn(fn: Callable[[int], Interval]) -> CReal:
    """Build a CReal from a certified interval oracle.

    fn(n) must return an interval of width <= 2^-n containing the value;
    taking midpoints one index ahead yields a fast Cauchy sequence."""
    return CReal(lambda n: fn(n + 1).midpoint)


# ---------------------------------------------------------------------------
# Certified rational kernels for sqrt / exp / log.
# ---------------------------------------------------------------------------

def sqrt_bounds(q: Fraction, bits: int) -> Interval:
    """Rational bracket of sqrt(q) for q >= 0, width <= 2^-bits."""
    if q < 0:
        raise DomainError("sqrt of negative rational")
    if q == 0:
        return Interval(Fraction(0), Fraction(0))
    p, r = q.numerator, q.denominator
    scale = r << bits          # lower = isqrt(p*r*4^bits) / (r*2^bits)
    root = isqrt(p * r << (2 * bits))
    return Interval(Fraction(root, scale), Fraction(root + 1, scale))


def _scaled(q: Fraction, scale: int) -> tuple[int, int]:
    """Floor/ceil of q*scale as integers."""
    num = q.numerator * scale
    den = q.denominator
    lo = num // den
    return lo, lo if lo * den == num else lo + 1


def _exp_nonneg_bounds(q: Fraction, bits: int) -> Interval:
    """Bracket of e^q for q >= 0, width <= 2^-bits.

    Fixed-point with directed rounding: halve the argument until it is
    <= 1/2, run the Taylor series on scaled integers, square the interval
    back up.  The guard bits absorb both the rounding ulps and the error
    growth of the squarings.
    """
    if q == 0:
        return Interval(Fraction(1), Fraction(1))
    j = 0
    y = q
    while y > Fraction(1, 2):
        y /= 2
        j += 1
    ceil_q = -(-q.numerator // q.denominator)
    guard = bits + 8 + 2 * j + 2 * max(ceil_q, 1)
    scale = 1 << guard
    y_lo, y_hi = _scaled(y, scale)
    term_lo = term_hi = scale
    total_lo = total_hi = scale
    k = 1
    while True:
        term_lo = (term_lo * y_lo) // (k * scale)
        term_hi = -((-term_hi * y_hi) // (k * scale)) + 1
        total_lo += term_lo
        total_hi += term_hi
        if 4 * term_hi <= k + 1:   # remainder <= 2*term*y/(k+1), y <= 1/2
            break
        k += 1
    total_hi += -((-2 * term_hi * y_hi) // ((k + 1) * scale)) + 1
    for _ in range(j):
        total_lo = (total_lo * total_lo) // scale
        total_hi = -((-total_hi * total_hi) // scale) + 1
    return Interval(Fraction(total_lo, scale), Fraction(total_hi + 1, scale))


def exp_bounds(q: Fraction, bits: int) -> Interval:
    """Rational bracket of e^q, width <= 2^-bits."""
    if q >= 0:
        return _exp_nonneg_bounds(q, bits)
    inner = _exp_nonneg_bounds(-q, bits)   # e^|q| >= 1 so inversion shrinks
    return Interval(1 / inner.hi, 1 / inner.lo)


_LN2_CACHE: dict[int, Interval] = {}


def _atanh_series(z: Fraction, bits: int) -> Interval:
    """Bracket of atanh(z) for 0 <= z <= 1/2 via its odd power series,
    computed on scaled integers with directed rounding."""
    if z == 0:
        return Interval(Fraction(0), Fraction(0))
    guard = bits + 8
    scale = 1 << guard
    z_lo, z_hi = _scaled(z, scale)
    z2_lo = (z_lo * z_lo) // scale
    z2_hi = -((-z_hi * z_hi) // scale) + 1
    power_lo, power_hi = z_lo, z_hi
    total_lo = total_hi = 0
    k = 0
    while True:
        total_lo += power_lo // (2 * k + 1)
        total_hi += -((-power_hi) // (2 * k + 1)) + 1
        power_lo = (power_lo * z2_lo) // scale
        power_hi = -((-power_hi * z2_hi) // scale) + 1
        # remainder <= power / ((2k+3) (1 - z^2)) <= 2 * power for z <= 1/2
        rem = -((-2 * power_hi) // (2 * k + 3))
        if rem <= 4:
            return Interval(Fraction(total_lo, scale),
                            Fraction(total_hi + rem + 1, scale))
        k += 1


def _ln2_bounds(bits: int) -> Interval:
    cached = _LN2_CACHE.get(bits)
    if cached is None:
        inner = _atanh_series(Fraction(1, 3), bits + 1)
        cached = Interval(2 * inner.lo, 2 * inner.hi)
        _LN2_CACHE[bits] = cached
    return cached


def log_bounds(q: Fraction, bits: int) -> Interval:
    """Rational bracket of ln(q) for q > 0, width <= 2^-bits."""
    if q <= 0:
        raise DomainError("log of nonpositive rational")
    e = q.numerator.bit_length() - q.denominator.bit_length()
    m = q / Fraction(2) ** e
    if m >= 2:
        m /= 2
        e += 1
    elif m < 1:
        m *= 2
        e -= 1
    # now m in [1, 2); ln q = e*ln2 + 2*atanh((m-1)/(m+1))
    z = (m - 1) / (m + 1)
    series = _atanh_series(z, bits + 2)
    slo, shi = 2 * series.lo, 2 * series.hi
    if e == 0:
        return Interval(slo, shi)
    ln2 = _ln2_bounds(bits + 2 + abs(e).bit_length())
    if e > 0:
        return Interval(e * ln2.lo + slo, e * ln2.hi + shi)
    return Interval(e * ln2.hi + slo, e * ln2.lo + shi)


def _refine(x: CReal, n: int, image, usable, certify_bad, fuel: Optional[int],
            what: str, state: Optional[dict] = None) -> Fraction:
    """Shared refinement loop for unary interval extensions.

    Tightens x's enclosure until `usable` admits it, maps it through
    `image`, and stops once the output interval has width <= 2^-n.
    `certify_bad` turns a decided domain violation into DomainError.
    `state` remembers how far past the output precision the input had to be
    refined, so later queries skip the ramp-up.
    """
    limit = default_fuel() if fuel is None else fuel
    k = max(n, 0)
    if state is not None:
        k = max(k, n + state.get("lead", 0))
    target = Fraction(1, 2 ** n)
    for _ in range(limit):
        iv = x.enclosure(k)
        if certify_bad(iv):
            raise DomainError("%s: argument certified outside domain" % what)
        if usable(iv):
            out = image(iv)
            if out.width <= target:
                if state is not None:
                    state["lead"] = max(state.get("lead", 0), k - n)
                return out.midpoint
            # jump by the number of bits still missing
            deficit = out.width / target
            step = 1
            while (1 << step) < deficit and step < 24:
                step += 1
            k += step
            continue
        k += 1
    raise Diverged("%s: refinement fuel exhausted" % what)


def sqrt_c(x: CReal, fuel: Optional[int] = None) -> CReal:
    state: dict = {}

    def ap(n: int) -> Fraction:
        def image(iv: Interval) -> Interval:
            lo = max(iv.lo, Fraction(0))
            return Interval(sqrt_bounds(lo, n + 3).lo, sqrt_bounds(iv.hi, n + 3).hi)
        return _refine(x, n, image,
                       usable=lambda iv: True,
                       certify_bad=lambda iv: iv.hi < 0,
                       fuel=fuel, what="sqrt", state=state)
    return CReal(ap)


def log_c(x: CReal, fuel: Optional[int] = None) -> CReal:
    state: dict = {}

    def ap(n: int) -> Fraction:
        def image(iv: Interval) -> Interval:
            return Interval(log_bounds(iv.lo, n + 3).lo, log_bounds(iv.hi, n + 3).hi)
        return _refine(x, n, image,
                       usable=lambda iv: iv.lo > 0,
                       certify_bad=lambda iv: iv.hi <= 0,
                       fuel=fuel, what="log", state=state)
    return CReal(ap)


def exp_c(x: CReal, fuel: Optional[int] = None) -> CReal:
    state: dict = {}

    def ap(n: int) -> Fraction:
        def image(iv: Interval) -> Interval:
            return Interval(exp_bounds(iv.lo, n + 3).lo, exp_bounds(iv.hi, n + 3).hi)
        return _refine(x, n, image,
                       usable=lambda iv: True,
                       certify_bad=lambda iv: False,
                       fuel=fuel, what="exp", state=state)
    return CReal(ap)


def transcendental(op: str, x: CReal, fuel: Optional[int] = None) -> CReal:
    if op == "sqrt":
        return sqrt_c(x, fuel)
    if op == "log":
        return log_c(x, fuel)
    if op == "exp":
        return exp_c(x, fuel)
    raise ValueError("unknown transcendental op %r" % (op,))


def reciprocal(x: CReal, fuel: Optional[int] = None) -> CReal:
    if x.exact is not None:
        if x.exact == 0:
            return CReal(lambda n: (_ for _ in ()).throw(
                Diverged("reciprocal: argument is zero")))
        q = 1 / x.exact
        return from_rational(q)

    state: dict = {}

    def ap(n: int) -> Fraction:
        def image(iv: Interval) -> Interval:
            return Interval(1 / iv.hi, 1 / iv.lo)
        return _refine(x, n, image,
                       usable=lambda iv: iv.lo > 0 or iv.hi < 0,
                       certify_bad=lambda iv: False,
                       fuel=fuel, what="reciprocal", state=state)
    return CReal(ap)


class Comparison(Enum):
    LESS = "less"
    GREATER = "greater"
    UNDECIDED = "undecided"


def lt_semi(x: CReal, y: CReal, fuel: Optional[int] = None) -> Comparison:
    """Semi-decide x < y by refining both enclosures in lockstep.

    UNDECIDED is a value, not an error; callers treat it as the divergence
    that true equality would produce.
    """
    if x.exact is not None and y.exact is not None:
        if x.exact < y.exact:
            return Comparison.LESS
        if x.exact > y.exact:
            return Comparison.GREATER
        return Comparison.UNDECIDED
    limit = default_fuel() if fuel is None else fuel
    for k in range(limit):
        ix, iy = x.enclosure(k), y.enclosure(k)
        if ix.hi < iy.lo:
            return Comparison.LESS
        if iy.hi < ix.lo:
            return Comparison.GREATER
    return Comparison.UNDECIDED


@dataclass(frozen=True)
class DenseEnum:
    """A countable dense subset with a computable metric on it."""

    enumerate: Callable[[int], Fraction]
    metric: Callable[[Fraction, Fraction], CReal]


def dyadic_enum() -> DenseEnum:
    """The dyadic rationals, enumerated as 0 then, per level n >= 1, the
    fractions m/2^n with |m| <= 2^n * n that are new at that level (odd
    numerator, or magnitude beyond the previous level's range)."""
    values: list[Fraction] = [Fraction(0)]
    level = [0]

    def extend():
        level[0] += 1
        n = level[0]
        scale = 2 ** n
        for m in range(-scale * n, scale * n + 1):
            if m % 2 != 0 or abs(m) > scale * (n - 1):
                values.append(Fraction(m, scale))

    def enum(i: int) -> Fraction:
        while i >= len(values):
            extend()
        return values[i]

    def metric(a, b) -> CReal:
        return from_rational(abs(Fraction(a) - Fraction(b)))

    return DenseEnum(enumerate=enum, metric=metric)


def _machin_pi_interval(n: int) -> Interval:
    """Bracket of pi of width <= 2^-n from 16*atan(1/5) - 4*atan(1/239)."""

    def atan_inv(k: int, target: Fraction) -> Interval:
        # alternating series: error bounded by the first omitted term
        total = Fraction(0)
        i = 0
        while True:
            term = Fraction(1, (2 * i + 1) * k ** (2 * i + 1))
            total += term if i % 2 == 0 else -term
            nxt = Fraction(1, (2 * i + 3) * k ** (2 * i + 3))
            if nxt <= target:
                return Interval(total - nxt, total + nxt)
            i += 1

    budget = Fraction(1, 2 ** (n + 6))
    a5 = atan_inv(5, budget)
    a239 = atan_inv(239, budget)
    return Interval(16 * a5.lo - 4 * a239.hi, 16 * a5.hi - 4 * a239.lo)


_PI: Optional[CReal] = None


def pi() -> CReal:
    global _PI
    if _PI is None:
        _PI = _from_interval_fn(_machin_pi_interval)
    return _PI
