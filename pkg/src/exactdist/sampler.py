"""Bit-tape samplers.

A sampler is a deterministic function from an infinite tape of fair coin
flips to a value; all randomness enters through the tape interface.  Tapes
track every index they serve, so the number of bits a computation consumed
to reach a given output precision is observable after the fact.

Sequencing splits the tape into its even- and odd-indexed halves: the first
sampler draws from one half, the continuation from the other, so the two
read disjoint source indices.  The drawn value is handed to the continuation
unforced: reals are lazy by construction (precision-indexed), and discrete
draws are delivered as memoized thunks forced on first use.  Natural-number
results unfold as lazy successor chains, one tape bit per step, so a partial
run can already certify facts like "this value exceeds 3".

The distinguished bottom sampler (`bot_samp`) models the total failure to
provide a sampler; sequencing is strict in it.  A sampler that fuel-exhausts
mid-run raises `Diverged` too, distinguished only by its reason tag.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional

from .exactreal import (
    Comparison,
    CReal,
    Diverged,
    add,
    default_fuel,
    from_int,
    from_rational,
    log_c,
    lt_semi,
    mul,
    neg,
    reciprocal,
    sqrt_c,
    sub,
)


class OutOfBits(Exception):
    """A finite-prefix tape was asked for an index beyond its length."""


class Thunk:
    """Memoized deferred computation.  Successful results are cached;
    exceptions are re-raised on each force (they are deterministic)."""

    __slots__ = ("_fn", "_value", "_done")

    def __init__(self, fn: Callable[[], object]):
        self._fn = fn
        self._value = None
        self._done = False

    def force(self):
        if not self._done:
            self._value = self._fn()
            self._done = True
            self._fn = None
        return self._value


def force(v):
    """Resolve nested thunks to the underlying value."""
    while isinstance(v, Thunk):
        v = v.force()
    return v


class LazyNat:
    """A natural number as `count` known successors plus an unresolved tail.

    The tail (a thunk, another LazyNat, or a plain int) is only forced when
    a consumer needs to look deeper, so membership in a bounded set can be
    decided after peeling finitely many layers.
    """

    __slots__ = ("count", "tail")

    def __init__(self, count: int, tail=None):
        self.count = count
        self.tail = tail

    def __repr__(self):
        return "LazyNat(%d+?)" % self.count


def nat_succ(v):
    """Successor that does not force its argument."""
    if isinstance(v, bool):
        return int(v) + 1
    if isinstance(v, int):
        return v + 1
    return LazyNat(1, v)


def nat_resolve(v, max_steps: Optional[int] = None) -> int:
    """Fully resolve a lazy natural, forcing tape reads as needed."""
    limit = default_fuel() if max_steps is None else max_steps
    total = 0
    cur = v
    while True:
        if isinstance(cur, bool):
            cur = int(cur)
        if isinstance(cur, int):
            return total + cur
        if total > limit:
            raise Diverged("lazy natural exceeded %d successors" % limit)
        if isinstance(cur, LazyNat):
            total += cur.count
            cur = 0 if cur.tail is None else cur.tail
            continue
        if isinstance(cur, Thunk):
            cur = cur.force()
            continue
        raise TypeError("not a natural: %r" % (cur,))


def nat_exceeds(v, bound: int):
    """Decide `value > bound` with minimal forcing.

    Returns (True, None) or (False, resolved_value); peels at most bound+1
    successor layers.
    """
    total = 0
    cur = v
    while True:
        if isinstance(cur, bool):
            cur = int(cur)
        if isinstance(cur, int):
            n = total + cur
            return (n > bound, None if n > bound else n)
        if total > bound:
            return (True, None)
        if isinstance(cur, LazyNat):
            total += cur.count
            cur = 0 if cur.tail is None else cur.tail
            continue
        if isinstance(cur, Thunk):
            cur = cur.force()
            continue
        raise TypeError("not a natural: %r" % (cur,))


# ---------------------------------------------------------------------------
# Tapes
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix_bit(seed: int, index: int) -> bool:
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return bool(z & 1)


class _TapeRoot:
    __slots__ = ("source", "length", "reads")

    def __init__(self, source: Callable[[int], bool], length: Optional[int]):
        self.source = source
        self.length = length
        self.reads: set[int] = set()


class BitTape:
    """An infinite (or finite-prefix) bit source with read tracking.

    Splitting produces two views onto the same root: the even view reads its
    index n as root index 2n, the odd view as 2n+1.  Views share the root's
    read record, so the full set of consumed source indices stays visible.
    """

    __slots__ = ("_root", "_mul", "_off")

    def __init__(self, root: _TapeRoot, mul: int = 1, off: int = 0):
        self._root = root
        self._mul = mul
        self._off = off

    @classmethod
    def from_function(cls, fn: Callable[[int], bool]) -> "BitTape":
        return cls(_TapeRoot(lambda i: bool(fn(i)), None))

    @classmethod
    def from_seed(cls, seed: int) -> "BitTape":
        seed &= _MASK64
        return cls(_TapeRoot(lambda i: _splitmix_bit(seed, i), None))

    @classmethod
    def from_bits(cls, bits) -> "BitTape":
        if isinstance(bits, str):
            vals = [c == "1" for c in bits.strip()]
        else:
            vals = [bool(b) for b in bits]
        return cls(_TapeRoot(lambda i: vals[i], len(vals)))

    @classmethod
    def from_prefix_int(cls, word: int, length: int) -> "BitTape":
        return cls(_TapeRoot(lambda i: bool((word >> i) & 1), length))

    def read(self, i: int) -> bool:
        j = self._mul * i + self._off
        root = self._root
        if root.length is not None and j >= root.length:
            raise OutOfBits("index %d beyond %d-bit prefix" % (j, root.length))
        root.reads.add(j)
        return root.source(j)

    def split(self) -> tuple["BitTape", "BitTape"]:
        m, o = self._mul, self._off
        return (BitTape(self._root, 2 * m, o), BitTape(self._root, 2 * m, m + o))

    def even(self) -> "BitTape":
        return self.split()[0]

    def odd(self) -> "BitTape":
        return self.split()[1]

    @property
    def reads(self) -> frozenset[int]:
        return frozenset(self._root.reads)

    @property
    def bits_read(self) -> int:
        return len(self._root.reads)


def split(tape: BitTape) -> tuple[BitTape, BitTape]:
    return tape.split()


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

class Sampler:
    """Deterministic function from a bit tape to a value.

    `is_bottom` marks the least sampler (the one that fails to exist at
    all); `bind` is strict in it, matching the distinction between a missing
    sampler and a sampler whose output value never resolves.
    """

    __slots__ = ("_run", "is_bottom")

    def __init__(self, run_fn: Callable[[BitTape], object], is_bottom: bool = False):
        self._run = run_fn
        self.is_bottom = is_bottom

    def run(self, tape: BitTape):
        return self._run(tape)


def run(s: Sampler, tape: BitTape):
    return s.run(tape)


def ret(x) -> Sampler:
    """Constant sampler: reads no bits, returns x unforced."""
    return Sampler(lambda tape: x)


def bind(s: Sampler, f: Callable[[object], Sampler]) -> Sampler:
    """Sequence two samplers through an even/odd tape split.

    The draw from `s` is delivered to `f` as a memoized thunk, so a
    continuation that discards it never forces the draw's work beyond the
    split itself.  A bottom first component diverges before any bit is read.
    """

    def go(tape: BitTape):
        if s.is_bottom:
            raise Diverged("bottom sampler")
        te, to = tape.split()
        pending = Thunk(lambda: s.run(te))
        return f(pending).run(to)

    return Sampler(go)


def _suspended(mk: Callable[[], Sampler]) -> Sampler:
    """Sampler built on demand at run time (for recursive definitions)."""
    return Sampler(lambda tape: mk().run(tape))


def _failing(reason: str) -> Sampler:
    def go(tape):
        raise Diverged(reason)
    return Sampler(go)


def bot_samp() -> Sampler:
    """The missing sampler: running it diverges before touching the tape."""
    return Sampler(_bot_run, is_bottom=True)


def _bot_run(tape):
    raise Diverged("bottom sampler")


def bot_samp_bot() -> Sampler:
    """A sampler that happily returns a value no precision query survives."""

    def never(n: int) -> Fraction:
        raise Diverged("value never refines")

    return Sampler(lambda tape: CReal(never))


def std_uniform() -> Sampler:
    """Uniform on (0,1): the approximation at index n bisects the unit
    interval n+1 times (a true bit keeps the left half) and returns the
    final midpoint, reading exactly bits 0..n."""

    def go(tape: BitTape) -> CReal:
        def ap(n: int) -> Fraction:
            lo, hi = 0, 1 << (n + 1)
            for m in range(n + 1):
                mid = (lo + hi) // 2
                if tape.read(m):
                    hi = mid
                else:
                    lo = mid
            return Fraction(lo + hi, 1 << (n + 2))
        return CReal(ap)

    return Sampler(go)


def uniform(a, b, fuel: Optional[int] = None) -> Sampler:
    """Uniform on (a,b) by shifting and scaling a standard uniform draw.

    Rational endpoints scale the bisection midpoints directly (with a
    precision shift as soon as the span exceeds 4, preserving fast Cauchy);
    general endpoints go through certified arithmetic after a < b has been
    refined to certainty.
    """
    a_rat = a if isinstance(a, (int, Fraction)) else a.exact
    b_rat = b if isinstance(b, (int, Fraction)) else b.exact
    base = std_uniform()
    if a_rat is not None and b_rat is not None:
        a_rat, b_rat = Fraction(a_rat), Fraction(b_rat)
        if not a_rat < b_rat:
            return _failing("uniform: empty interval")
        span = b_rat - a_rat
        shift = 0
        while span > (1 << (shift + 2)):
            shift += 1

        def go(tape: BitTape) -> CReal:
            u = base.run(tape)
            return CReal(lambda n: a_rat + span * u.approx(n + shift))

        return Sampler(go)

    ac = a if isinstance(a, CReal) else from_rational(a)
    bc = b if isinstance(b, CReal) else from_rational(b)

    def go_general(tape: BitTape) -> CReal:
        if lt_semi(ac, bc, fuel) is not Comparison.LESS:
            raise Diverged("uniform: endpoints not separable")
        u = base.run(tape)
        return add(ac, mul(sub(bc, ac), u))

    return Sampler(go_general)


def std_bernoulli() -> Sampler:
    """Fair coin: reads exactly tape bit 0."""
    return Sampler(lambda tape: tape.read(0))


def bernoulli(p, fuel: Optional[int] = None) -> Sampler:
    """Coin with bias p, decided by comparing a uniform draw against p.

    Diverges only on the measure-zero event that the draw equals p.
    """
    pc = p if isinstance(p, CReal) else from_rational(p)
    if pc.exact is not None and not (0 <= pc.exact <= 1):
        raise ValueError("bernoulli bias must lie in [0, 1]")
    base = std_uniform()

    def go(tape: BitTape) -> bool:
        u = base.run(tape)
        c = lt_semi(u, pc, fuel)
        if c is Comparison.LESS:
            return True
        if c is Comparison.GREATER:
            return False
        raise Diverged("bernoulli: draw not separable from bias")

    return Sampler(go)


def std_geometric(fuel: Optional[int] = None) -> Sampler:
    """Number of fair coin flips up to and including the first success.

    Written as the recursive sequencing it denotes: flip, return 1 on
    success, otherwise recurse and add one.  The recursion is suspended
    behind the successor chain, so consumers peel exactly as many flips as
    they need; the depth bound makes the probability-zero all-failures tape
    an observable Diverged.
    """
    limit = default_fuel() if fuel is None else fuel

    def level(depth: int) -> Sampler:
        def cont(b):
            if force(b):
                return ret(1)
            if depth + 1 >= limit:
                return _failing("geometric: recursion fuel exhausted")
            return bind(_suspended(lambda: level(depth + 1)),
                        lambda n: ret(nat_succ(n)))
        return bind(std_bernoulli(), cont)

    return level(0)


def std_normal(fuel: Optional[int] = None) -> Sampler:
    """Standard normal via the polar method: draw u1,u2 uniform on (-1,1),
    accept when s = u1^2 + u2^2 lands inside the unit disc and return
    u1 * sqrt(-2 log s / s), otherwise retry on fresh tape splits."""
    rounds = default_fuel() if fuel is None else fuel
    one = from_int(1)

    def attempt(r: int) -> Sampler:
        def with_u1(u1t):
            def with_u2(u2t):
                u1 = force(u1t)
                u2 = force(u2t)
                s = add(mul(u1, u1), mul(u2, u2))
                c = lt_semi(s, one, fuel)
                if c is Comparison.LESS:
                    factor = mul(from_int(-2), mul(log_c(s, fuel), reciprocal(s, fuel)))
                    return ret(mul(u1, sqrt_c(factor, fuel)))
                if c is Comparison.GREATER:
                    if r + 1 >= rounds:
                        return _failing("normal: rejection rounds exhausted")
                    return _suspended(lambda: attempt(r + 1))
                return _failing("normal: acceptance test undecided")
            return bind(uniform(-1, 1), with_u2)
        return bind(uniform(-1, 1), with_u1)

    return _suspended(lambda: attempt(0))


def normal(m, s, fuel: Optional[int] = None) -> Sampler:
    """Normal with mean m and scale s > 0 as m + s * standard draw."""
    mc = m if isinstance(m, CReal) else from_rational(m)
    sc = s if isinstance(s, CReal) else from_rational(s)
    if sc.exact is not None:
        if sc.exact <= 0:
            return _failing("normal: scale not positive")
    base = std_normal(fuel)

    def go(tape: BitTape) -> CReal:
        if sc.exact is None:
            if lt_semi(from_int(0), sc, fuel) is not Comparison.LESS:
                raise Diverged("normal: scale not certifiably positive")
        return base.run(tape)

    def with_z(zt):
        return ret(add(mc, mul(sc, force(zt))))

    return bind(Sampler(go, is_bottom=base.is_bottom), with_z)


def cantor() -> Sampler:
    """The singular distribution on the middle-thirds set.

    The approximation at index m walks m steps, each trisecting toward the
    left (true bit) or right (false bit) end of the current interval, and
    returns right - 3^-m / 2; step counters mirror the defining recursion,
    so bit 0 is read (and discarded) before trisection starts.
    """

    def go(tape: BitTape) -> CReal:
        def ap(m: int) -> Fraction:
            left, right = Fraction(0), Fraction(1)
            for i in range(m):
                p = Fraction(1, 3 ** i)
                if tape.read(i):
                    right = left + p
                else:
                    left = right - p
            return right - Fraction(1, 2 * 3 ** m)
        return CReal(ap)

    return Sampler(go)


def normal_pair_sum(fuel: Optional[int] = None) -> Sampler:
    """Sum of independent normals, drawing the mean -1 component first."""

    def with_x(xt):
        def with_y(yt):
            return ret(add(force(xt), force(yt)))
        return bind(normal(1, 1, fuel), with_y)

    return bind(normal(-1, 1, fuel), with_x)


def normal_pair_sum_commuted(fuel: Optional[int] = None) -> Sampler:
    """Same distribution as normal_pair_sum, sampling order swapped; the
    two consume the tape differently even though the pushforwards agree."""

    def with_y(yt):
        def with_x(xt):
            return ret(add(force(xt), force(yt)))
        return bind(normal(-1, 1, fuel), with_x)

    return bind(normal(1, 1, fuel), with_y)
