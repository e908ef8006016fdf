"""Certified measure estimation for samplers.

The pushforward of a sampler is pinned between rational lower and upper
bounds by enumerating every bit-prefix of a given length, running the
sampler on the corresponding finite tape, and classifying each outcome
against an open set: certainly inside, certainly outside, or unresolved.
Unresolved and failed runs only widen the upper bound, so both bounds are
sound without any assumption on boundary mass.  A Monte Carlo variant trades
exhaustiveness for a Hoeffding confidence interval, and the same prefix
machinery yields certified integrals of bounded Lipschitz functions.

Finitely-supported measures with exact rational masses serve as the
reference implementation of the probability monad; their unit and bind are
computed exactly and back the monad-law tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .exactreal import (
    CReal,
    Diverged,
    DomainError,
    Interval,
    format_rational,
    from_rational,
    parse_rational,
)
from .sampler import (
    BitTape,
    OutOfBits,
    Sampler,
    force,
    nat_exceeds,
)


class MassError(Exception):
    """A discrete measure's total mass exceeded 1."""


# ---------------------------------------------------------------------------
# Open sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealBoxes:
    """Finite union of open rational boxes; 1-D boxes are merged so the
    representation is canonical."""

    boxes: tuple[tuple[tuple[Fraction, Fraction], ...], ...]

    @classmethod
    def of(cls, *intervals) -> "RealBoxes":
        boxes = []
        for iv in intervals:
            if iv and isinstance(iv[0], tuple):
                box = tuple((Fraction(a), Fraction(b)) for a, b in iv)
            else:
                box = ((Fraction(iv[0]), Fraction(iv[1])),)
            for lo, hi in box:
                if not lo < hi:
                    raise ValueError("open box needs lo < hi per coordinate")
            boxes.append(box)
        return cls(_canonical_boxes(tuple(boxes)))

    @property
    def dim(self) -> int:
        return len(self.boxes[0]) if self.boxes else 1


def _canonical_boxes(boxes):
    if not boxes or len(boxes[0]) != 1:
        return tuple(boxes)
    spans = sorted((b[0][0], b[0][1]) for b in boxes)
    merged = []
    for lo, hi in spans:
        if merged and lo < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple((span,) for span in merged)


@dataclass(frozen=True)
class NatSet:
    """Finite subset of the naturals, or the complement of one."""

    members: frozenset[int]
    cofinite: bool = False

    def __post_init__(self):
        if any(m < 0 for m in self.members):
            raise ValueError("naturals only")

    @property
    def bound(self) -> int:
        return max(self.members) if self.members else 0


@dataclass(frozen=True)
class BoolSet:
    members: frozenset[bool]


OpenSet = object  # RealBoxes | NatSet | BoolSet


def parse_open_set(text: str):
    """Parse "(0,1/2)∪(3/4,1)", "{1,2,3}", "~{0}", "{true}", or "{}"."""
    text = text.strip()
    if not text:
        raise ValueError("empty open-set expression")
    if text in ("{}", "∅"):
        return NatSet(frozenset())
    if text.startswith("~"):
        inner = parse_open_set(text[1:])
        if not isinstance(inner, NatSet) or inner.cofinite:
            raise ValueError("complement only applies to a finite nat set")
        return NatSet(inner.members, cofinite=True)
    if text.startswith("{"):
        if not text.endswith("}"):
            raise ValueError("unterminated set literal")
        items = [s.strip() for s in text[1:-1].split(",") if s.strip()]
        if items and all(i in ("true", "false") for i in items):
            return BoolSet(frozenset(i == "true" for i in items))
        return NatSet(frozenset(int(i) for i in items))
    parts = [p.strip() for p in text.replace("∪", "u").replace("U", "u").split("u")]
    intervals = []
    for part in parts:
        if not (part.startswith("(") and part.endswith(")")):
            raise ValueError("expected (lo,hi) in %r" % part)
        lo_s, hi_s = part[1:-1].split(",")
        intervals.append((parse_rational(lo_s), parse_rational(hi_s)))
    return RealBoxes.of(*intervals)


@dataclass(frozen=True)
class MeasureBounds:
    lower: Fraction
    upper: Fraction
    prefix_bits: int
    precision: int
    straddled: int = 0
    failed: int = 0

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper <= 1):
            raise ValueError("bounds must satisfy 0 <= lower <= upper <= 1")

    def to_json(self) -> dict:
        return {
            "prefix_bits": self.prefix_bits,
            "precision": self.precision,
            "lower": format_rational(self.lower),
            "upper": format_rational(self.upper),
        }


# ---------------------------------------------------------------------------
# Classification of a single sample against an open set
# ---------------------------------------------------------------------------

INSIDE, OUTSIDE, STRADDLE = "inside", "outside", "straddle"


def _coords(value):
    value = force(value)
    if isinstance(value, CReal):
        return (value,)
    if isinstance(value, (tuple, list)):
        return tuple(force(c) for c in value)
    raise TypeError("expected a real-valued sample, got %r" % (value,))


def _classify_boxes(value, region: RealBoxes, precision: int) -> str:
    if not region.boxes:
        return OUTSIDE
    coords = _coords(value)
    if len(coords) != region.dim:
        raise TypeError("sample dimension %d != region dimension %d"
                        % (len(coords), region.dim))
    encs = [c.enclosure(precision) for c in coords]
    outside_all = True
    for box in region.boxes:
        inside_box = all(lo < e.lo and e.hi < hi
                         for e, (lo, hi) in zip(encs, box))
        if inside_box:
            return INSIDE
        disjoint = any(e.hi <= lo or hi <= e.lo
                       for e, (lo, hi) in zip(encs, box))
        if not disjoint:
            outside_all = False
    return OUTSIDE if outside_all else STRADDLE


def classify(value, region, precision: int) -> str:
    """Sound three-way membership test of one sample against an open set.

    Real samples are judged through their enclosure at `precision`; natural
    samples peel only as many successor layers as the set's bound requires;
    booleans are forced outright.  May raise OutOfBits/Diverged when the
    underlying value cannot be resolved far enough.
    """
    if isinstance(region, RealBoxes):
        return _classify_boxes(value, region, precision)
    if isinstance(region, NatSet):
        if not region.members:
            return INSIDE if region.cofinite else OUTSIDE
        exceeds, resolved = nat_exceeds(force(value), region.bound)
        member = (not exceeds) and resolved in region.members
        if region.cofinite:
            member = not member
        return INSIDE if member else OUTSIDE
    if isinstance(region, BoolSet):
        return INSIDE if force(value) in region.members else OUTSIDE
    raise TypeError("not an open set: %r" % (region,))


_REFINE_EXTRA = 60


def _classify_refining(value, region, precision: int) -> str:
    """Classification that keeps refining a straddling enclosure while the
    underlying tape still has bits to give (boundary-hugging values give up
    after a fixed extra depth)."""
    for p in range(precision, precision + _REFINE_EXTRA + 1):
        try:
            verdict = classify(value, region, p)
        except OutOfBits:
            if p == precision:
                raise
            return STRADDLE
        if verdict is not STRADDLE or not isinstance(region, RealBoxes):
            return verdict
    return STRADDLE


# ---------------------------------------------------------------------------
# Prefix enumeration and Monte Carlo bounds
# ---------------------------------------------------------------------------

MAX_PREFIX_BITS = 24


def measure_bounds(s: Sampler, region, prefix_bits: int, precision: int) -> MeasureBounds:
    """Certified bounds on the pushforward measure of an open set.

    Every length-k bit prefix is enumerated; runs that exhaust the prefix or
    diverge contribute slack to the upper bound only.
    """
    if prefix_bits > MAX_PREFIX_BITS:
        raise ValueError("prefix_bits capped at %d" % MAX_PREFIX_BITS)
    total = 1 << prefix_bits
    inside = outside = straddle = failed = 0
    for word in range(total):
        tape = BitTape.from_prefix_int(word, prefix_bits)
        try:
            value = s.run(tape)
            verdict = _classify_refining(value, region, precision)
        except (OutOfBits, Diverged, DomainError):
            failed += 1
            continue
        if verdict is INSIDE:
            inside += 1
        elif verdict is OUTSIDE:
            outside += 1
        else:
            straddle += 1
    return MeasureBounds(
        lower=Fraction(inside, total),
        upper=1 - Fraction(outside, total),
        prefix_bits=prefix_bits,
        precision=precision,
        straddled=straddle,
        failed=failed,
    )


def hoeffding_radius(delta: float, n: int) -> Fraction:
    """Upper-rounded rational Hoeffding half-width sqrt(ln(2/delta)/(2n))."""
    w = math.sqrt(math.log(2.0 / delta) / (2.0 * n))
    scaled = math.ceil(w * (1 << 40)) + 1
    return Fraction(scaled, 1 << 40)


@dataclass(frozen=True)
class MCBounds(MeasureBounds):
    samples: int = 0
    diverged: int = 0

    def to_json(self) -> dict:
        data = super().to_json()
        data.update({"samples": self.samples, "diverged": self.diverged})
        return data


def measure_mc(s: Sampler, region, n_samples: int, seed: int,
               precision: int, delta: float = 0.01) -> MCBounds:
    """Monte Carlo measure estimate with a Hoeffding confidence band.

    Only provable membership counts toward the lower estimate; straddling
    and diverged samples widen the upper side and divergences are reported
    separately.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    inside = outside = straddle = diverged = 0
    for i in range(n_samples):
        tape = BitTape.from_seed(seed + i)
        try:
            value = s.run(tape)
            verdict = classify(value, region, precision)
        except (Diverged, DomainError):
            diverged += 1
            continue
        if verdict is INSIDE:
            inside += 1
        elif verdict is OUTSIDE:
            outside += 1
        else:
            straddle += 1
    w = hoeffding_radius(delta, n_samples)
    lo = max(Fraction(0), Fraction(inside, n_samples) - w)
    hi = min(Fraction(1), Fraction(inside + straddle + diverged, n_samples) + w)
    return MCBounds(lower=lo, upper=hi, prefix_bits=0, precision=precision,
                    straddled=straddle, failed=diverged,
                    samples=n_samples, diverged=diverged)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _eval_bounded(f_value: CReal, precision: int) -> tuple[Fraction, Fraction]:
    if f_value.exact is not None:
        return f_value.exact, f_value.exact
    a = f_value.approx(precision)
    r = Fraction(2, 2 ** precision)
    return a - r, a + r


def integrate_enum(s: Sampler, f: Callable[[CReal], CReal], bound: Fraction,
                   lipschitz: Fraction, prefix_bits: int, precision: int) -> Interval:
    """Certified interval around the integral of f against the pushforward.

    Requires |f| <= bound on the sampler's range and f Lipschitz there; each
    prefix contributes f at the sample midpoint, padded by the Lipschitz
    sweep over the enclosure radius, and failed prefixes contribute the
    worst case +-bound.
    """
    if prefix_bits > MAX_PREFIX_BITS:
        raise ValueError("prefix_bits capped at %d" % MAX_PREFIX_BITS)
    bound = Fraction(bound)
    lipschitz = Fraction(lipschitz)
    total = 1 << prefix_bits
    radius = Fraction(2, 2 ** precision)
    lo_sum = Fraction(0)
    hi_sum = Fraction(0)
    for word in range(total):
        tape = BitTape.from_prefix_int(word, prefix_bits)
        try:
            value = force(s.run(tape))
            mid = value.approx(precision)
            f_lo, f_hi = _eval_bounded(f(from_rational(mid)), precision + 2)
        except (OutOfBits, Diverged, DomainError):
            lo_sum -= bound
            hi_sum += bound
            continue
        pad = lipschitz * radius
        lo_sum += f_lo - pad
        hi_sum += f_hi + pad
    return Interval(lo_sum / total, hi_sum / total)


def integrate_mc(s: Sampler, f: Callable[[CReal], CReal], bound: Fraction,
                 n_samples: int, seed: int, delta: float = 0.01,
                 precision: int = 10) -> Interval:
    """Monte Carlo integral with Hoeffding half-width bound*sqrt(ln(2/d)/2N),
    padded by the evaluation radius; diverged draws add worst-case slack."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    bound = Fraction(bound)
    acc = Fraction(0)
    diverged = 0
    slop = Fraction(0)
    for i in range(n_samples):
        tape = BitTape.from_seed(seed + i)
        try:
            value = force(s.run(tape))
            f_lo, f_hi = _eval_bounded(f(value), precision)
            acc += (f_lo + f_hi) / 2
            slop = max(slop, (f_hi - f_lo) / 2)
        except (Diverged, DomainError):
            diverged += 1
    mean = acc / n_samples
    w = bound * hoeffding_radius(delta, n_samples) + slop
    w += bound * Fraction(2 * diverged, n_samples) if diverged else 0
    return Interval(mean - w, mean + w)


# ---------------------------------------------------------------------------
# Exact finitely-supported valuations
# ---------------------------------------------------------------------------

class DiscreteMeasure:
    """Finitely-supported sub-probability measure with exact rational masses."""

    __slots__ = ("support",)

    def __init__(self, entries):
        acc: dict = {}
        for point, mass in entries:
            mass = Fraction(mass)
            if mass < 0:
                raise MassError("negative mass at %r" % (point,))
            if mass == 0:
                continue
            acc[point] = acc.get(point, Fraction(0)) + mass
        total = sum(acc.values(), Fraction(0))
        if total > 1:
            raise MassError("total mass %s exceeds 1" % total)
        self.support = tuple(sorted(acc.items(), key=lambda kv: repr(kv[0])))

    @property
    def total(self) -> Fraction:
        return sum((m for _, m in self.support), Fraction(0))

    def mass(self, point) -> Fraction:
        for p, m in self.support:
            if p == point:
                return m
        return Fraction(0)

    def of_set(self, points) -> Fraction:
        return sum((m for p, m in self.support if p in points), Fraction(0))

    def __eq__(self, other):
        return isinstance(other, DiscreteMeasure) and self.support == other.support

    def __hash__(self):
        return hash(self.support)

    def __repr__(self):
        return "DiscreteMeasure(%s)" % (dict(self.support),)


def val_ret(x) -> DiscreteMeasure:
    """Unit of the valuation monad: the point mass at x."""
    return DiscreteMeasure(((x, Fraction(1)),))


def val_bind(mu: DiscreteMeasure, f: Callable[[object], DiscreteMeasure]) -> DiscreteMeasure:
    """Bind of the valuation monad: the exact finite mixture sum mu(x)*f(x)."""
    entries = []
    for point, mass in mu.support:
        inner = f(point)
        for q, m in inner.support:
            entries.append((q, mass * m))
    return DiscreteMeasure(entries)
