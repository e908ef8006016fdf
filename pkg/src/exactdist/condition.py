"""Conditioning operators.

Observation of continuous data goes through a bounded computable density:
a rejection loop redraws from the prior until a fresh uniform level falls
certifiably below the density at the drawn point, which distributes accepted
samples as the Bayes-rule posterior.  The same density also yields certified
posterior probability bounds as an interval quotient of two certified
integrals.  Conditioning on an open event of positive probability is plain
rejection against certified membership.

Nothing here conditions on measure-zero events: the acceptance test is a
semi-decision, and its Undecided outcome on boundary cases surfaces as a
fuel-bounded Diverged rather than an arbitrary choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .exactreal import (
    Comparison,
    CReal,
    Diverged,
    DomainError,
    abs_creal,
    default_fuel,
    exp_c,
    from_rational,
    lt_semi,
    mul,
    neg,
    pi,
    reciprocal,
    sqrt_c,
    sub,
)
from .measure import (
    INSIDE,
    MeasureBounds,
    NatSet,
    OUTSIDE,
    OpenSet,
    RealBoxes,
    classify,
)
from .sampler import (
    BitTape,
    OutOfBits,
    Sampler,
    _suspended,
    bind,
    force,
    ret,
    std_uniform,
)


class DenominatorIndistinguishableFromZero(Exception):
    """The normalizing integral's certified interval contains zero."""


@dataclass(frozen=True)
class BndDens:
    """A nonnegative conditional density with a known rational upper bound.

    `lipschitz` (in the first argument, over the prior's range) is only
    needed for certified posterior bounds, not for the rejection sampler.
    """

    dens: Callable[[CReal, CReal], CReal]
    bound: Fraction
    lipschitz: Optional[Fraction] = None

    def __post_init__(self):
        if self.bound <= 0:
            raise ValueError("density bound must be positive")


def _first_coordinate(value):
    value = force(value)
    if isinstance(value, (tuple, list)):
        return force(value[0])
    return value


def _as_creal(y) -> CReal:
    return y if isinstance(y, CReal) else from_rational(y)


def _accept_level(w: CReal, target: CReal, bound: Fraction, bound_c: CReal,
                  cmp_fuel: Optional[int]) -> Optional[bool]:
    """Decide whether the uniform level w accepts against the density value.

    When the density value is an exact rational, the decision compares the
    level's own bisection cylinder (the tight dyadic interval its index-k
    approximation is the midpoint of) against the rational threshold, with
    the boundary cylinder counted as accept.  Cylinders then tile [0, 1]
    exactly, so exhaustive prefix enumeration reproduces the acceptance
    probability without slack, and scaling density and bound together
    changes nothing.  Non-rational density values fall back to the generic
    semi-decision; None means undecided within fuel.
    """
    if target.exact is not None:
        threshold = target.exact / bound
        limit = default_fuel() if cmp_fuel is None else cmp_fuel
        for k in range(limit):
            mid = w.approx(k)
            radius = Fraction(1, 2 ** (k + 2))
            if mid + radius <= threshold:
                return True
            if mid - radius >= threshold:
                return False
        return None
    c = lt_semi(mul(w, bound_c), target, fuel=cmp_fuel)
    if c is Comparison.LESS:
        return True
    if c is Comparison.GREATER:
        return False
    return None


def obs_dens(prior: Sampler, d: BndDens, y, max_rounds: Optional[int] = None,
             cmp_fuel: Optional[int] = None) -> Sampler:
    """Condition a prior on data observed through a bounded density.

    Each round draws a candidate from the prior and an independent uniform
    level w, accepting when w * bound < dens(u, y) is certified.  Accepted
    output is the posterior; exhausting the round budget (tiny acceptance
    probability) or an undecidable comparison (the measure-zero boundary)
    raises Diverged.
    """
    rounds = default_fuel() if max_rounds is None else max_rounds
    y_c = _as_creal(y)
    bound_c = from_rational(d.bound)

    def attempt(r: int) -> Sampler:
        def with_draw(drawn):
            def with_level(levelt):
                candidate = force(drawn)
                w = force(levelt)
                target = d.dens(_first_coordinate(candidate), y_c)
                decision = _accept_level(w, target, d.bound, bound_c, cmp_fuel)
                if decision is True:
                    return ret(candidate)
                if decision is False:
                    if r + 1 >= rounds:
                        return _raising("rejection rounds exhausted")
                    return _suspended(lambda: attempt(r + 1))
                return _raising("acceptance comparison undecided")
            return bind(std_uniform(), with_level)
        return bind(prior, with_draw)

    return _suspended(lambda: attempt(0))


def _raising(reason: str) -> Sampler:
    def go(tape: BitTape):
        raise Diverged(reason)
    return Sampler(go)


def _density_range(d: BndDens, u_mid: Fraction, y_c: CReal, radius: Fraction,
                   precision: int) -> tuple[Fraction, Fraction]:
    """Certified range of the density over a sample enclosure: evaluate at
    the midpoint, pad by the Lipschitz sweep, clip to [0, bound]."""
    value = d.dens(from_rational(u_mid), y_c)
    if value.exact is not None:
        lo = hi = value.exact
    else:
        a = value.approx(precision)
        r = Fraction(2, 2 ** precision)
        lo, hi = a - r, a + r
    pad = d.lipschitz * radius
    return (max(Fraction(0), lo - pad), min(d.bound, hi + pad))


def posterior_bounds(prior: Sampler, d: BndDens, y, region,
                     prefix_bits: int, precision: int) -> MeasureBounds:
    """Certified posterior probability of an open region under density
    observation, as the interval quotient of two certified integrals.

    Runs one prefix enumeration, accumulating per-prefix density ranges for
    the numerator (restricted to the region) and denominator; failures and
    straddles pad only the side soundness requires.  Raises when the
    denominator interval cannot be separated from zero.
    """
    if d.lipschitz is None:
        raise ValueError("certified posterior bounds need a Lipschitz constant")
    y_c = _as_creal(y)
    total = 1 << prefix_bits
    radius = Fraction(2, 2 ** precision)
    num_lo = num_hi = Fraction(0)
    den_lo = den_hi = Fraction(0)
    for word in range(total):
        tape = BitTape.from_prefix_int(word, prefix_bits)
        try:
            value = force(prior.run(tape))
            u = _first_coordinate(value)
            u_mid = u.approx(precision)
            d_lo, d_hi = _density_range(d, u_mid, y_c, radius, precision + 2)
            verdict = classify(value, region, precision)
        except (OutOfBits, Diverged, DomainError):
            num_hi += d.bound
            den_hi += d.bound
            continue
        den_lo += d_lo
        den_hi += d_hi
        if verdict is INSIDE:
            num_lo += d_lo
            num_hi += d_hi
        elif verdict is not OUTSIDE:
            num_hi += d_hi
    den_lo /= total
    den_hi /= total
    num_lo /= total
    num_hi /= total
    if den_lo <= 0:
        raise DenominatorIndistinguishableFromZero(
            "normalizing integral within [%s, %s]" % (den_lo, den_hi))
    lower = max(Fraction(0), num_lo / den_hi)
    upper = min(Fraction(1), num_hi / den_lo)
    return MeasureBounds(lower=lower, upper=upper,
                         prefix_bits=prefix_bits, precision=precision)


def _certify_membership(value, region, refine_fuel: int):
    """True/False once membership is certain, None when fuel runs out."""
    if isinstance(region, RealBoxes):
        for p in range(refine_fuel):
            verdict = classify(value, region, p)
            if verdict is INSIDE:
                return True
            if verdict is OUTSIDE:
                return False
        return None
    verdict = classify(value, region, 0)
    return verdict is INSIDE


def condition_event(prior: Sampler, region, max_rounds: Optional[int] = None,
                    refine_fuel: Optional[int] = None) -> Sampler:
    """Condition on an open event of positive probability by rejection:
    redraw until the sample is certified inside the region.  Boundary-mass
    or tiny-event pathologies surface as fuel-bounded Diverged."""
    rounds = default_fuel() if max_rounds is None else max_rounds
    depth = default_fuel() if refine_fuel is None else refine_fuel

    def attempt(r: int) -> Sampler:
        def with_draw(drawn):
            candidate = force(drawn)
            status = _certify_membership(candidate, region, depth)
            if status is True:
                return ret(candidate)
            if status is False:
                if r + 1 >= rounds:
                    return _raising("event rejection rounds exhausted")
                return _suspended(lambda: attempt(r + 1))
            return _raising("event membership undecided")
        return bind(prior, with_draw)

    return _suspended(lambda: attempt(0))


# ---------------------------------------------------------------------------
# Named densities for the command line
# ---------------------------------------------------------------------------

def gaussian_noise(sigma) -> BndDens:
    """Observation corrupted by centred Gaussian noise with scale sigma.

    The bound uses 1/sqrt(2*pi) < 2/5 and the Lipschitz constant
    sup|phi'| = e^(-1/2)/sqrt(2*pi) < 1/4, both scaled by sigma.
    """
    sigma = Fraction(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    inv_two_var = Fraction(-1, 2) / (sigma * sigma)
    coeff = reciprocal(mul(from_rational(sigma),
                           sqrt_c(mul(from_rational(2), pi()))))

    def dens(u: CReal, y: CReal) -> CReal:
        diff = sub(y, u)
        return mul(coeff, exp_c(mul(from_rational(inv_two_var), mul(diff, diff))))

    return BndDens(dens=dens, bound=Fraction(2, 5) / sigma,
                   lipschitz=Fraction(1, 4) / (sigma * sigma))


def laplace_noise(b) -> BndDens:
    """Observation corrupted by Laplace noise with scale b."""
    b = Fraction(b)
    if b <= 0:
        raise ValueError("scale must be positive")
    coeff = from_rational(Fraction(1, 2) / b)
    rate = Fraction(-1) / b

    def dens(u: CReal, y: CReal) -> CReal:
        return mul(coeff, exp_c(mul(from_rational(rate), abs_creal(sub(y, u)))))

    return BndDens(dens=dens, bound=Fraction(1, 2) / b,
                   lipschitz=Fraction(1, 2) / (b * b))


def constant_density(c) -> BndDens:
    """Uninformative observation: the posterior equals the prior."""
    c = Fraction(c)
    if c <= 0:
        raise ValueError("constant density must be positive")
    level = from_rational(c)

    def dens(u: CReal, y: CReal) -> CReal:
        return level

    return BndDens(dens=dens, bound=c, lipschitz=Fraction(0))


DENSITY_BUILDERS = {
    "gaussian-noise": gaussian_noise,
    "laplace-noise": laplace_noise,
    "constant": constant_density,
}


def parse_density(spec: str) -> BndDens:
    """Parse "gaussian-noise(1)", "laplace-noise(1/2)", or "constant(2/5)"."""
    spec = spec.strip()
    if "(" not in spec or not spec.endswith(")"):
        raise ValueError("expected name(params) in %r" % spec)
    name, arg = spec[:-1].split("(", 1)
    builder = DENSITY_BUILDERS.get(name.strip())
    if builder is None:
        raise ValueError("unknown density %r" % name)
    return builder(Fraction(arg.strip()))
