"""Exact computable distributions: certified reals, bit-tape samplers,
measure bounds, conditioning, and a typed probabilistic core language."""

from .exactreal import (
    Comparison,
    CReal,
    DenseEnum,
    Diverged,
    DomainError,
    FastCauchyViolation,
    Interval,
    Rational,
    add,
    approx,
    arith,
    default_fuel,
    dyadic_enum,
    enclosure,
    exp_c,
    from_int,
    from_rational,
    log_c,
    lt_semi,
    make_creal,
    mul,
    neg,
    pi,
    reciprocal,
    sqrt_c,
    sub,
    transcendental,
)
from .sampler import (
    BitTape,
    LazyNat,
    OutOfBits,
    Sampler,
    Thunk,
    bernoulli,
    bind,
    bot_samp,
    bot_samp_bot,
    cantor,
    force,
    nat_resolve,
    normal,
    normal_pair_sum,
    normal_pair_sum_commuted,
    ret,
    run,
    split,
    std_bernoulli,
    std_geometric,
    std_normal,
    std_uniform,
    uniform,
)
from .measure import (
    BoolSet,
    DiscreteMeasure,
    MassError,
    MeasureBounds,
    NatSet,
    RealBoxes,
    integrate_enum,
    integrate_mc,
    measure_bounds,
    measure_mc,
    parse_open_set,
    val_bind,
    val_ret,
)
from .condition import (
    BndDens,
    DenominatorIndistinguishableFromZero,
    condition_event,
    constant_density,
    gaussian_noise,
    laplace_noise,
    obs_dens,
    parse_density,
    posterior_bounds,
)
from .lang import (
    GlobalEnv,
    IllFormedDistType,
    ParseError,
    RegistrationError,
    StuckTerm,
    TypecheckError,
    UnboundVariable,
    as_raw_sampler,
    default_global_env,
    eval_term,
    infer,
    parse,
    run_dist,
    typecheck,
    wf_dist,
)

__version__ = "0.1.0"
