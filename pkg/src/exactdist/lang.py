"""A typed core language with reals and a distribution monad.

The language is PCF (naturals, functions, fixpoints) extended with pairs,
exact real literals, primitive real operations, and distribution terms built
from registered primitive samplers via monadic return/bind.  Distribution
payload types are restricted to naturals, reals, and products of those.

Evaluation is big-step call-by-name: environments bind names to memoized
thunks, pair components and bound draws are forced at most once, and
successor chains unfold lazily so a draw's structure can be inspected
without resolving it completely.  Fixpoint unrolling and full natural-number
resolution are fuel-bounded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .exactreal import (
    CReal,
    Diverged,
    add,
    default_fuel,
    format_rational,
    from_rational,
    log_c,
    mul,
    pi,
    sqrt_c,
    sub,
)
from .sampler import (
    BitTape,
    LazyNat,
    OutOfBits,
    Sampler,
    Thunk,
    bot_samp,
    bot_samp_bot,
    cantor,
    force,
    nat_exceeds,
    nat_resolve,
    ret as sampler_ret,
    std_bernoulli,
    std_geometric,
    std_normal,
    std_uniform,
)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TNat:
    def __str__(self):
        return "nat"


@dataclass(frozen=True)
class TReal:
    def __str__(self):
        return "real"


@dataclass(frozen=True)
class TArrow:
    arg: object
    res: object

    def __str__(self):
        left = str(self.arg)
        if isinstance(self.arg, TArrow):
            left = "(%s)" % left
        return "%s -> %s" % (left, self.res)


@dataclass(frozen=True)
class TProd:
    fst: object
    snd: object

    def __str__(self):
        def wrap(t):
            return "(%s)" % t if isinstance(t, (TArrow, TProd)) else str(t)
        return "%s * %s" % (wrap(self.fst), wrap(self.snd))


@dataclass(frozen=True)
class TDist:
    payload: object

    def __str__(self):
        inner = str(self.payload)
        if isinstance(self.payload, (TArrow, TProd, TDist)):
            inner = "(%s)" % inner
        return "dist %s" % inner


NAT, REAL = TNat(), TReal()


def wf_dist(t) -> bool:
    """Well-formedness of a distribution payload: naturals, reals, and
    products of well-formed payloads; no function spaces."""
    if isinstance(t, (TNat, TReal)):
        return True
    if isinstance(t, TProd):
        return wf_dist(t.fst) and wf_dist(t.snd)
    return False


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass
class Zero:
    pos: object = field(default=None, compare=False)


@dataclass
class SuccC:
    pos: object = field(default=None, compare=False)


@dataclass
class PredC:
    pos: object = field(default=None, compare=False)


@dataclass
class Ifz:
    scrutinee: object
    then: object
    orelse: object
    pos: object = field(default=None, compare=False)


@dataclass
class Var:
    name: str
    pos: object = field(default=None, compare=False)


@dataclass
class Lam:
    name: str
    ty: object
    body: object
    pos: object = field(default=None, compare=False)


@dataclass
class App:
    fn: object
    arg: object
    pos: object = field(default=None, compare=False)


@dataclass
class Fix:
    body: object
    pos: object = field(default=None, compare=False)


@dataclass
class Pair:
    fst: object
    snd: object
    pos: object = field(default=None, compare=False)


@dataclass
class Fst:
    body: object
    pos: object = field(default=None, compare=False)


@dataclass
class Snd:
    body: object
    pos: object = field(default=None, compare=False)


@dataclass
class RealLit:
    value: Fraction
    pos: object = field(default=None, compare=False)


@dataclass
class RealPrim:
    name: str
    pos: object = field(default=None, compare=False)


@dataclass
class DistPrim:
    name: str
    pos: object = field(default=None, compare=False)


@dataclass
class Return:
    body: object
    pos: object = field(default=None, compare=False)
    payload: object = field(default=None, compare=False)


@dataclass
class Bind:
    name: str
    source: object
    body: object
    pos: object = field(default=None, compare=False)
    payloads: object = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("%s (line %d, column %d)" % (message, line, col))
        self.line = line
        self.col = col


class TypecheckError(Exception):
    def __init__(self, message: str, pos=None):
        if pos:
            message = "%s (line %d, column %d)" % (message, pos[0], pos[1])
        super().__init__(message)
        self.pos = pos


class UnboundVariable(TypecheckError):
    pass


class IllFormedDistType(TypecheckError):
    pass


class StuckTerm(Exception):
    """Evaluator hit a shape the typechecker would have rejected."""


class RegistrationError(Exception):
    pass


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

KEYWORDS = {"O", "succ", "pred", "ifz", "then", "else", "fix", "return",
            "let", "in", "fst", "snd", "nat", "real", "dist"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>-?\d+\.\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<arrow>->)
  | (?P<bindarrow><-)
  | (?P<punct>[\\:.(),*])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError("unexpected character %r" % text[i], line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and chunk in KEYWORDS:
                tokens.append(_Token(chunk, chunk, line, col))
            elif kind in ("arrow", "bindarrow", "punct"):
                tokens.append(_Token(chunk, chunk, line, col))
            else:
                tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


_ATOM_STARTERS = {"O", "succ", "pred", "fst", "snd", "ident", "number", "("}


class _Parser:
    def __init__(self, tokens: list[_Token], genv: Optional["GlobalEnv"]):
        self.tokens = tokens
        self.i = 0
        self.genv = genv

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError("expected %r, found %r" % (kind, tok.text or "end of input"),
                             tok.line, tok.col)
        return self.next()

    def fail(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- types --------------------------------------------------------------

    def parse_type(self):
        left = self.parse_prod_type()
        if self.peek().kind == "->":
            self.next()
            return TArrow(left, self.parse_type())
        return left

    def parse_prod_type(self):
        left = self.parse_atom_type()
        if self.peek().kind == "*":
            self.next()
            return TProd(left, self.parse_prod_type())
        return left

    def parse_atom_type(self):
        tok = self.peek()
        if tok.kind == "nat":
            self.next()
            return NAT
        if tok.kind == "real":
            self.next()
            return REAL
        if tok.kind == "dist":
            self.next()
            return TDist(self.parse_atom_type())
        if tok.kind == "(":
            self.next()
            inner = self.parse_type()
            self.expect(")")
            return inner
        self.fail("expected a type")

    # -- terms --------------------------------------------------------------

    def parse_expr(self, bound: frozenset):
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "\\":
            self.next()
            name = self.expect("ident").text
            self.expect(":")
            ty = self.parse_type()
            self.expect(".")
            body = self.parse_expr(bound | {name})
            return Lam(name, ty, body, pos=pos)
        if tok.kind == "let":
            self.next()
            name = self.expect("ident").text
            self.expect("<-")
            source = self.parse_expr(bound)
            self.expect("in")
            body = self.parse_expr(bound | {name})
            return Bind(name, source, body, pos=pos)
        if tok.kind == "ifz":
            self.next()
            scrutinee = self.parse_expr(bound)
            self.expect("then")
            then = self.parse_expr(bound)
            self.expect("else")
            orelse = self.parse_expr(bound)
            return Ifz(scrutinee, then, orelse, pos=pos)
        if tok.kind == "return":
            self.next()
            return Return(self.parse_expr(bound), pos=pos)
        if tok.kind == "fix":
            self.next()
            return Fix(self.parse_expr(bound), pos=pos)
        return self.parse_app(bound)

    def parse_app(self, bound: frozenset):
        head = self.parse_atom(bound)
        while self.peek().kind in _ATOM_STARTERS:
            arg = self.parse_atom(bound)
            head = App(head, arg, pos=head.pos)
        return head

    def parse_atom(self, bound: frozenset):
        tok = self.peek()
        pos = (tok.line, tok.col)
        if tok.kind == "O":
            self.next()
            return Zero(pos=pos)
        if tok.kind == "succ":
            self.next()
            return SuccC(pos=pos)
        if tok.kind == "pred":
            self.next()
            return PredC(pos=pos)
        if tok.kind == "fst":
            self.next()
            return Fst(self.parse_atom(bound), pos=pos)
        if tok.kind == "snd":
            self.next()
            return Snd(self.parse_atom(bound), pos=pos)
        if tok.kind == "number":
            self.next()
            return RealLit(Fraction(tok.text), pos=pos)
        if tok.kind == "ident":
            self.next()
            name = tok.text
            if name not in bound and self.genv is not None:
                if name in self.genv.dists:
                    return DistPrim(name, pos=pos)
                if name in self.genv.rops:
                    return RealPrim(name, pos=pos)
            return Var(name, pos=pos)
        if tok.kind == "(":
            self.next()
            first = self.parse_expr(bound)
            if self.peek().kind == ",":
                self.next()
                second = self.parse_expr(bound)
                self.expect(")")
                return Pair(first, second, pos=pos)
            self.expect(")")
            return first
        self.fail("expected an expression")


def parse(text: str, genv: Optional["GlobalEnv"] = None):
    """Parse a program.  Free identifiers naming registered primitives
    resolve to primitive references; other free identifiers stay variables
    for the typechecker to reject."""
    if genv is None:
        genv = default_global_env()
    parser = _Parser(_lex(text), genv)
    term = parser.parse_expr(frozenset())
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError("trailing input %r" % tok.text, tok.line, tok.col)
    return term


# ---------------------------------------------------------------------------
# Global environment
# ---------------------------------------------------------------------------

def rop_type(arity: int):
    """Type of an arity-n real operation: an n-fold real product to real."""
    if arity == 1:
        return TArrow(REAL, REAL)
    args = REAL
    for _ in range(arity - 1):
        args = TProd(REAL, args)
    return TArrow(args, REAL)


class GlobalEnv:
    """Named constants available to programs: real constants, strict real
    operations with declared arities, and primitive distributions with
    well-formed payload types."""

    def __init__(self):
        self.reals: dict[str, CReal] = {}
        self.rops: dict[str, tuple[int, Callable]] = {}
        self.dists: dict[str, tuple[object, Sampler]] = {}

    def register_real(self, name: str, value: CReal):
        self.reals[name] = value

    def register_rop(self, name: str, arity: int, fn: Callable,
                     declared_type=None):
        if arity < 1:
            raise RegistrationError("arity must be at least 1")
        if declared_type is not None and declared_type != rop_type(arity):
            raise RegistrationError(
                "declared type %s does not match arity %d" % (declared_type, arity))
        self.rops[name] = (arity, fn)

    def register_dist(self, name: str, payload, sampler: Sampler):
        if not wf_dist(payload):
            raise RegistrationError("payload %s is not a valid distribution type" % payload)
        self.dists[name] = (payload, sampler)


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

class NatV:
    __slots__ = ("chain",)

    def __init__(self, chain):
        self.chain = chain

    def __repr__(self):
        return "NatV(%r)" % (self.chain,)


class RealV:
    __slots__ = ("creal",)

    def __init__(self, creal: CReal):
        self.creal = creal


class ClosV:
    __slots__ = ("env", "name", "body")

    def __init__(self, env, name, body):
        self.env = env
        self.name = name
        self.body = body


class PairV:
    __slots__ = ("fst", "snd")

    def __init__(self, fst, snd):
        self.fst = fst
        self.snd = snd


class DistV:
    __slots__ = ("sampler", "payload")

    def __init__(self, sampler: Sampler, payload):
        self.sampler = sampler
        self.payload = payload


class PrimV:
    __slots__ = ("kind", "payload")

    def __init__(self, kind, payload=None):
        self.kind = kind
        self.payload = payload


def whnf(value):
    while isinstance(value, Thunk):
        value = value.force()
    return value


def _chain_of(value):
    value = whnf(value)
    if isinstance(value, NatV):
        return value.chain
    raise StuckTerm("expected a natural, got %r" % (value,))


def _creal_of(value):
    value = whnf(value)
    if isinstance(value, RealV):
        return value.creal
    raise StuckTerm("expected a real, got %r" % (value,))


def _nat_pred_chain(chain):
    while isinstance(chain, Thunk):
        chain = chain.force()
    if isinstance(chain, bool):
        chain = int(chain)
    if isinstance(chain, int):
        return max(0, chain - 1)
    if isinstance(chain, LazyNat):
        if chain.count > 1:
            return LazyNat(chain.count - 1, chain.tail)
        return 0 if chain.tail is None else chain.tail
    raise StuckTerm("expected a natural chain, got %r" % (chain,))


def _nat_is_zero(chain) -> bool:
    exceeds, resolved = nat_exceeds(chain, 0)
    return not exceeds and resolved == 0


def wrap_lazy(payload, thunk: Thunk):
    """Present a deferred draw as a value of its payload type: reals defer
    per precision query, naturals defer per successor peel, pairs defer per
    component."""
    if isinstance(payload, TNat):
        return NatV(Thunk(lambda: _chain_of(whnf(thunk.force()))))
    if isinstance(payload, TReal):
        return RealV(CReal(lambda n: _creal_of(whnf(thunk.force())).approx(n)))
    if isinstance(payload, TProd):
        def component(which):
            pv = whnf(thunk.force())
            if not isinstance(pv, PairV):
                raise StuckTerm("expected a pair, got %r" % (pv,))
            return whnf(force(pv.fst if which == 0 else pv.snd))
        return PairV(Thunk(lambda: component(0)), Thunk(lambda: component(1)))
    raise StuckTerm("cannot defer a draw at type %s" % (payload,))


# ---------------------------------------------------------------------------
# Typechecker
# ---------------------------------------------------------------------------

def infer(ctx: dict, genv: GlobalEnv, term):
    """Infer the unique type of a term, annotating return/bind nodes with
    their payload types for the evaluator."""
    if isinstance(term, Zero):
        return NAT
    if isinstance(term, (SuccC, PredC)):
        return TArrow(NAT, NAT)
    if isinstance(term, RealLit):
        return REAL
    if isinstance(term, Var):
        if term.name in ctx:
            return ctx[term.name]
        if term.name in genv.reals:
            return REAL
        if term.name in genv.rops:
            return rop_type(genv.rops[term.name][0])
        if term.name in genv.dists:
            return TDist(genv.dists[term.name][0])
        raise UnboundVariable("unbound variable %r" % term.name, term.pos)
    if isinstance(term, RealPrim):
        if term.name not in genv.rops:
            raise UnboundVariable("unknown real operation %r" % term.name, term.pos)
        return rop_type(genv.rops[term.name][0])
    if isinstance(term, DistPrim):
        if term.name not in genv.dists:
            raise UnboundVariable("unknown distribution %r" % term.name, term.pos)
        return TDist(genv.dists[term.name][0])
    if isinstance(term, Lam):
        inner = dict(ctx)
        inner[term.name] = term.ty
        return TArrow(term.ty, infer(inner, genv, term.body))
    if isinstance(term, App):
        fn_ty = infer(ctx, genv, term.fn)
        if not isinstance(fn_ty, TArrow):
            raise TypecheckError("application of a non-function (%s)" % fn_ty, term.pos)
        arg_ty = infer(ctx, genv, term.arg)
        if arg_ty != fn_ty.arg:
            raise TypecheckError(
                "application rule: argument has type %s, expected %s" % (arg_ty, fn_ty.arg),
                term.pos)
        return fn_ty.res
    if isinstance(term, Ifz):
        scrut_ty = infer(ctx, genv, term.scrutinee)
        if scrut_ty != NAT:
            raise TypecheckError("ifz rule: scrutinee has type %s, expected nat" % scrut_ty,
                                 term.pos)
        then_ty = infer(ctx, genv, term.then)
        else_ty = infer(ctx, genv, term.orelse)
        if then_ty != else_ty:
            raise TypecheckError(
                "ifz rule: branches disagree (%s vs %s)" % (then_ty, else_ty), term.pos)
        return then_ty
    if isinstance(term, Fix):
        body_ty = infer(ctx, genv, term.body)
        if not isinstance(body_ty, TArrow) or body_ty.arg != body_ty.res:
            raise TypecheckError("fix rule: expected t -> t, found %s" % body_ty, term.pos)
        return body_ty.arg
    if isinstance(term, Pair):
        return TProd(infer(ctx, genv, term.fst), infer(ctx, genv, term.snd))
    if isinstance(term, Fst):
        inner = infer(ctx, genv, term.body)
        if not isinstance(inner, TProd):
            raise TypecheckError("fst rule: expected a product, found %s" % inner, term.pos)
        return inner.fst
    if isinstance(term, Snd):
        inner = infer(ctx, genv, term.body)
        if not isinstance(inner, TProd):
            raise TypecheckError("snd rule: expected a product, found %s" % inner, term.pos)
        return inner.snd
    if isinstance(term, Return):
        payload = infer(ctx, genv, term.body)
        if not wf_dist(payload):
            raise IllFormedDistType(
                "return rule: %s is not a valid distribution payload" % payload, term.pos)
        term.payload = payload
        return TDist(payload)
    if isinstance(term, Bind):
        source_ty = infer(ctx, genv, term.source)
        if not isinstance(source_ty, TDist):
            raise TypecheckError("bind rule: expected a distribution, found %s" % source_ty,
                                 term.pos)
        if not wf_dist(source_ty.payload):
            raise IllFormedDistType(
                "bind rule: %s is not a valid distribution payload" % source_ty.payload,
                term.pos)
        inner = dict(ctx)
        inner[term.name] = source_ty.payload
        body_ty = infer(inner, genv, term.body)
        if not isinstance(body_ty, TDist):
            raise TypecheckError("bind rule: body has type %s, expected a distribution"
                                 % body_ty, term.pos)
        if not wf_dist(body_ty.payload):
            raise IllFormedDistType(
                "bind rule: %s is not a valid distribution payload" % body_ty.payload,
                term.pos)
        term.payloads = (source_ty.payload, body_ty.payload)
        return TDist(body_ty.payload)
    raise TypecheckError("unrecognized term %r" % (term,))


def typecheck(term, genv: Optional[GlobalEnv] = None):
    if genv is None:
        genv = default_global_env()
    return infer({}, genv, term)


# ---------------------------------------------------------------------------
# Evaluator
# ---------------------------------------------------------------------------

def _apply(fn_value, arg_thunk: Thunk, genv, fuel: int):
    fn_value = whnf(fn_value)
    if isinstance(fn_value, ClosV):
        env2 = dict(fn_value.env)
        env2[fn_value.name] = arg_thunk
        return eval_term(fn_value.body, env2, genv, fuel)
    if isinstance(fn_value, PrimV):
        if fn_value.kind == "succ":
            return NatV(LazyNat(1, Thunk(lambda: _chain_of(arg_thunk.force()))))
        if fn_value.kind == "pred":
            inner = Thunk(lambda: _chain_of(arg_thunk.force()))
            return NatV(Thunk(lambda: _nat_pred_chain(inner.force())))
        if fn_value.kind == "rop":
            name, arity, fn = fn_value.payload
            args = _collect_real_args(arg_thunk.force(), arity)
            return RealV(fn(*args))
    raise StuckTerm("cannot apply %r" % (fn_value,))


def _collect_real_args(value, arity: int):
    args = []
    for _ in range(arity - 1):
        value = whnf(value)
        if not isinstance(value, PairV):
            raise StuckTerm("expected an argument tuple, got %r" % (value,))
        args.append(_creal_of(force(value.fst)))
        value = force(value.snd)
    args.append(_creal_of(value))
    return args


def eval_term(term, env: dict, genv: GlobalEnv, fuel: Optional[int] = None):
    """Big-step call-by-name evaluation of a closed, typechecked term."""
    if fuel is None:
        fuel = default_fuel()
    if isinstance(term, Zero):
        return NatV(0)
    if isinstance(term, SuccC):
        return PrimV("succ")
    if isinstance(term, PredC):
        return PrimV("pred")
    if isinstance(term, RealLit):
        return RealV(from_rational(term.value))
    if isinstance(term, Var):
        if term.name in env:
            return whnf(force(env[term.name]))
        if term.name in genv.reals:
            return RealV(genv.reals[term.name])
        if term.name in genv.rops:
            arity, fn = genv.rops[term.name]
            return PrimV("rop", (term.name, arity, fn))
        if term.name in genv.dists:
            payload, sampler = genv.dists[term.name]
            return DistV(sampler, payload)
        raise StuckTerm("unbound variable %r at run time" % term.name)
    if isinstance(term, RealPrim):
        arity, fn = genv.rops[term.name]
        return PrimV("rop", (term.name, arity, fn))
    if isinstance(term, DistPrim):
        payload, sampler = genv.dists[term.name]
        return DistV(sampler, payload)
    if isinstance(term, Lam):
        return ClosV(env, term.name, term.body)
    if isinstance(term, App):
        fn_value = eval_term(term.fn, env, genv, fuel)
        arg = Thunk(lambda: eval_term(term.arg, env, genv, fuel))
        return _apply(fn_value, arg, genv, fuel)
    if isinstance(term, Ifz):
        scrut = whnf(eval_term(term.scrutinee, env, genv, fuel))
        if not isinstance(scrut, NatV):
            raise StuckTerm("ifz scrutinee is not a natural: %r" % (scrut,))
        branch = term.then if _nat_is_zero(scrut.chain) else term.orelse
        return eval_term(branch, env, genv, fuel)
    if isinstance(term, Fix):
        if fuel <= 0:
            raise Diverged("fix: unrolling fuel exhausted")
        fn_value = eval_term(term.body, env, genv, fuel)
        rec = Thunk(lambda: eval_term(term, env, genv, fuel - 1))
        return _apply(fn_value, rec, genv, fuel)
    if isinstance(term, Pair):
        return PairV(Thunk(lambda: eval_term(term.fst, env, genv, fuel)),
                     Thunk(lambda: eval_term(term.snd, env, genv, fuel)))
    if isinstance(term, Fst):
        value = whnf(eval_term(term.body, env, genv, fuel))
        if not isinstance(value, PairV):
            raise StuckTerm("fst of a non-pair: %r" % (value,))
        return whnf(force(value.fst))
    if isinstance(term, Snd):
        value = whnf(eval_term(term.body, env, genv, fuel))
        if not isinstance(value, PairV):
            raise StuckTerm("snd of a non-pair: %r" % (value,))
        return whnf(force(value.snd))
    if isinstance(term, Return):
        if term.payload is None:
            raise StuckTerm("return node lacks a payload annotation; typecheck first")
        payload = term.payload
        body_thunk = Thunk(lambda: eval_term(term.body, env, genv, fuel))
        value = wrap_lazy(payload, body_thunk)
        return DistV(sampler_ret(value), payload)
    if isinstance(term, Bind):
        if term.payloads is None:
            raise StuckTerm("bind node lacks payload annotations; typecheck first")
        _, out_payload = term.payloads
        source = whnf(eval_term(term.source, env, genv, fuel))
        if not isinstance(source, DistV):
            raise StuckTerm("bind source is not a distribution: %r" % (source,))
        s1 = source.sampler
        captured_env = env
        name, body = term.name, term.body

        def go(tape: BitTape):
            if s1.is_bottom:
                raise Diverged("bottom sampler")
            te, to = tape.split()
            drawn = Thunk(lambda: s1.run(te))

            def rest():
                env2 = dict(captured_env)
                env2[name] = drawn
                d2 = whnf(eval_term(body, env2, genv, fuel))
                if not isinstance(d2, DistV):
                    raise StuckTerm("bind body is not a distribution: %r" % (d2,))
                return d2.sampler.run(to)

            return wrap_lazy(out_payload, Thunk(rest))

        return DistV(Sampler(go), out_payload)
    raise StuckTerm("unrecognized term %r" % (term,))


# ---------------------------------------------------------------------------
# Default global environment
# ---------------------------------------------------------------------------

def _real_valued(lib: Sampler) -> Sampler:
    return Sampler(lambda tape: RealV(lib.run(tape)), is_bottom=lib.is_bottom)


def _nat_valued(lib: Sampler) -> Sampler:
    def go(tape):
        raw = lib.run(tape)
        if isinstance(raw, bool):
            raw = int(raw)
        return NatV(raw)
    return Sampler(go, is_bottom=lib.is_bottom)


def default_global_env() -> GlobalEnv:
    """Registry with pi, the basic real operations, and the seven primitive
    distributions.  Continuity of real operations is asserted by the
    registrant, not verified; arity and payload well-formedness are checked.
    """
    genv = GlobalEnv()
    genv.register_real("pi", pi())
    genv.register_rop("add", 2, add, declared_type=rop_type(2))
    genv.register_rop("sub", 2, sub, declared_type=rop_type(2))
    genv.register_rop("mul", 2, mul, declared_type=rop_type(2))
    genv.register_rop("sqrt", 1, sqrt_c, declared_type=rop_type(1))
    genv.register_rop("log", 1, log_c, declared_type=rop_type(1))
    genv.rops["+"] = genv.rops["add"]
    genv.rops["-"] = genv.rops["sub"]
    genv.rops["*"] = genv.rops["mul"]
    genv.register_dist("stdUniform", REAL, _real_valued(std_uniform()))
    genv.register_dist("stdBernoulli", NAT, _nat_valued(std_bernoulli()))
    genv.register_dist("stdGeometric", NAT, _nat_valued(std_geometric()))
    genv.register_dist("stdNormal", REAL, _real_valued(std_normal()))
    genv.register_dist("cantor", REAL, _real_valued(cantor()))
    genv.register_dist("botSamp", REAL, _real_valued(bot_samp()))
    genv.register_dist("botSampBot", REAL, _real_valued(bot_samp_bot()))
    return genv


# ---------------------------------------------------------------------------
# Running distribution programs
# ---------------------------------------------------------------------------

def _raw_value(value):
    value = whnf(value)
    if isinstance(value, NatV):
        return value.chain
    if isinstance(value, RealV):
        return value.creal
    if isinstance(value, PairV):
        return (Thunk(lambda: _raw_value(force(value.fst))),
                Thunk(lambda: _raw_value(force(value.snd))))
    raise StuckTerm("sample has no first-order representation: %r" % (value,))


def as_raw_sampler(dist: DistV) -> Sampler:
    """View a distribution value as a sampler over plain reals/naturals/
    tuples, preserving the laziness of the wrapped draws."""
    return Sampler(lambda tape: _raw_value(dist.sampler.run(tape)),
                   is_bottom=dist.sampler.is_bottom)


def _render_value(value, precision: int, fuel: int) -> dict:
    value = whnf(value)
    if isinstance(value, NatV):
        return {"value": nat_resolve(value.chain, fuel)}
    if isinstance(value, RealV):
        a = value.creal.approx(precision)
        return {"value": format_rational(a),
                "radius": format_rational(Fraction(2, 2 ** precision))}
    if isinstance(value, PairV):
        left = _render_value(force(value.fst), precision, fuel)
        right = _render_value(force(value.snd), precision, fuel)
        return {"value": [left["value"], right["value"]]}
    raise StuckTerm("cannot render %r" % (value,))


def run_dist(source, tape: BitTape, precision: int = 10,
             fuel: Optional[int] = None, genv: Optional[GlobalEnv] = None) -> dict:
    """Evaluate a distribution program and run its sampler on a tape.

    Returns a report with the rendered value at the requested precision,
    the enclosure radius, and the number of tape bits consumed; divergence
    and tape exhaustion are data, not exceptions.
    """
    if genv is None:
        genv = default_global_env()
    if fuel is None:
        fuel = default_fuel()
    term = parse(source, genv) if isinstance(source, str) else source
    ty = infer({}, genv, term)
    if not isinstance(ty, TDist):
        raise TypecheckError("expected a distribution program, found %s" % ty)
    dist = whnf(eval_term(term, {}, genv, fuel))
    report = {"precision": precision, "diverged": False}
    try:
        value = dist.sampler.run(tape)
        report.update(_render_value(value, precision, fuel))
    except Diverged as exc:
        report["diverged"] = True
        report["reason"] = exc.reason
    except OutOfBits as exc:
        report["diverged"] = True
        report["reason"] = str(exc)
    report["bits_read"] = tape.bits_read
    return report
