"""Gradual typechecking, static elaboration and ascription simplification."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from evgrad import surface as S
from evgrad.evidence import Evidence, initial_evidence
from evgrad.surface import NOSPAN, Printer, Span
from evgrad.surface import ASCR, ATOM, APP, ASSIGN, OP_LEVEL, POSTFIX, SEQ, UNARY
from evgrad.typelattice import (
    BOOL, DYN, FLOAT, INT, UNIT, Dyn, Fun, GradualType, Named, Ref, Tuple, Vec, VariantEnv,
    germ_of, is_static, meet, precision_le, show_type,
)


class TypeCheckError(Exception):
    """Static type error, carrying the offending span and type pair."""

    def __init__(self, message: str, span: Span = NOSPAN, pair: tuple | None = None):
        if pair is not None:
            message += f": {show_type(pair[0])} is not consistent with {show_type(pair[1])}"
        super().__init__(f"{span}: {message}" if span is not NOSPAN else message)
        self.span = span
        self.pair = pair


# -------------------------------------------------------- elaborated nodes


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


class EExpr:
    __slots__ = ()


@dataclass
class ELit(EExpr):
    value: object  # int, bool, float or None for unit
    ty: GradualType
    span: Span = _span()


@dataclass
class EVar(EExpr):
    name: str
    ty: GradualType
    span: Span = _span()


@dataclass
class EParam:
    name: str
    ty: GradualType
    annotated: bool


@dataclass
class ELam(EExpr):
    params: tuple
    body: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EApp(EExpr):
    fn: EExpr
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class EBinOp(EExpr):
    op: str
    lhs: EExpr
    rhs: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EPrim(EExpr):
    op: str
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class EIf(EExpr):
    cond: EExpr
    then: EExpr
    orelse: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class ELoop(EExpr):
    var: str
    lo: EExpr
    hi: EExpr
    body: EExpr
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class ELet(EExpr):
    name: str
    var_ty: GradualType
    bound: EExpr
    body: EExpr
    ty: GradualType
    annotated: bool = False
    span: Span = _span()


@dataclass
class ELetRec(EExpr):
    name: str
    var_ty: GradualType
    bound: EExpr
    body: EExpr
    ty: GradualType
    annotated: bool = False
    span: Span = _span()


@dataclass
class ERef(EExpr):
    init: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EDeref(EExpr):
    ref: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EAssign(EExpr):
    ref: EExpr
    value: EExpr
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class EVec(EExpr):
    size: EExpr
    init: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EVecGet(EExpr):
    vec: EExpr
    index: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class EVecSet(EExpr):
    vec: EExpr
    index: EExpr
    value: EExpr
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class ETuple(EExpr):
    items: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class EProj(EExpr):
    tup: EExpr
    index: int
    ty: GradualType
    span: Span = _span()


@dataclass
class ECon(EExpr):
    ctor: str
    ctor_id: int
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class EArm:
    ctor: str
    ctor_id: int
    vars: tuple  # of (name, type)
    body: EExpr
    span: Span = _span()


@dataclass
class EMatch(EExpr):
    scrutinee: EExpr
    arms: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class EAscribe(EExpr):
    """`ev` justifies that `subject` may be used at type `ty` (the target)."""

    ev: Evidence
    subject: EExpr
    ty: GradualType
    source: bool = False
    span: Span = _span()


@dataclass
class ESeq(EExpr):
    first: EExpr
    second: EExpr
    ty: GradualType
    span: Span = _span()


@dataclass
class ElabProgram:
    variants: VariantEnv
    main: EExpr


def sub_exprs(node) -> list:
    """Immediate sub-expressions of an elaborated node, in evaluation order."""
    out = []
    for f in fields(node):
        v = getattr(node, f.name)
        if isinstance(v, EExpr):
            out.append(v)
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, EExpr):
                    out.append(x)
                elif isinstance(x, EArm):
                    out.append(x.body)
    return out


def map_children(node, fn):
    """Copy of `node` with `fn` applied to each direct sub-expression."""
    updates = {}
    for f in fields(node):
        v = getattr(node, f.name)
        if isinstance(v, EExpr):
            updates[f.name] = fn(v)
        elif isinstance(v, tuple) and v and isinstance(v[0], (EExpr, EArm)):
            updates[f.name] = tuple(
                replace(x, body=fn(x.body)) if isinstance(x, EArm) else fn(x) for x in v
            )
    return replace(node, **updates) if updates else node


def iter_nodes(e):
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(sub_exprs(n)))


# --------------------------------------------------------------- primitives

PRIM_TYPES = {
    "print_int": ((INT,), UNIT),
    "print_bool": ((BOOL,), UNIT),
    "print_float": ((FLOAT,), UNIT),
    "not": ((BOOL,), BOOL),
    "float_of_int": ((INT,), FLOAT),
    "int_of_float": ((FLOAT,), INT),
    "sqrt": ((FLOAT,), FLOAT),
    "read_int": ((UNIT,), INT),
}

BINOP_TYPES = {}
for _op in ("+", "-", "*", "/", "%"):
    BINOP_TYPES[_op] = (INT, INT)
for _op in ("<", "<=", ">", ">=", "=", "<>"):
    BINOP_TYPES[_op] = (INT, BOOL)
for _op in ("+.", "-.", "*.", "/."):
    BINOP_TYPES[_op] = (FLOAT, FLOAT)
for _op in ("<.", "<=.", ">.", ">=.", "=."):
    BINOP_TYPES[_op] = (FLOAT, BOOL)
for _op in ("&&", "||"):
    BINOP_TYPES[_op] = (BOOL, BOOL)


# ---------------------------------------------------------------- typecheck


def build_variants(decls) -> VariantEnv:
    types, seen_ctors = {}, set()
    for d in decls:
        if d.name in types or d.name in ("int", "bool", "float", "unit", "vec"):
            raise TypeCheckError(f"duplicate or reserved type name {d.name!r}", d.span)
        types[d.name] = []
        for c in d.ctors:
            if c.name in seen_ctors:
                raise TypeCheckError(f"duplicate constructor {c.name!r}", c.span)
            seen_ctors.add(c.name)
            types[d.name].append((c.name, tuple(c.fields)))
    env = VariantEnv(types)
    for d in decls:
        for c in d.ctors:
            for t in c.fields:
                _check_named(t, env, c.span)
    return env


def _check_named(t: GradualType, variants: VariantEnv, span: Span) -> None:
    tt = type(t)
    if tt is Named:
        if t.name not in variants.types:
            raise TypeCheckError(f"unknown type {t.name!r}", span)
    elif tt is Ref or tt is Vec:
        _check_named(t.elem, variants, span)
    elif tt is Tuple:
        for x in t.items:
            _check_named(x, variants, span)
    elif tt is Fun:
        for x in t.params:
            _check_named(x, variants, span)
        _check_named(t.ret, variants, span)


def _require(actual: GradualType, expected: GradualType, span: Span, what: str) -> None:
    if meet(actual, expected) is None:
        raise TypeCheckError(what, span, (actual, expected))


class _Checker:
    def __init__(self, variants: VariantEnv):
        self.variants = variants

    def ann(self, t, span):
        if t is None:
            return DYN
        _check_named(t, self.variants, span)
        return t

    def check(self, e, env: dict) -> EExpr:
        method = getattr(self, "t_" + type(e).__name__)
        return method(e, env)

    def t_IntLit(self, e, env):
        return ELit(e.value, INT, e.span)

    def t_FloatLit(self, e, env):
        return ELit(float(e.value), FLOAT, e.span)

    def t_BoolLit(self, e, env):
        return ELit(e.value, BOOL, e.span)

    def t_UnitLit(self, e, env):
        return ELit(None, UNIT, e.span)

    def t_Var(self, e, env):
        if e.name not in env:
            raise TypeCheckError(f"unbound variable {e.name!r}", e.span)
        return EVar(e.name, env[e.name], e.span)

    def t_Lam(self, e, env):
        params = []
        inner = dict(env)
        names = set()
        for p in e.params:
            if p.name in names:
                raise TypeCheckError(f"duplicate parameter {p.name!r}", p.span)
            names.add(p.name)
            t = self.ann(p.ty, p.span)
            params.append(EParam(p.name, t, p.ty is not None))
            inner[p.name] = t
        body = self.check(e.body, inner)
        ty = Fun(tuple(p.ty for p in params), body.ty)
        return ELam(tuple(params), body, ty, e.span)

    def t_App(self, e, env):
        fn = self.check(e.fn, env)
        args = tuple(self.check(a, env) for a in e.args)
        ft = fn.ty
        if type(ft) is Dyn:
            return EApp(fn, args, DYN, e.span)
        if type(ft) is not Fun:
            raise TypeCheckError("application of a non-function", e.fn.span, (ft, germ_of("apply", len(args))))
        if len(ft.params) != len(args):
            raise TypeCheckError(
                f"function expects {len(ft.params)} arguments, got {len(args)}", e.span,
                (ft, germ_of("apply", len(args))),
            )
        for a, p in zip(args, ft.params):
            _require(a.ty, p, a.span, "argument type mismatch")
        return EApp(fn, args, ft.ret, e.span)

    def t_BinOp(self, e, env):
        operand, result = BINOP_TYPES[e.op]
        lhs = self.check(e.lhs, env)
        rhs = self.check(e.rhs, env)
        _require(lhs.ty, operand, lhs.span, f"left operand of {e.op}")
        _require(rhs.ty, operand, rhs.span, f"right operand of {e.op}")
        return EBinOp(e.op, lhs, rhs, result, e.span)

    def t_PrimOp(self, e, env):
        ptys, result = PRIM_TYPES[e.op]
        args = tuple(self.check(a, env) for a in e.args)
        for a, p in zip(args, ptys):
            _require(a.ty, p, a.span, f"argument of {e.op}")
        return EPrim(e.op, args, result, e.span)

    def t_If(self, e, env):
        c = self.check(e.cond, env)
        _require(c.ty, BOOL, c.span, "condition")
        th = self.check(e.then, env)
        el = self.check(e.orelse, env)
        ty = meet(th.ty, el.ty)
        if ty is None:
            raise TypeCheckError("conditional branches disagree", e.span, (th.ty, el.ty))
        return EIf(c, th, el, ty, e.span)

    def t_Loop(self, e, env):
        lo = self.check(e.lo, env)
        hi = self.check(e.hi, env)
        _require(lo.ty, INT, lo.span, "loop bound")
        _require(hi.ty, INT, hi.span, "loop bound")
        body = self.check(e.body, {**env, e.var: INT})
        return ELoop(e.var, lo, hi, body, UNIT, e.span)

    def t_Let(self, e, env):
        bound = self.check(e.bound, env)
        if e.ty is None:
            vt = bound.ty
        else:
            vt = self.ann(e.ty, e.ty_span)
            _require(bound.ty, vt, bound.span, f"binding of {e.name!r}")
        body = self.check(e.body, {**env, e.name: vt})
        return ELet(e.name, vt, bound, body, body.ty, e.ty is not None, e.span)

    def t_LetRec(self, e, env):
        if not isinstance(e.bound, S.Lam):
            raise TypeCheckError("let rec must bind a function", e.bound.span)
        vt = self.ann(e.ty, e.ty_span)
        inner = {**env, e.name: vt}
        bound = self.check(e.bound, inner)
        _require(bound.ty, vt, bound.span, f"binding of {e.name!r}")
        body = self.check(e.body, inner)
        return ELetRec(e.name, vt, bound, body, body.ty, e.ty is not None, e.span)

    def t_MkRef(self, e, env):
        init = self.check(e.init, env)
        return ERef(init, Ref(init.ty), e.span)

    def _elim(self, sub, kind, span):
        t = sub.ty
        if type(t) is Dyn:
            return DYN
        cls = Ref if kind == "deref" else Vec
        if type(t) is not cls:
            raise TypeCheckError("wrong kind of structure", span, (t, germ_of(kind)))
        return t.elem

    def t_Deref(self, e, env):
        r = self.check(e.ref, env)
        return EDeref(r, self._elim(r, "deref", e.ref.span), e.span)

    def t_Assign(self, e, env):
        r = self.check(e.ref, env)
        v = self.check(e.value, env)
        elem = self._elim(r, "deref", e.ref.span)
        _require(v.ty, elem, v.span, "assigned value")
        return EAssign(r, v, UNIT, e.span)

    def t_MkVec(self, e, env):
        n = self.check(e.size, env)
        init = self.check(e.init, env)
        _require(n.ty, INT, n.span, "vector size")
        return EVec(n, init, Vec(init.ty), e.span)

    def t_VecGet(self, e, env):
        v = self.check(e.vec, env)
        i = self.check(e.index, env)
        _require(i.ty, INT, i.span, "vector index")
        return EVecGet(v, i, self._elim(v, "vec", e.vec.span), e.span)

    def t_VecSet(self, e, env):
        v = self.check(e.vec, env)
        i = self.check(e.index, env)
        x = self.check(e.value, env)
        _require(i.ty, INT, i.span, "vector index")
        _require(x.ty, self._elim(v, "vec", e.vec.span), x.span, "stored value")
        return EVecSet(v, i, x, UNIT, e.span)

    def t_MkTuple(self, e, env):
        items = tuple(self.check(x, env) for x in e.items)
        return ETuple(items, Tuple(tuple(x.ty for x in items)), e.span)

    def t_Proj(self, e, env):
        t = self.check(e.tup, env)
        tt = t.ty
        if type(tt) is Dyn:
            return EProj(t, e.index, DYN, e.span)
        if type(tt) is not Tuple or e.index >= len(tt.items):
            raise TypeCheckError(f"projection #{e.index}", e.span, (tt, germ_of("proj", e.index)))
        return EProj(t, e.index, tt.items[e.index], e.span)

    def t_Construct(self, e, env):
        info = self.variants.ctors.get(e.ctor)
        if info is None:
            raise TypeCheckError(f"unknown constructor {e.ctor!r}", e.span)
        tname, cid, ftys = info
        if len(ftys) != len(e.args):
            raise TypeCheckError(f"{e.ctor} expects {len(ftys)} fields, got {len(e.args)}", e.span)
        args = tuple(self.check(a, env) for a in e.args)
        for a, ft in zip(args, ftys):
            _require(a.ty, ft, a.span, f"field of {e.ctor}")
        return ECon(e.ctor, cid, args, Named(tname), e.span)

    def t_Match(self, e, env):
        scrut = self.check(e.scrutinee, env)
        tnames = set()
        for arm in e.arms:
            info = self.variants.ctors.get(arm.ctor)
            if info is None:
                raise TypeCheckError(f"unknown constructor {arm.ctor!r}", arm.span)
            tnames.add(info[0])
        if len(tnames) != 1:
            raise TypeCheckError("match arms mix constructors of different types", e.span)
        (tname,) = tnames
        _require(scrut.ty, Named(tname), scrut.span, "match scrutinee")
        declared = [c for c, _ in self.variants.types[tname]]
        given = [arm.ctor for arm in e.arms]
        if sorted(given) != sorted(declared):
            raise TypeCheckError(f"match must cover each constructor of {tname} exactly once", e.span)
        arms = []
        ty = DYN
        for arm in e.arms:
            _, cid, ftys = self.variants.ctors[arm.ctor]
            if len(arm.vars) != len(ftys):
                raise TypeCheckError(f"{arm.ctor} binds {len(ftys)} fields", arm.span)
            inner = dict(env)
            inner.update(zip(arm.vars, ftys))
            body = self.check(arm.body, inner)
            m = meet(ty, body.ty)
            if m is None:
                raise TypeCheckError("match arms disagree", arm.span, (ty, body.ty))
            ty = m
            arms.append(EArm(arm.ctor, cid, tuple(zip(arm.vars, ftys)), body, arm.span))
        return EMatch(scrut, tuple(arms), ty, e.span)

    def t_Ascription(self, e, env):
        sub = self.check(e.expr, env)
        target = self.ann(e.ty, e.span)
        ev = initial_evidence(sub.ty, target)
        if ev is None:
            raise TypeCheckError("ascription", e.span, (sub.ty, target))
        return EAscribe(ev, sub, target, True, e.span)

    def t_Seq(self, e, env):
        a = self.check(e.first, env)
        b = self.check(e.second, env)
        return ESeq(a, b, b.ty, e.span)


def typecheck(program: S.Program) -> ElabProgram:
    """Annotate every node with its gradual type.

    Source ascriptions already carry their initial evidence; the other
    consistency uses are made explicit by `elaborate_static`.
    """
    variants = build_variants(program.decls)
    main = _Checker(variants).check(program.main, {})
    return ElabProgram(variants, main)


# ------------------------------------------------------- static elaboration


def _asc(e: EExpr, target: GradualType) -> EAscribe:
    ev = initial_evidence(e.ty, target)
    if ev is None:  # unreachable for typechecked input
        raise TypeCheckError("inconsistent elaboration", e.span, (e.ty, target))
    return EAscribe(ev, e, target, False, e.span)


def _value(e: EExpr) -> EExpr:
    """Literal and lambda values carry their own evidence."""
    if isinstance(e, (ELit, ELam)):
        return EAscribe(Evidence(e.ty), e, e.ty, False, e.span)
    return e


class _Elaborator:
    def __init__(self, variants: VariantEnv):
        self.variants = variants

    def el(self, e: EExpr) -> EExpr:
        return _value(getattr(self, "e_" + type(e).__name__)(e))

    def at(self, e: EExpr, target: GradualType) -> EExpr:
        return _asc(self.el(e), target)

    def own(self, e: EExpr) -> EExpr:
        return self.at(e, e.ty)

    def e_ELit(self, e):
        return e

    def e_EVar(self, e):
        return e

    def e_ELam(self, e):
        return replace(e, body=self.el(e.body))

    def e_EApp(self, e):
        ft = e.fn.ty
        if type(ft) is Dyn:
            fn = self.at(e.fn, germ_of("apply", len(e.args)))
            ptys = (DYN,) * len(e.args)
        else:
            fn = self.own(e.fn)
            ptys = ft.params
        args = tuple(self.at(a, p) for a, p in zip(e.args, ptys))
        return replace(e, fn=fn, args=args)

    def e_EBinOp(self, e):
        operand, _ = BINOP_TYPES[e.op]
        return replace(e, lhs=self.at(e.lhs, operand), rhs=self.at(e.rhs, operand))

    def e_EPrim(self, e):
        ptys, _ = PRIM_TYPES[e.op]
        return replace(e, args=tuple(self.at(a, p) for a, p in zip(e.args, ptys)))

    def e_EIf(self, e):
        return replace(e, cond=self.at(e.cond, BOOL), then=self.at(e.then, e.ty), orelse=self.at(e.orelse, e.ty))

    def e_ELoop(self, e):
        return replace(e, lo=self.at(e.lo, INT), hi=self.at(e.hi, INT), body=self.el(e.body))

    def e_ELet(self, e):
        bound = self.at(e.bound, e.var_ty) if e.annotated else self.el(e.bound)
        return replace(e, bound=bound, body=self.el(e.body))

    def e_ELetRec(self, e):
        return replace(e, bound=self.at(e.bound, e.var_ty), body=self.el(e.body))

    def e_ERef(self, e):
        return replace(e, init=self.own(e.init))

    def _struct(self, sub, kind):
        if type(sub.ty) is Dyn:
            return self.at(sub, germ_of(kind))
        return self.own(sub)

    def _elem(self, sub):
        return DYN if type(sub.ty) is Dyn else sub.ty.elem

    def e_EDeref(self, e):
        return replace(e, ref=self._struct(e.ref, "deref"))

    def e_EAssign(self, e):
        return replace(e, ref=self._struct(e.ref, "deref"), value=self.at(e.value, self._elem(e.ref)))

    def e_EVec(self, e):
        return replace(e, size=self.at(e.size, INT), init=self.own(e.init))

    def e_EVecGet(self, e):
        return replace(e, vec=self._struct(e.vec, "vec"), index=self.at(e.index, INT))

    def e_EVecSet(self, e):
        return replace(
            e, vec=self._struct(e.vec, "vec"), index=self.at(e.index, INT),
            value=self.at(e.value, self._elem(e.vec)),
        )

    def e_ETuple(self, e):
        return replace(e, items=tuple(self.own(x) for x in e.items))

    def e_EProj(self, e):
        # A `?` subject is checked at runtime for a wide enough tuple.
        if type(e.tup.ty) is Dyn:
            return replace(e, tup=self.el(e.tup))
        return replace(e, tup=self.own(e.tup))

    def e_ECon(self, e):
        _, _, ftys = self.variants.ctors[e.ctor]
        return replace(e, args=tuple(self.at(a, t) for a, t in zip(e.args, ftys)))

    def e_EMatch(self, e):
        scrut = self.at(e.scrutinee, Named(self.variants.ctors[e.arms[0].ctor][0]))
        arms = tuple(replace(a, body=self.at(a.body, e.ty)) for a in e.arms)
        return replace(e, scrutinee=scrut, arms=arms)

    def e_EAscribe(self, e):
        return replace(e, subject=self.el(e.subject))

    def e_ESeq(self, e):
        return replace(e, first=self.el(e.first), second=self.el(e.second))


def elaborate_static(program: ElabProgram) -> ElabProgram:
    """Make every use of consistency an explicit evidence ascription."""
    main = _Elaborator(program.variants).el(program.main)
    return ElabProgram(program.variants, main)


# ----------------------------------------------------------- simplification


def _is_raw(e: EExpr) -> bool:
    return isinstance(e, (ELit, ELam))


def _float_rep(t: GradualType, dfo: bool) -> bool:
    return dfo and t == FLOAT


def simplify_ascriptions(program: ElabProgram, dfo: bool = False) -> ElabProgram:
    """Collapse ascription chains and drop ascriptions that cannot refine.

    A chain whose combined evidence is undefined is kept, so the failure
    still happens at runtime. With `dfo`, ascriptions that change a float's
    representation are kept as well.
    """

    def simp(e):
        e = map_children(e, simp)
        if not isinstance(e, EAscribe):
            return e
        while isinstance(e.subject, EAscribe):
            inner = e.subject
            m = meet(inner.ev.type, e.ev.type)
            if m is None:
                break
            e = EAscribe(Evidence(m), inner.subject, e.ty, e.source or inner.source, e.span)
        s = e.subject
        if (
            not _is_raw(s)
            and not isinstance(s, EAscribe)
            and precision_le(s.ty, e.ev.type)
            and _float_rep(s.ty, dfo) == _float_rep(e.ty, dfo)
        ):
            return s
        return e

    return ElabProgram(program.variants, simp(program.main))


# ---------------------------------------------------------------- retyping


def retype(program: ElabProgram) -> GradualType:
    """Recompute the type of an elaborated program, checking every ascription.

    Raises TypeCheckError if an ascription's evidence is not below both its
    subject's type and its target, or a node's recorded type disagrees with
    its children.
    """

    def go(e):
        for c in sub_exprs(e):
            go(c)
        if isinstance(e, EAscribe):
            if not precision_le(e.ev.type, e.ty):
                raise TypeCheckError("evidence above its target", e.span, (e.ev.type, e.ty))
            if meet(e.subject.ty, e.ev.type) is None:
                raise TypeCheckError("evidence inconsistent with subject", e.span, (e.subject.ty, e.ev.type))
        elif isinstance(e, ELet):
            if e.body.ty != e.ty:
                raise TypeCheckError("let type", e.span, (e.body.ty, e.ty))
        elif isinstance(e, ESeq):
            if e.second.ty != e.ty:
                raise TypeCheckError("sequence type", e.span, (e.second.ty, e.ty))
        elif isinstance(e, ELam):
            if e.ty.ret != e.body.ty and not precision_le(e.body.ty, e.ty.ret):
                raise TypeCheckError("lambda body", e.span, (e.body.ty, e.ty.ret))
        elif isinstance(e, EApp):
            ft = e.fn.ty
            if type(ft) is Fun:
                for a, p in zip(e.args, ft.params):
                    if meet(a.ty, p) is None:
                        raise TypeCheckError("argument", a.span, (a.ty, p))
        return e.ty

    return go(program.main)


def mentions_dyn(program: ElabProgram) -> bool:
    """True if any node type or evidence in the program contains `?`."""
    for n in iter_nodes(program.main):
        if not is_static(n.ty):
            return True
        if isinstance(n, EAscribe) and not is_static(n.ev.type):
            return True
        if isinstance(n, (ELet, ELetRec)) and not is_static(n.var_ty):
            return True
        if isinstance(n, ELam) and not all(is_static(p.ty) for p in n.params):
            return True
    for ctors in program.variants.types.values():
        for _, ftys in ctors:
            if not all(map(is_static, ftys)):
                return True
    return False


# ------------------------------------------------------------------ printer


class ElabPrinter(Printer):
    """Prints elaborated programs in `<G>e` notation."""

    def is_open(self, e) -> bool:
        return isinstance(e, (ELet, ELetRec, ELam, EIf, EMatch))

    def level(self, e) -> int:
        if isinstance(e, ESeq):
            return SEQ
        if isinstance(e, EAscribe):
            return ASCR if e.source else ATOM
        if isinstance(e, (EAssign, EVecSet)):
            return ASSIGN
        if isinstance(e, EBinOp):
            return OP_LEVEL[e.op]
        if isinstance(e, EDeref):
            return UNARY
        if isinstance(e, ELit) and isinstance(e.value, (int, float)) and not isinstance(e.value, bool):
            if str(e.value).startswith("-"):
                return UNARY
        if isinstance(e, (EApp, EPrim, ERef, EVec, EProj)):
            return APP
        if isinstance(e, EVecGet):
            return POSTFIX
        if self.is_open(e):
            return SEQ
        return ATOM

    def params(self, params) -> str:
        if len(params) == 1 and not params[0].annotated:
            return params[0].name
        parts = [f"{p.name}:{show_type(p.ty)}" if p.annotated else p.name for p in params]
        return "(" + ", ".join(parts) + ")"

    def node(self, e, tail: bool) -> str:
        pp = self.pp
        if isinstance(e, ELit):
            v = e.value
            if v is None:
                return "()"
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return S.format_float(v)
            return str(v)
        if isinstance(e, EVar):
            return e.name
        if isinstance(e, EAscribe):
            s = e.subject
            inner = self.node(s, False) if isinstance(s, (EVar, ELit)) and self.level(s) == ATOM else "(" + self.node(s, True) + ")"
            text = f"{e.ev}{inner}"
            return f"{text}::{show_type(e.ty)}" if e.source else text
        if isinstance(e, ELam):
            return f"fun {self.params(e.params)} -> {pp(e.body)}"
        if isinstance(e, EApp):
            return " ".join([pp(e.fn, POSTFIX, False)] + [pp(a, POSTFIX, False) for a in e.args])
        if isinstance(e, EPrim):
            return " ".join([e.op] + [pp(a, POSTFIX, False) for a in e.args])
        if isinstance(e, EBinOp):
            lvl = OP_LEVEL[e.op]
            left_need = lvl + 1 if lvl == OP_LEVEL["<"] else lvl
            return f"{pp(e.lhs, left_need, False)} {e.op} {pp(e.rhs, lvl + 1, tail)}"
        if isinstance(e, EIf):
            return f"if {pp(e.cond)} then {pp(e.then)} else {pp(e.orelse, ASCR, tail)}"
        if isinstance(e, ELoop):
            return f"loop {e.var} = {pp(e.lo)} to {pp(e.hi)} do {pp(e.body)} done"
        if isinstance(e, (ELet, ELetRec)):
            kw = "let rec" if isinstance(e, ELetRec) else "let"
            ann = f" : {show_type(e.var_ty)}" if e.annotated else ""
            return f"{kw} {e.name}{ann} = {pp(e.bound)} in {pp(e.body)}"
        if isinstance(e, ERef):
            return f"ref {pp(e.init, POSTFIX, False)}"
        if isinstance(e, EDeref):
            return f"!{pp(e.ref, UNARY, tail)}"
        if isinstance(e, EAssign):
            return f"{pp(e.ref, OP_LEVEL['||'], False)} := {pp(e.value, OP_LEVEL['||'], tail)}"
        if isinstance(e, EVec):
            return f"vector {pp(e.size, POSTFIX, False)} {pp(e.init, POSTFIX, False)}"
        if isinstance(e, EVecGet):
            return f"{pp(e.vec, POSTFIX, False)}.[{pp(e.index)}]"
        if isinstance(e, EVecSet):
            return f"{pp(e.vec, POSTFIX, False)}.[{pp(e.index)}] <- {pp(e.value, OP_LEVEL['||'], tail)}"
        if isinstance(e, ETuple):
            return "(" + ", ".join(pp(x) for x in e.items) + ")"
        if isinstance(e, EProj):
            return f"#{e.index} {pp(e.tup, POSTFIX, False)}"
        if isinstance(e, ECon):
            return e.ctor + (" (" + ", ".join(pp(a) for a in e.args) + ")" if e.args else "")
        if isinstance(e, EMatch):
            arms = []
            for arm in e.arms:
                pat = arm.ctor + (" (" + ", ".join(n for n, _ in arm.vars) + ")" if arm.vars else "")
                arms.append(f"| {pat} -> ({pp(arm.body)})")
            return f"match {pp(e.scrutinee)} with " + " ".join(arms)
        if isinstance(e, ESeq):
            return f"{pp(e.first, ASCR, False)}; {pp(e.second, SEQ, tail)}"
        raise TypeError(f"cannot print {type(e).__name__}")


def show_elab(program_or_expr) -> str:
    e = program_or_expr.main if isinstance(program_or_expr, ElabProgram) else program_or_expr
    return ElabPrinter().pp(e)
