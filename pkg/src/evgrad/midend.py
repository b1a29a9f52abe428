"""Normalization and dynamic elaboration of elaborated programs.

The pipeline: alpha-renaming, ANF conversion, dynamic ascription insertion
(dom/cod/content evidence read from runtime values), germ specialization,
pruning of ascriptions that cannot refine anything, and closure conversion
with direct calls for known callees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from evgrad import checker as C
from evgrad.evidence import Evidence
from evgrad.surface import NOSPAN, Span
from evgrad.typelattice import (
    BOOL, DYN, FLOAT, INT, UNIT, Base, Dyn, Fun, GradualType, Named, Ref, Tuple, Vec, VariantEnv,
    is_static, show_type,
)

# ------------------------------------------------------------------ core IR


@dataclass(frozen=True)
class AVar:
    name: str
    ty: GradualType

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ALit:
    value: object
    ty: GradualType

    def __str__(self):
        return _show_lit(self.value)


def _show_lit(v) -> str:
    if v is None:
        return "()"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


class Comp:
    """A computation: the right-hand side of a let or a tail expression."""

    __slots__ = ()


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


@dataclass
class CAtom(Comp):
    atom: object

    @property
    def ty(self):
        return self.atom.ty


@dataclass
class CBinOp(Comp):
    op: str
    lhs: object
    rhs: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CPrim(Comp):
    op: str
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CApp(Comp):
    fn: AVar
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CDirectCall(Comp):
    label: str
    fn: AVar
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CAscribe(Comp):
    atom: object
    ev: Evidence
    ty: GradualType
    source: bool = False
    span: Span = _span()


# Evidence sources for dynamic ascriptions.


@dataclass(frozen=True)
class Dom:
    index: int
    fn: AVar

    def __str__(self):
        return f"dom({self.index}, {self.fn})"


@dataclass(frozen=True)
class Cod:
    def __str__(self):
        return "cod(self)"


@dataclass(frozen=True)
class RefContent:
    ref: AVar

    def __str__(self):
        return f"ref-content({self.ref})"


@dataclass(frozen=True)
class VecElem:
    vec: AVar

    def __str__(self):
        return f"vec-elem({self.vec})"


@dataclass(frozen=True)
class TupleComp:
    index: int
    tup: AVar

    def __str__(self):
        return f"tuple-proj({self.index}, {self.tup})"


@dataclass
class CDynAscribe(Comp):
    atom: object
    src: object
    on_read: bool
    ty: GradualType
    span: Span = _span()


@dataclass
class CCheckGerm(Comp):
    """Top-constructor check. Kinds: apply(n), deref, vec, proj(i), tuple(n), match(N)."""

    atom: object
    kind: str
    detail: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CLambda(Comp):
    params: tuple  # of checker.EParam
    body: object
    ev: GradualType
    ty: GradualType
    ret_ty: GradualType
    span: Span = _span()


@dataclass
class CMakeClosure(Comp):
    label: str
    captured: tuple  # of AVar
    ev: GradualType
    ty: GradualType
    span: Span = _span()


@dataclass
class CRef(Comp):
    init: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CDeref(Comp):
    ref: AVar
    ty: GradualType
    span: Span = _span()


@dataclass
class CAssign(Comp):
    ref: AVar
    value: object
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class CVec(Comp):
    size: object
    init: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CVecGet(Comp):
    vec: AVar
    index: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CVecSet(Comp):
    vec: AVar
    index: object
    value: object
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class CTuple(Comp):
    items: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CProj(Comp):
    tup: AVar
    index: int
    ty: GradualType
    span: Span = _span()


@dataclass
class CCon(Comp):
    ctor: str
    ctor_id: int
    args: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CIf(Comp):
    cond: object
    then: object
    orelse: object
    ty: GradualType
    span: Span = _span()


@dataclass
class CArm:
    ctor: str
    ctor_id: int
    vars: tuple  # of (name, type)
    body: object


@dataclass
class CMatch(Comp):
    scrutinee: AVar
    arms: tuple
    ty: GradualType
    span: Span = _span()


@dataclass
class CLoop(Comp):
    var: str
    lo: object
    hi: object
    body: object
    ty: GradualType = UNIT
    span: Span = _span()


@dataclass
class Let:
    var: str
    ty: GradualType
    rhs: Comp
    body: object


@dataclass
class LetRec:
    """Recursive binding of a function. `post` ascriptions apply after creation."""

    var: str
    ty: GradualType
    rhs: Comp  # CLambda before closure conversion, CMakeClosure after
    post: tuple  # of (Evidence, target type, span)
    body: object


@dataclass
class Code:
    label: str
    params: tuple  # of (name, type)
    captured: tuple  # of (name, type)
    body: object
    fun_ty: GradualType
    ret_ty: GradualType
    self_name: str | None = None


@dataclass
class CoreProgram:
    variants: VariantEnv
    main: object
    codes: dict = field(default_factory=dict)
    fully_static: bool = False


def expr_ty(e) -> GradualType:
    while isinstance(e, (Let, LetRec)):
        e = e.body
    return e.ty


# ---------------------------------------------------------------- traversal


def comp_subexprs(c) -> list:
    """Nested expressions (branches, bodies) of a computation."""
    if isinstance(c, CIf):
        return [c.then, c.orelse]
    if isinstance(c, CMatch):
        return [a.body for a in c.arms]
    if isinstance(c, CLoop):
        return [c.body]
    if isinstance(c, CLambda):
        return [c.body]
    return []


def iter_comps(e):
    """All computations in an expression, including nested bodies."""
    stack = [e]
    while stack:
        e = stack.pop()
        while isinstance(e, (Let, LetRec)):
            yield e.rhs
            stack.extend(comp_subexprs(e.rhs))
            e = e.body
        yield e
        stack.extend(comp_subexprs(e))


def map_expr(e, fn_comp):
    """Rebuild an expression, replacing each computation `c` by `fn_comp(c)`.

    `fn_comp` returns either a computation or a pair (bindings, computation)
    where bindings is a list of (var, type, comp) to insert before it.
    Nested expressions are mapped first.
    """
    if isinstance(e, Let):
        binds, rhs = _norm(fn_comp(_map_nested(e.rhs, fn_comp)))
        return _wrap(binds + [(e.var, e.ty, rhs)], map_expr(e.body, fn_comp))
    if isinstance(e, LetRec):
        binds, rhs = _norm(fn_comp(_map_nested(e.rhs, fn_comp)))
        return _wrap(binds, replace(e, rhs=rhs, body=map_expr(e.body, fn_comp)))
    binds, c = _norm(fn_comp(_map_nested(e, fn_comp)))
    return _wrap(binds, c)


def _norm(r):
    return r if isinstance(r, tuple) else ([], r)


def _map_nested(c, fn_comp):
    if isinstance(c, CIf):
        return replace(c, then=map_expr(c.then, fn_comp), orelse=map_expr(c.orelse, fn_comp))
    if isinstance(c, CMatch):
        return replace(c, arms=tuple(replace(a, body=map_expr(a.body, fn_comp)) for a in c.arms))
    if isinstance(c, CLoop):
        return replace(c, body=map_expr(c.body, fn_comp))
    if isinstance(c, CLambda):
        return replace(c, body=map_expr(c.body, fn_comp))
    return c


def _wrap(binds, tail):
    for var, ty, rhs in reversed(binds):
        tail = Let(var, ty, rhs, tail)
    return tail


def program_comps(p: CoreProgram):
    yield from iter_comps(p.main)
    for code in p.codes.values():
        yield from iter_comps(code.body)


# -------------------------------------------------------------- renaming


def alpha_rename(program: C.ElabProgram) -> C.ElabProgram:
    """Give every binder a globally unique name of the form ``name_k``."""
    counter = itertools.count()

    def fresh(name):
        base = name.rsplit("_", 1)[0] if _has_suffix(name) else name
        return f"{base}_{next(counter)}"

    def go(e, env):
        if isinstance(e, C.EVar):
            return replace(e, name=env.get(e.name, e.name))
        if isinstance(e, C.ELam):
            new = dict(env)
            params = []
            for p in e.params:
                n = fresh(p.name)
                new[p.name] = n
                params.append(replace(p, name=n))
            return replace(e, params=tuple(params), body=go(e.body, new))
        if isinstance(e, C.ELet):
            bound = go(e.bound, env)
            n = fresh(e.name)
            return replace(e, name=n, bound=bound, body=go(e.body, {**env, e.name: n}))
        if isinstance(e, C.ELetRec):
            n = fresh(e.name)
            new = {**env, e.name: n}
            return replace(e, name=n, bound=go(e.bound, new), body=go(e.body, new))
        if isinstance(e, C.ELoop):
            lo, hi = go(e.lo, env), go(e.hi, env)
            n = fresh(e.var)
            return replace(e, var=n, lo=lo, hi=hi, body=go(e.body, {**env, e.var: n}))
        if isinstance(e, C.EMatch):
            scrut = go(e.scrutinee, env)
            arms = []
            for a in e.arms:
                new = dict(env)
                vs = []
                for name, ty in a.vars:
                    n = fresh(name)
                    new[name] = n
                    vs.append((n, ty))
                arms.append(replace(a, vars=tuple(vs), body=go(a.body, new)))
            return replace(e, scrutinee=scrut, arms=tuple(arms))
        return C.map_children(e, lambda c: go(c, env))

    return C.ElabProgram(program.variants, go(program.main, {}))


def _has_suffix(name: str) -> bool:
    base, sep, num = name.rpartition("_")
    return bool(sep and base and num.isdigit())


# ------------------------------------------------------------------- ANF


class _Anf:
    def __init__(self):
        self.counter = itertools.count()

    def fresh(self, prefix="_t"):
        return f"{prefix}{next(self.counter)}"

    def expr(self, e):
        binds = []
        c = self.comp(e, binds)
        return _wrap_binds(binds, c)

    def atom(self, e, binds, prefix="_t"):
        c = self.comp(e, binds)
        if isinstance(c, CAtom):
            return c.atom
        t = self.fresh(prefix)
        binds.append((t, c.ty, c))
        return AVar(t, c.ty)

    def lam(self, lam: C.ELam, ev: GradualType, target: GradualType) -> CLambda:
        return CLambda(lam.params, self.expr(lam.body), ev, target, lam.body.ty, lam.span)

    def comp(self, e, binds):
        if isinstance(e, C.ELit):
            return CAtom(ALit(e.value, e.ty))
        if isinstance(e, C.EVar):
            return CAtom(AVar(e.name, e.ty))
        if isinstance(e, C.EAscribe):
            s = e.subject
            if isinstance(s, C.ELit):
                return CAtom(ALit(s.value, e.ty))
            if isinstance(s, C.ELam):
                return self.lam(s, e.ev.type, e.ty)
            a = self.atom(s, binds)
            return CAscribe(a, e.ev, e.ty, e.source, e.span)
        if isinstance(e, C.ELam):
            return self.lam(e, e.ty, e.ty)
        if isinstance(e, C.ELet):
            rhs = self.comp(e.bound, binds)
            binds.append((e.name, e.var_ty, rhs))
            return self.comp(e.body, binds)
        if isinstance(e, C.ELetRec):
            binds.append(self.letrec(e))
            return self.comp(e.body, binds)
        if isinstance(e, C.ESeq):
            c = self.comp(e.first, binds)
            binds.append((self.fresh(), c.ty, c))
            return self.comp(e.second, binds)
        if isinstance(e, C.EIf):
            a = self.atom(e.cond, binds)
            return CIf(a, self.expr(e.then), self.expr(e.orelse), e.ty, e.span)
        if isinstance(e, C.EBinOp):
            if e.op in ("&&", "||"):
                a = self.atom(e.lhs, binds)
                rhs = self.expr(e.rhs)
                short = CAtom(ALit(e.op == "||", BOOL))
                if e.op == "&&":
                    return CIf(a, rhs, short, BOOL, e.span)
                return CIf(a, short, rhs, BOOL, e.span)
            a = self.atom(e.lhs, binds)
            b = self.atom(e.rhs, binds)
            return CBinOp(e.op, a, b, e.ty, e.span)
        if isinstance(e, C.EPrim):
            return CPrim(e.op, tuple(self.atom(a, binds) for a in e.args), e.ty, e.span)
        if isinstance(e, C.EApp):
            f = self.atom(e.fn, binds)
            f = self._var(f, binds)
            args = tuple(self.atom(a, binds) for a in e.args)
            return CApp(f, args, e.ty, e.span)
        if isinstance(e, C.ELoop):
            lo = self.atom(e.lo, binds)
            hi = self.atom(e.hi, binds)
            return CLoop(e.var, lo, hi, self.expr(e.body), UNIT, e.span)
        if isinstance(e, C.ERef):
            return CRef(self.atom(e.init, binds), e.ty, e.span)
        if isinstance(e, C.EDeref):
            return CDeref(self._var(self.atom(e.ref, binds), binds), e.ty, e.span)
        if isinstance(e, C.EAssign):
            r = self._var(self.atom(e.ref, binds), binds)
            return CAssign(r, self.atom(e.value, binds), UNIT, e.span)
        if isinstance(e, C.EVec):
            return CVec(self.atom(e.size, binds), self.atom(e.init, binds), e.ty, e.span)
        if isinstance(e, C.EVecGet):
            v = self._var(self.atom(e.vec, binds), binds)
            return CVecGet(v, self.atom(e.index, binds), e.ty, e.span)
        if isinstance(e, C.EVecSet):
            v = self._var(self.atom(e.vec, binds), binds)
            i = self.atom(e.index, binds)
            return CVecSet(v, i, self.atom(e.value, binds), UNIT, e.span)
        if isinstance(e, C.ETuple):
            return CTuple(tuple(self.atom(x, binds) for x in e.items), e.ty, e.span)
        if isinstance(e, C.EProj):
            t = self._var(self.atom(e.tup, binds), binds)
            if type(t.ty) is Dyn:
                c = CCheckGerm(t, "proj", e.index, DYN, e.span)
                name = self.fresh()
                binds.append((name, DYN, c))
                t = AVar(name, DYN)
            return CProj(t, e.index, e.ty, e.span)
        if isinstance(e, C.ECon):
            return CCon(e.ctor, e.ctor_id, tuple(self.atom(a, binds) for a in e.args), e.ty, e.span)
        if isinstance(e, C.EMatch):
            s = self._var(self.atom(e.scrutinee, binds), binds)
            arms = tuple(CArm(a.ctor, a.ctor_id, a.vars, self.expr(a.body)) for a in e.arms)
            return CMatch(s, arms, e.ty, e.span)
        raise TypeError(f"unexpected node {type(e).__name__}")

    def _var(self, a, binds) -> AVar:
        """Eliminated subjects must be variables (literals are bound first)."""
        if isinstance(a, AVar):
            return a
        t = self.fresh()
        binds.append((t, a.ty, CAtom(a)))
        return AVar(t, a.ty)

    def letrec(self, e: C.ELetRec):
        chain = []
        s = e.bound
        while isinstance(s, C.EAscribe) and not isinstance(s.subject, C.ELam):
            chain.append((s.ev, s.ty, s.span))
            s = s.subject
        if isinstance(s, C.EAscribe):
            lam = self.lam(s.subject, s.ev.type, s.ty)
        else:
            lam = self.lam(s, s.ty, s.ty)
        return _LetRecBind(e.name, e.var_ty, lam, tuple(reversed(chain)))


@dataclass
class _LetRecBind:
    var: str
    ty: GradualType
    rhs: CLambda
    post: tuple


def _wrap_binds(binds, tail):
    for b in reversed(binds):
        if isinstance(b, _LetRecBind):
            tail = LetRec(b.var, b.ty, b.rhs, b.post, tail)
        else:
            var, ty, rhs = b
            tail = Let(var, ty, rhs, tail)
    return tail


def to_anf(program: C.ElabProgram) -> CoreProgram:
    """Name every intermediate result. Evaluation order is left to right."""
    main = _Anf().expr(program.main)
    return CoreProgram(program.variants, main, {}, not C.mentions_dyn(program))


# ----------------------------------------------------- dynamic elaboration


class _Fresh:
    def __init__(self, prefix):
        self.prefix = prefix
        self.counter = itertools.count()

    def __call__(self, base):
        return f"{base}{self.prefix}{next(self.counter)}"


def elaborate_dynamic(program: CoreProgram) -> CoreProgram:
    """Insert ascriptions whose evidence is only known at runtime.

    Call arguments are ascribed to dom(i, callee), function results to
    cod(self), and structure reads and writes to the content evidence.
    """
    fresh = _Fresh("$")

    def dyn(c):
        if isinstance(c, CLambda):
            body = c.body
            r = fresh("res")
            ty = expr_ty(body)
            tail = CDynAscribe(AVar(r, ty), Cod(), False, ty, c.span)
            return replace(c, body=_append(body, r, ty, tail))
        if isinstance(c, (CApp, CDirectCall)):
            binds, args = [], []
            for i, a in enumerate(c.args):
                n = fresh("arg")
                binds.append((n, a.ty, CDynAscribe(a, Dom(i, c.fn), False, a.ty, c.span)))
                args.append(AVar(n, a.ty))
            return binds, replace(c, args=tuple(args))
        if isinstance(c, CDeref):
            n = fresh("val")
            return [(n, c.ty, c)], CDynAscribe(AVar(n, c.ty), RefContent(c.ref), True, c.ty, c.span)
        if isinstance(c, CVecGet):
            n = fresh("val")
            return [(n, c.ty, c)], CDynAscribe(AVar(n, c.ty), VecElem(c.vec), True, c.ty, c.span)
        if isinstance(c, CProj):
            n = fresh("val")
            return [(n, c.ty, c)], CDynAscribe(AVar(n, c.ty), TupleComp(c.index, c.tup), True, c.ty, c.span)
        if isinstance(c, CAssign):
            n = fresh("val")
            a = c.value
            return [(n, a.ty, CDynAscribe(a, RefContent(c.ref), False, a.ty, c.span))], replace(c, value=AVar(n, a.ty))
        if isinstance(c, CVecSet):
            n = fresh("val")
            a = c.value
            return [(n, a.ty, CDynAscribe(a, VecElem(c.vec), False, a.ty, c.span))], replace(c, value=AVar(n, a.ty))
        return c

    return replace(program, main=map_expr(program.main, dyn))


def _append(e, var, ty, tail):
    """Bind the result of `e` to `var` and continue with `tail`."""
    if isinstance(e, Let):
        return replace(e, body=_append(e.body, var, ty, tail))
    if isinstance(e, LetRec):
        return replace(e, body=_append(e.body, var, ty, tail))
    return Let(var, ty, e, tail)


# --------------------------------------------------------- germ checks

def germ_kind(t: GradualType):
    """(kind, detail) if `t` is exactly a germ, else None."""
    tt = type(t)
    if tt is Fun and all(type(p) is Dyn for p in t.params) and type(t.ret) is Dyn:
        return "apply", len(t.params)
    if tt is Ref and type(t.elem) is Dyn:
        return "deref", None
    if tt is Vec and type(t.elem) is Dyn:
        return "vec", None
    if tt is Tuple and all(type(x) is Dyn for x in t.items):
        return "tuple", len(t.items)
    if tt is Named:
        return "match", t.name
    return None


def specialize_germs(program: CoreProgram) -> CoreProgram:
    """Turn ascriptions of `?` values to a germ into constructor checks."""

    def specialize(c):
        if isinstance(c, CAscribe) and type(c.atom.ty) is Dyn:
            g = germ_kind(c.ty)
            if g is not None:
                return CCheckGerm(c.atom, g[0], g[1], c.ty, c.span)
        return c

    return replace(program, main=map_expr(program.main, specialize))


# ------------------------------------------------------------------ pruning


def _atomic(t: GradualType) -> bool:
    return type(t) in (Base, Named)


def source_bound(src, ret_ty: GradualType | None) -> GradualType:
    """Static upper bound of the evidence a dynamic ascription would read."""
    if isinstance(src, Dom):
        ft = src.fn.ty
        return ft.params[src.index] if type(ft) is Fun else DYN
    if isinstance(src, Cod):
        return ret_ty if ret_ty is not None else DYN
    if isinstance(src, RefContent):
        t = src.ref.ty
        return t.elem if type(t) is Ref else DYN
    if isinstance(src, VecElem):
        t = src.vec.ty
        return t.elem if type(t) is Vec else DYN
    if isinstance(src, TupleComp):
        t = src.tup.ty
        return t.items[src.index] if type(t) is Tuple else DYN
    raise TypeError(src)


def prune_dynamic_ascriptions(program: CoreProgram, mode: str = "g") -> CoreProgram:
    """Delete dynamic ascriptions that can never refine their subject.

    Call-side and write-side ascriptions go when the static bound is fully
    precise. Read-side ascriptions also need the content to be trustworthy:
    either the whole program is static, or structures are monotonic (mode
    ``mv``) and the content type is a precise atomic type.
    """
    static_program = program.fully_static

    def walk(e, ret_ty):
        def prune(c):
            if isinstance(c, CLambda):
                return replace(c, body=walk(c.body, c.ret_ty))
            if isinstance(c, CDynAscribe):
                bound = source_bound(c.src, ret_ty)
                if not is_static(bound):
                    return c
                if not c.on_read or static_program or (mode == "mv" and _atomic(bound)):
                    return CAtom(c.atom)
            return c

        return map_expr_shallow(e, prune)

    return replace(program, main=walk(program.main, None))


def map_expr_shallow(e, fn_comp):
    """Like `map_expr` but lambdas are left to `fn_comp` (no recursion into them)."""
    if isinstance(e, Let):
        rhs = fn_comp(_map_nested_shallow(e.rhs, fn_comp))
        return replace(e, rhs=rhs, body=map_expr_shallow(e.body, fn_comp))
    if isinstance(e, LetRec):
        rhs = fn_comp(_map_nested_shallow(e.rhs, fn_comp))
        return replace(e, rhs=rhs, body=map_expr_shallow(e.body, fn_comp))
    return fn_comp(_map_nested_shallow(e, fn_comp))


def _map_nested_shallow(c, fn_comp):
    if isinstance(c, CIf):
        return replace(c, then=map_expr_shallow(c.then, fn_comp), orelse=map_expr_shallow(c.orelse, fn_comp))
    if isinstance(c, CMatch):
        return replace(c, arms=tuple(replace(a, body=map_expr_shallow(a.body, fn_comp)) for a in c.arms))
    if isinstance(c, CLoop):
        return replace(c, body=map_expr_shallow(c.body, fn_comp))
    return c


# -------------------------------------------------------- closure conversion


def free_vars(e) -> set:
    """Names read in `e` but bound outside it (binders are globally unique)."""
    used, binders = set(), set()
    for c in iter_comps(e):
        used.update(a.name for a in _comp_atoms(c) if isinstance(a, AVar))
        if isinstance(c, CLambda):
            binders.update(p.name for p in c.params)
        elif isinstance(c, CLoop):
            binders.add(c.var)
        elif isinstance(c, CMatch):
            binders.update(n for a in c.arms for n, _ in a.vars)
    binders.update(x.var for x in _lets(e))
    return used - binders


def _comp_atoms(c) -> list:
    """Atoms read directly by a computation (not inside nested bodies)."""
    if isinstance(c, CAtom):
        return [c.atom]
    if isinstance(c, CBinOp):
        return [c.lhs, c.rhs]
    if isinstance(c, (CPrim, CTuple, CCon)):
        return list(c.args if not isinstance(c, CTuple) else c.items)
    if isinstance(c, (CApp, CDirectCall)):
        return [c.fn, *c.args]
    if isinstance(c, (CAscribe, CCheckGerm)):
        return [c.atom]
    if isinstance(c, CDynAscribe):
        return [c.atom, *_src_atoms(c.src)]
    if isinstance(c, CMakeClosure):
        return list(c.captured)
    if isinstance(c, CRef):
        return [c.init]
    if isinstance(c, CDeref):
        return [c.ref]
    if isinstance(c, CAssign):
        return [c.ref, c.value]
    if isinstance(c, CVec):
        return [c.size, c.init]
    if isinstance(c, CVecGet):
        return [c.vec, c.index]
    if isinstance(c, CVecSet):
        return [c.vec, c.index, c.value]
    if isinstance(c, CProj):
        return [c.tup]
    if isinstance(c, CIf):
        return [c.cond]
    if isinstance(c, CMatch):
        return [c.scrutinee]
    if isinstance(c, CLoop):
        return [c.lo, c.hi]
    return []


def _src_atoms(src) -> list:
    if isinstance(src, Dom):
        return [src.fn]
    if isinstance(src, RefContent):
        return [src.ref]
    if isinstance(src, VecElem):
        return [src.vec]
    if isinstance(src, TupleComp):
        return [src.tup]
    return []


def _var_types(e) -> dict:
    types = {}
    for c in iter_comps(e):
        for a in _comp_atoms(c):
            if isinstance(a, AVar):
                types[a.name] = a.ty
    return types


def closure_convert(program: CoreProgram, direct: bool = True) -> CoreProgram:
    """Lift lambdas into a code table and capture free variables by value."""
    codes = {}
    counter = itertools.count()
    types = _var_types(program.main)

    def lam(c, hint="lambda"):
        if not isinstance(c, CLambda):
            return c
        label = f"{hint}#{next(counter)}"
        body = expr(c.body)
        params = tuple((p.name, p.ty) for p in c.params)
        fv = sorted(free_vars(body) - {n for n, _ in params})
        captured = tuple((n, types.get(n, DYN)) for n in fv)
        fun_ty = Fun(tuple(p.ty for p in c.params), c.ret_ty)
        codes[label] = Code(label, params, captured, body, fun_ty, c.ret_ty)
        return CMakeClosure(label, tuple(AVar(n, t) for n, t in captured), c.ev, c.ty, c.span)

    def expr(e):
        if isinstance(e, Let):
            return replace(e, rhs=lam(nested(e.rhs), _hint(e.var)), body=expr(e.body))
        if isinstance(e, LetRec):
            rhs = lam(e.rhs, _hint(e.var))
            codes[rhs.label].self_name = e.var
            return replace(e, rhs=rhs, body=expr(e.body))
        return lam(nested(e))

    def nested(c):
        if isinstance(c, CIf):
            return replace(c, then=expr(c.then), orelse=expr(c.orelse))
        if isinstance(c, CMatch):
            return replace(c, arms=tuple(replace(a, body=expr(a.body)) for a in c.arms))
        if isinstance(c, CLoop):
            return replace(c, body=expr(c.body))
        return c

    out = replace(program, main=expr(program.main), codes=codes)
    return direct_calls(out) if direct else out


def _hint(var: str) -> str:
    base, _, num = var.rpartition("_")
    return base if base and num.isdigit() else var


def direct_calls(program: CoreProgram) -> CoreProgram:
    """Call known closures through their code label.

    A variable qualifies when it is bound directly to a closure creation
    with no ascription afterwards and every use is in callee position
    (or a capture, whose uses inside the capturing body are checked too).
    """
    candidates = {}
    for c_expr in [program.main, *[code.body for code in program.codes.values()]]:
        for e in _lets(c_expr):
            if isinstance(e.rhs, CMakeClosure) and (isinstance(e, Let) or not e.post):
                candidates[e.var] = e.rhs.label
    disqualified = set()
    for c in program_comps(program):
        if isinstance(c, CMakeClosure):
            continue  # captured names are checked at their uses inside the code body
        callee = c.fn.name if isinstance(c, (CApp, CDirectCall)) else None
        for a in _comp_atoms(c):
            if isinstance(a, AVar) and a.name in candidates and a.name != callee:
                if isinstance(c, CDynAscribe) and isinstance(c.src, Dom) and a is c.src.fn:
                    continue
                disqualified.add(a.name)
        if isinstance(c, (CApp, CDirectCall)):
            for a in c.args:
                if isinstance(a, AVar) and a.name in candidates:
                    disqualified.add(a.name)
    known = {v: label for v, label in candidates.items() if v not in disqualified}
    if not known:
        return program

    def rewrite(c):
        if isinstance(c, CApp) and c.fn.name in known:
            code = program.codes[known[c.fn.name]]
            if len(code.params) == len(c.args):
                return CDirectCall(known[c.fn.name], c.fn, c.args, c.ty, c.span)
        return c

    codes = {k: replace(v, body=map_expr(v.body, rewrite)) for k, v in program.codes.items()}
    return replace(program, main=map_expr(program.main, rewrite), codes=codes)


def _lets(e):
    stack = [e]
    while stack:
        x = stack.pop()
        while isinstance(x, (Let, LetRec)):
            yield x
            stack.extend(comp_subexprs(x.rhs))
            x = x.body
        stack.extend(comp_subexprs(x))


# -------------------------------------------------------------- printing


def show_comp(c) -> str:
    if isinstance(c, CAtom):
        return str(c.atom)
    if isinstance(c, CBinOp):
        return f"{c.lhs} {c.op} {c.rhs}"
    if isinstance(c, CPrim):
        return " ".join([c.op, *map(str, c.args)])
    if isinstance(c, CApp):
        return " ".join([str(c.fn), *map(str, c.args)])
    if isinstance(c, CDirectCall):
        return f"call {c.label}[{c.fn}] " + " ".join(map(str, c.args))
    if isinstance(c, CAscribe):
        return f"{c.ev}{c.atom}" + (f"::{show_type(c.ty)}" if c.source else "")
    if isinstance(c, CDynAscribe):
        return f"ascribe({c.atom}, {c.src})"
    if isinstance(c, CCheckGerm):
        detail = "" if c.detail is None else f"[{c.detail}]"
        name = {"apply": "checkfun", "deref": "checkref", "vec": "checkvec", "proj": "checkproj",
                "tuple": "checktuple", "match": "checkvariant"}[c.kind]
        return f"{name}{detail} {c.atom}"
    if isinstance(c, CLambda):
        ps = ", ".join(f"{p.name}:{show_type(p.ty)}" for p in c.params)
        return f"<{show_type(c.ev)}>(fun ({ps}) ->\n" + _indent(show_expr(c.body)) + ")"
    if isinstance(c, CMakeClosure):
        return f"closure <{show_type(c.ev)}> {c.label} [" + ", ".join(map(str, c.captured)) + "]"
    if isinstance(c, CRef):
        return f"ref {c.init}"
    if isinstance(c, CDeref):
        return f"!{c.ref}"
    if isinstance(c, CAssign):
        return f"{c.ref} := {c.value}"
    if isinstance(c, CVec):
        return f"vector {c.size} {c.init}"
    if isinstance(c, CVecGet):
        return f"{c.vec}.[{c.index}]"
    if isinstance(c, CVecSet):
        return f"{c.vec}.[{c.index}] <- {c.value}"
    if isinstance(c, CTuple):
        return "(" + ", ".join(map(str, c.items)) + ")"
    if isinstance(c, CProj):
        return f"#{c.index} {c.tup}"
    if isinstance(c, CCon):
        return c.ctor + ("(" + ", ".join(map(str, c.args)) + ")" if c.args else "")
    if isinstance(c, CIf):
        return (f"if {c.cond} then\n" + _indent(show_expr(c.then)) + "\nelse\n" + _indent(show_expr(c.orelse)))
    if isinstance(c, CMatch):
        lines = [f"match {c.scrutinee} with"]
        for a in c.arms:
            pat = a.ctor + ("(" + ", ".join(n for n, _ in a.vars) + ")" if a.vars else "")
            lines.append(f"| {pat} ->\n" + _indent(show_expr(a.body)))
        return "\n".join(lines)
    if isinstance(c, CLoop):
        return f"loop {c.var} = {c.lo} to {c.hi} do\n" + _indent(show_expr(c.body)) + "\ndone"
    raise TypeError(type(c).__name__)


def _indent(s: str) -> str:
    return "\n".join("  " + line for line in s.splitlines())


def show_expr(e) -> str:
    lines = []
    while isinstance(e, (Let, LetRec)):
        if isinstance(e, LetRec):
            post = "".join(f" then {ev}" for ev, _, _ in e.post)
            lines.append(f"let rec {e.var} : {show_type(e.ty)} = {show_comp(e.rhs)}{post} in")
        else:
            lines.append(f"let {e.var} : {show_type(e.ty)} = {show_comp(e.rhs)} in")
        e = e.body
    lines.append(show_comp(e))
    return "\n".join(lines)


def show_core(program: CoreProgram) -> str:
    parts = []
    for code in program.codes.values():
        ps = ", ".join(f"{n}:{show_type(t)}" for n, t in code.params)
        cs = ", ".join(n for n, _ in code.captured)
        parts.append(f"code {code.label} ({ps}) [{cs}] : {show_type(code.fun_ty)} =\n" + _indent(show_expr(code.body)))
    parts.append("main =\n" + _indent(show_expr(program.main)))
    return "\n\n".join(parts) + "\n"
