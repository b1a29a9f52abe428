"""Instrumented execution of closure-converted core programs.

Core expressions are compiled once into nested Python closures over a flat
slot frame per function body, then run. Immediates (int, bool, unit and,
under DFO, floats in float-typed positions) are plain Python values whose
evidence is implicit. Heap objects carry their evidence in an ``ev`` slot.

Heap semantics per mode:

* ``g``: structures and closures are guarded. An ascription allocates a
  proxy, a shallow copy that shares the underlying cell, block or environment.
* ``mc``: structures guarded, closures monotonic.
* ``mv``: everything monotonic. An ascription refines the object's own
  evidence in place and re-checks its immediate contents (shallowly).
"""

from __future__ import annotations

import json
import math
import sys
import threading
import time
from dataclasses import asdict, dataclass, field

from evgrad import midend as M
from evgrad.surface import NOSPAN, Span
from evgrad.typelattice import (
    BOOL, DYN, FLOAT, INT, UNIT, Dyn, Fun, GradualType, Named, Ref, Tuple, Vec, germ_of, meet, show_type,
)

MODES = ("g", "mc", "mv")

INT_BITS = 63
MAX_INT = (1 << (INT_BITS - 1)) - 1
MIN_INT = -(1 << (INT_BITS - 1))
_MASK = (1 << INT_BITS) - 1
_HALF = 1 << (INT_BITS - 1)


def wrap_int(x: int) -> int:
    """Reduce to 63-bit two's complement."""
    return ((x + _HALF) & _MASK) - _HALF


# ------------------------------------------------------------------- errors


class RuntimeFault(Exception):
    """Base class of runtime errors. `kind` names the failing operation."""

    exit_code = 4

    def __init__(self, message: str, span: Span = NOSPAN, kind: str = ""):
        where = f"{span}: " if span is not NOSPAN else ""
        super().__init__(f"{where}{message}")
        self.span = span
        self.kind = kind


class CastError(RuntimeFault):
    exit_code = 3

    def __init__(self, left: GradualType, right: GradualType, span: Span = NOSPAN, kind: str = "ascription"):
        super().__init__(
            f"cast error in {kind}: <{show_type(left)}> and <{show_type(right)}> have no common refinement",
            span, kind,
        )
        self.left = left
        self.right = right


class GermError(CastError):
    """A top-constructor check failed."""


class DivisionByZero(RuntimeFault):
    pass


class IndexOutOfBounds(RuntimeFault):
    pass


class StackOverflow(RuntimeFault):
    pass


class InputExhausted(RuntimeFault):
    pass


# ------------------------------------------------------------------- values


class BoxedFloat:
    __slots__ = ("val",)
    ev = FLOAT

    def __init__(self, val: float):
        self.val = val


class RefObj:
    __slots__ = ("ev", "cell")

    def __init__(self, ev, cell):
        self.ev = ev
        self.cell = cell  # one-element list, shared by guarded proxies


class VecObj:
    __slots__ = ("ev", "data")

    def __init__(self, ev, data):
        self.ev = ev
        self.data = data


class TupleObj:
    __slots__ = ("ev", "data")

    def __init__(self, ev, data):
        self.ev = ev
        self.data = data


class VariantObj:
    __slots__ = ("ev", "ctor_id", "ctor", "data")

    def __init__(self, ev, ctor_id, ctor, data):
        self.ev = ev
        self.ctor_id = ctor_id
        self.ctor = ctor
        self.data = data


class Closure:
    __slots__ = ("ev", "code", "env")

    def __init__(self, ev, code, env):
        self.ev = ev
        self.code = code
        self.env = env


_IMMEDIATE_EV = {int: INT, bool: BOOL, type(None): UNIT, float: FLOAT}


def value_ev(v) -> GradualType:
    """Runtime evidence of a value (implicit for immediates)."""
    t = _IMMEDIATE_EV.get(type(v))
    return t if t is not None else v.ev


def show_value(v) -> str:
    t = type(v)
    if t is bool:
        return "true" if v else "false"
    if t is int:
        return str(v)
    if v is None:
        return "()"
    if t is float:
        return repr(v)
    if t is BoxedFloat:
        return repr(v.val)
    if t is RefObj:
        return f"ref {_nested(v.cell[0])}"
    if t is VecObj:
        return "[|" + "; ".join(show_value(x) for x in v.data) + "|]"
    if t is TupleObj:
        return "(" + ", ".join(show_value(x) for x in v.data) + ")"
    if t is VariantObj:
        if not v.data:
            return v.ctor
        return v.ctor + " (" + ", ".join(show_value(x) for x in v.data) + ")"
    if t is Closure:
        return "<fun>"
    return repr(v)


def _nested(v) -> str:
    s = show_value(v)
    return f"({s})" if " " in s and not s.startswith(("[|", "(")) else s


# ----------------------------------------------------------------- counters


@dataclass
class CounterReport:
    trans_ops: int = 0
    proxy_allocs: int = 0
    heap_allocs: int = 0
    float_boxes: int = 0
    germ_checks: int = 0
    cast_errors: int = 0
    closure_proxies: int = 0
    refinements: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


@dataclass(frozen=True)
class Mode:
    semantics: str = "g"
    dfo: bool = False
    typing: str = "gradual"

    def __post_init__(self):
        if self.semantics not in MODES:
            raise ValueError(f"unknown mode {self.semantics!r}")
        if self.typing not in ("gradual", "static", "dynamic"):
            raise ValueError(f"unknown typing {self.typing!r}")

    @property
    def guarded_structures(self) -> bool:
        return self.semantics in ("g", "mc")

    @property
    def guarded_closures(self) -> bool:
        return self.semantics == "g"


@dataclass(frozen=True)
class Limits:
    max_depth: int = 1_000_000
    stack_bytes: int = 1 << 30


@dataclass
class RunResult:
    value: object = None
    error: Exception | None = None
    counters: CounterReport = field(default_factory=CounterReport)
    output: list = field(default_factory=list)
    time_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def outcome(self) -> str:
        if self.error is None:
            return "value"
        if isinstance(self.error, GermError):
            return "germ-error"
        if isinstance(self.error, CastError):
            return "cast-error"
        return "other-error"

    def shown_value(self) -> str | None:
        return None if self.error is not None else show_value(self.value)


# ------------------------------------------------------------------ machine


@dataclass
class CompiledCode:
    label: str
    nparams: int
    pad: tuple
    body: object = None
    imm_params: tuple = ()
    boxed_params: tuple = ()
    ret_imm: bool = False


class _Ctx:
    """Slot allocation for one function body (or main)."""

    def __init__(self, names=(), self_slot=None):
        self.slots = {}
        for n in names:
            self.slot(n)
        self.self_slot = self_slot
        self.ret_imm = False

    def slot(self, name):
        s = self.slots.get(name)
        if s is None:
            s = self.slots[name] = len(self.slots)
        return s


class Machine:
    """One VM instance: heap semantics, counters and compiled code."""

    def __init__(self, program: M.CoreProgram, mode: Mode, limits: Limits = Limits(), inputs=()):
        self.program = program
        self.mode = mode
        self.limits = limits
        self.dfo = mode.dfo
        self.counters = CounterReport()
        self.output = []
        self.inputs = iter(inputs)
        self.depth = 0
        self.codes = {}
        for label, code in program.codes.items():
            self.codes[label] = CompiledCode(label, len(code.params), ())
        for label, code in program.codes.items():
            self._compile_code(code)
        self.main = self._compile_main(program.main)

    # -- representation helpers

    def imm(self, ty) -> bool:
        return self.dfo and ty == FLOAT

    def box(self, x: float) -> BoxedFloat:
        c = self.counters
        c.float_boxes += 1
        c.heap_allocs += 1
        return BoxedFloat(x)

    def to_boxed(self, v):
        return self.box(v) if type(v) is float else v

    @staticmethod
    def to_imm(v):
        return v.val if type(v) is BoxedFloat else v

    def adapt(self, fn, src_ty, dst_ty):
        """Wrap `fn` so its float result moves from `src_ty`'s representation to `dst_ty`'s."""
        if not self.dfo:
            return fn
        si, di = self.imm(src_ty), self.imm(dst_ty)
        if si == di and not (src_ty is DYN and di) and not (dst_ty is DYN and si):
            if si or (src_ty != FLOAT and dst_ty != FLOAT and type(src_ty) is not Dyn and type(dst_ty) is not Dyn):
                return fn
        if di:
            to_imm = self.to_imm
            return lambda fr: to_imm(fn(fr))
        to_boxed = self.to_boxed
        return lambda fr: to_boxed(fn(fr))

    # -- evidence operations

    def cast_fail(self, left, right, span, kind="ascription"):
        self.counters.cast_errors += 1
        raise CastError(left, right, span, kind)

    def ascribe(self, v, target, span=NOSPAN, kind="ascription"):
        """Combine a value's evidence with `target` (consistent transitivity)."""
        c = self.counters
        c.trans_ops += 1
        t = type(v)
        if target is DYN:
            return v
        imm_ev = _IMMEDIATE_EV.get(t)
        if imm_ev is not None:
            if target is imm_ev or target == imm_ev:
                return v
            self.cast_fail(imm_ev, target, span, kind)
        if t is BoxedFloat:
            if target == FLOAT:
                return v
            self.cast_fail(FLOAT, target, span, kind)
        old = v.ev
        if t is VariantObj:
            if meet(old, target) is None:
                self.cast_fail(old, target, span, kind)
            return v
        new = meet(old, target)
        if new is None:
            self.cast_fail(old, target, span, kind)
        refined = new is not old and new != old
        if t is Closure:
            guarded = self.mode.guarded_closures
        else:
            guarded = self.mode.guarded_structures
        if guarded:
            if refined:
                c.refinements += 1
            c.proxy_allocs += 1
            c.heap_allocs += 1
            if t is Closure:
                c.closure_proxies += 1
                return Closure(new, v.code, v.env)
            if t is RefObj:
                return RefObj(new, v.cell)
            return t(new, v.data)
        if refined:
            c.refinements += 1
            self._recheck(v, t, new, span)
            v.ev = new
        return v

    def _recheck(self, v, t, new, span):
        """Shallow re-check of a monotonic object's contents against refined evidence."""
        c = self.counters
        if t is RefObj:
            slots = ((v.cell[0], new.elem),)
        elif t is VecObj:
            elem = new.elem
            if type(elem) is Dyn:
                return
            slots = ((x, elem) for x in v.data)
        elif t is TupleObj:
            slots = zip(v.data, new.items)
        else:
            return
        for x, want in slots:
            if want is DYN:
                continue
            c.trans_ops += 1
            have = value_ev(x)
            if meet(have, want) is None:
                self.cast_fail(have, want, span, "monotonic update")

    def check_germ(self, v, kind, detail, span):
        self.counters.germ_checks += 1
        t = type(v)
        if kind == "apply":
            ok = t is Closure and len(v.ev.params) == detail
        elif kind == "deref":
            ok = t is RefObj
        elif kind == "vec":
            ok = t is VecObj
        elif kind == "proj":
            ok = t is TupleObj and len(v.data) > detail
        elif kind == "tuple":
            ok = t is TupleObj and len(v.data) == detail
        else:
            ok = t is VariantObj and v.ev.name == detail
        if ok:
            return v
        self.counters.cast_errors += 1
        germ = Tuple((DYN,) * detail) if kind == "tuple" else germ_of(kind, detail)
        raise GermError(value_ev(v), germ, span, f"check {kind}")

    # -- calls

    def call(self, clo, args, span):
        code = clo.code
        self.depth += 1
        if self.depth > self.limits.max_depth:
            raise StackOverflow("call depth limit exceeded", span, "call")
        if self.dfo:
            for i in code.imm_params:
                a = args[i]
                if type(a) is BoxedFloat:
                    args[i] = a.val
            for i in code.boxed_params:
                if type(args[i]) is float:
                    args[i] = self.box(args[i])
        fr = args + clo.env
        fr.append(clo)
        fr.extend(code.pad)
        r = code.body(fr)
        self.depth -= 1
        return r

    # -- compilation

    def _compile_code(self, code: M.Code):
        names = [n for n, _ in code.params] + [n for n, _ in code.captured]
        ctx = _Ctx(names, self_slot=len(names))
        ctx.slots["%self"] = len(names)
        cc = self.codes[code.label]
        cc.ret_imm = self.imm(code.ret_ty)
        ctx.ret_ty = code.ret_ty
        body = self.expr(code.body, ctx)
        body = self.adapt(body, M.expr_ty(code.body), code.ret_ty)
        cc.body = body
        cc.pad = (None,) * (len(ctx.slots) - len(names) - 1)
        if self.dfo:
            cc.imm_params = tuple(i for i, (_, t) in enumerate(code.params) if self.imm(t))
            cc.boxed_params = tuple(i for i, (_, t) in enumerate(code.params) if not self.imm(t))

    def _compile_main(self, e):
        ctx = _Ctx()
        body = self.expr(e, ctx)
        nslots = len(ctx.slots)

        def run():
            return body([None] * max(nslots, 1))

        return run

    def atom(self, a, ctx, want_ty=None):
        """Getter for an atom, producing the representation of `want_ty` (default: its own)."""
        want = a.ty if want_ty is None else want_ty
        if isinstance(a, M.AVar):
            s = ctx.slot(a.name)
            g = lambda fr: fr[s]  # noqa: E731
            return self.adapt(g, a.ty, want) if want_ty is not None else g
        v = a.value
        if type(v) is float:
            if self.imm(want):
                return lambda fr: v
            box = self.box
            return lambda fr: box(v)
        return lambda fr: v

    def boxed_atom(self, a, ctx):
        """Getter for a value stored into a heap structure (always boxed)."""
        if self.imm(a.ty):
            g = self.atom(a, ctx)
            box = self.box
            return lambda fr: box(g(fr))
        if isinstance(a, M.ALit) and type(a.value) is float:
            v, box = a.value, self.box
            return lambda fr: box(v)
        return self.atom(a, ctx)

    def read_result(self, fn, ty):
        """Structure contents are boxed; unbox when the read is float-typed."""
        if self.imm(ty):
            return lambda fr: fn(fr).val
        return fn

    def expr(self, e, ctx):
        steps = []
        while isinstance(e, (M.Let, M.LetRec)):
            if isinstance(e, M.LetRec):
                steps.append(self.letrec(e, ctx))
            else:
                rhs = self.comp(e.rhs, ctx)
                rhs = self.adapt(rhs, e.rhs.ty, e.ty)
                steps.append((ctx.slot(e.var), rhs))
            e = e.body
        tail = self.comp(e, ctx)
        if not steps:
            return tail
        steps = tuple(steps)
        if len(steps) == 1:
            ((s0, f0),) = steps

            def run1(fr):
                fr[s0] = f0(fr)
                return tail(fr)

            return run1

        def run(fr):
            for s, f in steps:
                fr[s] = f(fr)
            return tail(fr)

        return run

    def letrec(self, e, ctx):
        slot = ctx.slot(e.var)
        mk = self.comp(e.rhs, ctx)
        code = self.program.codes[e.rhs.label]
        cap_names = [n for n, _ in code.captured]
        self_idx = cap_names.index(e.var) if e.var in cap_names else None
        posts = tuple((ev.type, span) for ev, _, span in e.post)
        ascribe = self.ascribe

        def make(fr):
            clo = mk(fr)
            v = clo
            for target, span in posts:
                v = ascribe(v, target, span)
            if self_idx is not None:
                clo.env[self_idx] = v
            return v

        return slot, make

    def comp(self, c, ctx):
        return getattr(self, "c_" + type(c).__name__)(c, ctx)

    def c_CAtom(self, c, ctx):
        return self.atom(c.atom, ctx)

    def c_CBinOp(self, c, ctx):
        op = c.op
        if op in _FLOAT_OPS:
            a = self._float_operand(c.lhs, ctx)
            b = self._float_operand(c.rhs, ctx)
            f = _FLOAT_OPS[op]
            if c.ty == FLOAT:
                if self.imm(c.ty):
                    return lambda fr: f(a(fr), b(fr))
                box = self.box
                return lambda fr: box(f(a(fr), b(fr)))
            return lambda fr: f(a(fr), b(fr))
        a = self.atom(c.lhs, ctx)
        b = self.atom(c.rhs, ctx)
        span = c.span
        if op == "+":
            def add(fr):
                r = a(fr) + b(fr)
                return r if MIN_INT <= r <= MAX_INT else wrap_int(r)
            return add
        if op == "-":
            def sub(fr):
                r = a(fr) - b(fr)
                return r if MIN_INT <= r <= MAX_INT else wrap_int(r)
            return sub
        if op == "*":
            def mul(fr):
                r = a(fr) * b(fr)
                return r if MIN_INT <= r <= MAX_INT else wrap_int(r)
            return mul
        if op in ("/", "%"):
            want_div = op == "/"

            def divmod_(fr):
                x, y = a(fr), b(fr)
                if y == 0:
                    raise DivisionByZero("division by zero", span, op)
                q = abs(x) // abs(y)
                if (x < 0) != (y < 0):
                    q = -q
                return wrap_int(q) if want_div else x - y * q
            return divmod_
        f = _INT_CMP[op]
        return lambda fr: f(a(fr), b(fr))

    def _float_operand(self, a, ctx):
        g = self.atom(a, ctx)
        if isinstance(a, M.ALit):
            v = float(a.value)
            return lambda fr: v
        if self.imm(a.ty):
            return g
        return lambda fr: _unbox(g(fr))

    def c_CPrim(self, c, ctx):
        op = c.op
        if op in ("print_float", "int_of_float", "sqrt"):
            arg = self._float_operand(c.args[0], ctx)
        else:
            arg = self.atom(c.args[0], ctx)
        out = self.output
        if op == "print_int":
            return lambda fr: out.append(str(arg(fr)))
        if op == "print_bool":
            return lambda fr: out.append("true" if arg(fr) else "false")
        if op == "print_float":
            return lambda fr: out.append(repr(arg(fr)))
        if op == "not":
            return lambda fr: not arg(fr)
        if op == "read_int":
            inputs, span = self.inputs, c.span

            def read(fr):
                try:
                    return wrap_int(int(next(inputs)))
                except StopIteration:
                    raise InputExhausted("read_int: no more input", span, "read_int") from None
            return read
        if op == "int_of_float":
            span = c.span

            def to_int(fr):
                x = arg(fr)
                if math.isnan(x) or math.isinf(x):
                    raise RuntimeFault("int_of_float of a non-finite float", span, op)
                return wrap_int(int(x))
            return to_int
        if op == "float_of_int":
            f = lambda fr: float(arg(fr))  # noqa: E731
        else:  # sqrt
            f = lambda fr: _sqrt(arg(fr))  # noqa: E731
        if self.imm(FLOAT):
            return f
        box = self.box
        return lambda fr: box(f(fr))

    def c_CApp(self, c, ctx):
        fs = ctx.slot(c.fn.name)
        args = tuple(self.atom(a, ctx) for a in c.args)
        call, span = self.call, c.span
        if len(args) == 1:
            (a0,) = args
            f = lambda fr: call(fr[fs], [a0(fr)], span)  # noqa: E731
        elif len(args) == 2:
            a0, a1 = args
            f = lambda fr: call(fr[fs], [a0(fr), a1(fr)], span)  # noqa: E731
        else:
            f = lambda fr: call(fr[fs], [g(fr) for g in args], span)  # noqa: E731
        return self._call_result(f, c.ty)

    def _call_result(self, f, ty):
        if not self.dfo:
            return f
        if self.imm(ty):
            to_imm = self.to_imm
            return lambda fr: to_imm(f(fr))
        to_boxed = self.to_boxed
        return lambda fr: to_boxed(f(fr))

    def c_CDirectCall(self, c, ctx):
        # The callee is known to be the closure created for `label`, so the
        # code is fetched statically and no closure head check is needed.
        fs = ctx.slot(c.fn.name)
        code = self.codes[c.label]
        args = tuple(self.atom(a, ctx) for a in c.args)
        m, span, limit = self, c.span, self.limits.max_depth
        adapt_args = self.dfo

        def direct(fr):
            clo = fr[fs]
            vals = [g(fr) for g in args]
            if adapt_args:
                return m.call(clo, vals, span)
            m.depth += 1
            if m.depth > limit:
                raise StackOverflow("call depth limit exceeded", span, "call")
            frame = vals + clo.env
            frame.append(clo)
            frame.extend(code.pad)
            r = code.body(frame)
            m.depth -= 1
            return r

        return self._call_result(direct, c.ty)

    def c_CAscribe(self, c, ctx):
        g = self.atom(c.atom, ctx)
        target, span, ascribe = c.ev.type, c.span, self.ascribe
        kind = "source ascription" if c.source else "ascription"
        f = lambda fr: ascribe(g(fr), target, span, kind)  # noqa: E731
        return self.adapt(f, c.atom.ty, c.ty)

    def c_CDynAscribe(self, c, ctx):
        g = self.atom(c.atom, ctx)
        src, span, ascribe = c.src, c.span, self.ascribe
        if isinstance(src, M.Dom):
            fs, i = ctx.slot(src.fn.name), src.index
            kind = "argument"
            return lambda fr: ascribe(g(fr), fr[fs].ev.params[i], span, kind)
        if isinstance(src, M.Cod):
            ss = ctx.self_slot
            return lambda fr: ascribe(g(fr), fr[ss].ev.ret, span, "result")
        if isinstance(src, M.RefContent):
            rs = ctx.slot(src.ref.name)
            return lambda fr: ascribe(g(fr), fr[rs].ev.elem, span, "reference content")
        if isinstance(src, M.VecElem):
            vs = ctx.slot(src.vec.name)
            return lambda fr: ascribe(g(fr), fr[vs].ev.elem, span, "vector element")
        ts, i = ctx.slot(src.tup.name), src.index
        return lambda fr: ascribe(g(fr), fr[ts].ev.items[i], span, "tuple component")

    def c_CCheckGerm(self, c, ctx):
        g = self.atom(c.atom, ctx)
        kind, detail, span, check = c.kind, c.detail, c.span, self.check_germ
        return lambda fr: check(g(fr), kind, detail, span)

    def c_CMakeClosure(self, c, ctx):
        code = self.codes[c.label]
        slots = tuple(ctx.slot(a.name) for a in c.captured)
        ev, counters = c.ev, self.counters

        def make(fr):
            counters.heap_allocs += 1
            return Closure(ev, code, [fr[s] for s in slots])

        return make

    def c_CRef(self, c, ctx):
        g = self.boxed_atom(c.init, ctx)
        ev, counters = c.ty, self.counters

        def make(fr):
            counters.heap_allocs += 1
            return RefObj(ev, [g(fr)])

        return make

    def c_CDeref(self, c, ctx):
        rs = ctx.slot(c.ref.name)
        return self.read_result(lambda fr: fr[rs].cell[0], c.ty)

    def c_CAssign(self, c, ctx):
        rs = ctx.slot(c.ref.name)
        g = self.boxed_atom(c.value, ctx)

        def assign(fr):
            fr[rs].cell[0] = g(fr)

        return assign

    def c_CVec(self, c, ctx):
        n = self.atom(c.size, ctx)
        g = self.boxed_atom(c.init, ctx)
        ev, counters, span = c.ty, self.counters, c.span

        def make(fr):
            size = n(fr)
            if size < 0:
                raise IndexOutOfBounds(f"negative vector size {size}", span, "vector")
            counters.heap_allocs += 1
            return VecObj(ev, [g(fr)] * size)

        return make

    def c_CVecGet(self, c, ctx):
        vs = ctx.slot(c.vec.name)
        i = self.atom(c.index, ctx)
        span = c.span

        def get(fr):
            data = fr[vs].data
            k = i(fr)
            if 0 <= k < len(data):
                return data[k]
            raise IndexOutOfBounds(f"index {k} out of bounds for length {len(data)}", span, "vector read")

        return self.read_result(get, c.ty)

    def c_CVecSet(self, c, ctx):
        vs = ctx.slot(c.vec.name)
        i = self.atom(c.index, ctx)
        g = self.boxed_atom(c.value, ctx)
        span = c.span

        def set_(fr):
            data = fr[vs].data
            k = i(fr)
            if not 0 <= k < len(data):
                raise IndexOutOfBounds(f"index {k} out of bounds for length {len(data)}", span, "vector write")
            data[k] = g(fr)

        return set_

    def c_CTuple(self, c, ctx):
        items = tuple(self.boxed_atom(a, ctx) for a in c.items)
        ev, counters = c.ty, self.counters

        def make(fr):
            counters.heap_allocs += 1
            return TupleObj(ev, [g(fr) for g in items])

        return make

    def c_CProj(self, c, ctx):
        ts, i = ctx.slot(c.tup.name), c.index
        return self.read_result(lambda fr: fr[ts].data[i], c.ty)

    def c_CCon(self, c, ctx):
        args = tuple(self.boxed_atom(a, ctx) for a in c.args)
        ev, cid, name, counters = c.ty, c.ctor_id, c.ctor, self.counters

        def make(fr):
            counters.heap_allocs += 1
            return VariantObj(ev, cid, name, [g(fr) for g in args])

        return make

    def c_CIf(self, c, ctx):
        cond = self.atom(c.cond, ctx)
        then = self.adapt(self.expr(c.then, ctx), M.expr_ty(c.then), c.ty)
        orelse = self.adapt(self.expr(c.orelse, ctx), M.expr_ty(c.orelse), c.ty)
        return lambda fr: then(fr) if cond(fr) else orelse(fr)

    def c_CMatch(self, c, ctx):
        ss = ctx.slot(c.scrutinee.name)
        table = [None] * len(c.arms)
        for arm in c.arms:
            slots = tuple(ctx.slot(n) for n, _ in arm.vars)
            unbox = tuple(self.imm(t) for _, t in arm.vars)
            body = self.adapt(self.expr(arm.body, ctx), M.expr_ty(arm.body), c.ty)
            table[arm.ctor_id] = (slots, unbox if any(unbox) else None, body)
        table = tuple(table)

        def match(fr):
            v = fr[ss]
            slots, unbox, body = table[v.ctor_id]
            data = v.data
            if unbox is None:
                for s, x in zip(slots, data):
                    fr[s] = x
            else:
                for s, x, u in zip(slots, data, unbox):
                    fr[s] = x.val if u else x
            return body(fr)

        return match

    def c_CLoop(self, c, ctx):
        lo = self.atom(c.lo, ctx)
        hi = self.atom(c.hi, ctx)
        slot = ctx.slot(c.var)
        body = self.expr(c.body, ctx)

        def loop(fr):
            for i in range(lo(fr), hi(fr) + 1):
                fr[slot] = i
                body(fr)

        return loop

    # -- entry point

    def run(self) -> RunResult:
        result = RunResult(counters=self.counters, output=self.output)
        start = time.perf_counter()
        try:
            result.value = self.main()
        except RuntimeFault as err:
            result.error = err
        except RecursionError:
            result.error = StackOverflow("native stack exhausted", NOSPAN, "call")
        result.time_s = time.perf_counter() - start
        return result


def _unbox(v):
    return v.val


def _sqrt(x: float) -> float:
    return math.sqrt(x) if x >= 0 else math.nan


def _fdiv(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


_FLOAT_OPS = {
    "+.": lambda a, b: a + b,
    "-.": lambda a, b: a - b,
    "*.": lambda a, b: a * b,
    "/.": _fdiv,
    "<.": lambda a, b: a < b,
    "<=.": lambda a, b: a <= b,
    ">.": lambda a, b: a > b,
    ">=.": lambda a, b: a >= b,
    "=.": lambda a, b: a == b,
}

_INT_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
}


def run_program(program: M.CoreProgram, mode: Mode = Mode(), limits: Limits = Limits(), inputs=()) -> RunResult:
    """Run a closure-converted program on a fresh VM in a large-stack thread."""
    machine = Machine(program, mode, limits, inputs)
    box = {}

    def target():
        box["result"] = machine.run()

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 50 * limits.max_depth + 10_000))
    old_size = threading.stack_size()
    threading.stack_size(limits.stack_bytes)
    try:
        worker = threading.Thread(target=target, name="evgrad-vm")
        worker.start()
    finally:
        threading.stack_size(old_size)
    worker.join()
    return box["result"]
