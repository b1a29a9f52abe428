import pytest

from evgrad.pipeline import CompileOptions, compile_program, run_source
from evgrad.runtime import (
    MAX_INT, MIN_INT, BoxedFloat, CastError, Closure, DivisionByZero, GermError, IndexOutOfBounds,
    InputExhausted, Limits, Machine, Mode, RefObj, StackOverflow, TupleObj, VecObj, show_value, wrap_int,
)
from evgrad.surface import parse_type
from evgrad.typelattice import BOOL, DYN, INT, precision_le

MODES = ("g", "mc", "mv")


def run(src, mode="g", **kw):
    inputs = kw.pop("inputs", ())
    limits = kw.pop("limits", Limits())
    return run_source(src, CompileOptions(mode, **kw), limits, inputs)


def machine(mode="g", dfo=False):
    return Machine(compile_program("()").core, Mode(mode, dfo))


def value(src, **kw):
    r = run(src, **kw)
    assert r.error is None, r.error
    return r.shown_value()


def test_int_wraparound():
    assert wrap_int(MAX_INT + 1) == MIN_INT
    assert value(f"{MAX_INT} + 1") == str(MIN_INT)
    assert value(f"{MAX_INT} * 2") == "-2"


@pytest.mark.parametrize("src, out", [
    ("7 / 2", "3"), ("-7 / 2", "-3"), ("7 / -2", "-3"), ("-7 % 2", "-1"), ("7 % -2", "1"),
    ("1.0 /. 0.0", "inf"), ("-1.0 /. 0.0", "-inf"), ("sqrt 16.0", "4.0"), ("int_of_float 2.9", "2"),
    ("float_of_int 3", "3.0"), ("1 < 2 && 2 <= 2", "true"), ("not (3 = 4)", "true"), ("1.5 <. 2.0", "true"),
])
def test_arithmetic(src, out):
    assert value(src) == out
    assert value(src, dfo=True) == out


def test_division_by_zero():
    assert isinstance(run("1 / 0").error, DivisionByZero)
    assert isinstance(run("1 % 0").error, DivisionByZero)


def test_vector_bounds():
    r = run("let v : vec[int] = vector 3 0 in v.[3]")
    assert isinstance(r.error, IndexOutOfBounds) and r.error.exit_code == 4
    assert isinstance(run("let v = vector 3 0 in v.[-1] <- 1").error, IndexOutOfBounds)
    assert isinstance(run("vector (-1) 0").error, IndexOutOfBounds)


def test_stack_overflow_limit():
    src = "let rec f : int -> int = fun (n:int) -> if n = 0 then 0 else 1 + f (n - 1) in f 500"
    assert value(src) == "500"
    assert isinstance(run(src, limits=Limits(max_depth=100)).error, StackOverflow)


def test_deep_recursion_within_default_limit():
    src = "let rec f : int -> int = fun (n:int) -> if n = 0 then 0 else 1 + f (n - 1) in f 20000"
    assert value(src) == "20000"


def test_read_int():
    assert value("read_int () + read_int ()", inputs=[2, 3]) == "5"
    assert isinstance(run("read_int ()").error, InputExhausted)


def test_printing_and_values():
    r = run("print_int 3; print_bool false; print_float 2.5; (1, true)")
    assert r.output == ["3", "false", "2.5"]
    assert r.shown_value() == "(1, true)"
    assert value("let v : vec[int] = vector 2 7 in v") == "[|7; 7|]"
    assert value("ref 4") == "ref 4"
    assert value("fun (x:int) -> x") == "<fun>"


def test_structures():
    assert value("#1 (1, true)") == "true"
    assert value("let v = vector 3 0 in v.[1] <- 5; v.[1] + v.[0]") == "5"
    src = "type s = SCons of int * (unit -> s) | SNil\nmatch SCons (1, fun (u:unit) -> SNil) with | SCons (x, f) -> x | SNil -> 0"
    assert value(src) == "1"


def test_loop_bounds_are_inclusive():
    r = run("loop i = 2 to 4 do print_int i done")
    assert r.output == ["2", "3", "4"]


def test_beta_redex_examples():
    for m in MODES:
        assert isinstance(run("(fun (x:?) -> x + 1) false", m).error, CastError)
        assert value("(fun (x:?) -> x + 1) 10", mode=m) == "11"


def test_ascribe_immediates():
    m = machine()
    assert m.ascribe(False, DYN) is False
    assert m.ascribe(3, INT) == 3
    with pytest.raises(CastError) as info:
        m.ascribe(True, INT)
    assert info.value.left == BOOL and info.value.right == INT
    assert m.counters.trans_ops == 3 and m.counters.cast_errors == 1


def test_guarded_ascription_allocates_proxy():
    m = machine("g")
    r = RefObj(parse_type("ref[?]"), [4])
    p = m.ascribe(r, parse_type("ref[int]"))
    assert p is not r and p.cell is r.cell and r.ev == parse_type("ref[?]")
    assert m.counters.proxy_allocs == 1 and m.counters.heap_allocs == 1
    assert m.ascribe(r, DYN) is r


def test_monotonic_ascription_updates_in_place():
    m = machine("mv")
    r = RefObj(parse_type("ref[?]"), [4])
    assert m.ascribe(r, parse_type("ref[int]")) is r
    assert r.ev == parse_type("ref[int]")
    assert m.counters.proxy_allocs == 0 and m.counters.refinements == 1
    with pytest.raises(CastError):
        m.ascribe(r, parse_type("ref[bool]"))


def test_monotonic_recheck_is_shallow():
    m = machine("mv")
    inner = RefObj(parse_type("ref[?]"), [1])
    outer = VecObj(parse_type("vec[?]"), [inner, inner])
    m.ascribe(outer, parse_type("vec[ref[?]]"))
    assert outer.ev == parse_type("vec[ref[?]]") and inner.ev == parse_type("ref[?]")
    with pytest.raises(CastError):
        m.ascribe(VecObj(parse_type("vec[?]"), [1, True]), parse_type("vec[int]"))


def test_monotone_evidence_evolution():
    m = machine("mv")
    t = TupleObj(parse_type("? * ?"), [1, True])
    for target in ("int * ?", "? * bool", "int * bool"):
        old = t.ev
        m.ascribe(t, parse_type(target))
        assert precision_le(t.ev, old)


def test_closures_per_mode():
    for mode, proxied in (("g", True), ("mc", False), ("mv", False)):
        m = machine(mode)
        c = Closure(parse_type("? -> ?"), None, [])
        out = m.ascribe(c, parse_type("int -> int"))
        assert (out is not c) == proxied
        assert m.counters.closure_proxies == int(proxied)


def test_structures_guarded_in_mc():
    m = machine("mc")
    v = VecObj(parse_type("vec[?]"), [1])
    assert m.ascribe(v, parse_type("vec[int]")) is not v


def test_check_germ():
    m = machine("g")
    c = Closure(parse_type("int -> int"), None, [])
    assert m.check_germ(c, "apply", 1, None) is c
    with pytest.raises(GermError):
        m.check_germ(5, "apply", 1, None)
    proxy = m.ascribe(VecObj(parse_type("vec[?]"), [1]), parse_type("vec[int]"))
    before = m.counters.proxy_allocs
    assert m.check_germ(proxy, "vec", None, None) is proxy
    assert m.counters.proxy_allocs == before
    assert m.counters.germ_checks == 3


def test_variants_never_change():
    src = "type t = A of int\nlet v : ? = A (1) in let w : t = v in match w with | A (n) -> n"
    for mode in MODES:
        r = run(src, mode)
        assert r.value == 1 and r.counters.proxy_allocs == 0


def test_fig2_traces():
    src = "let x = ref (4 :: ?) in\nlet y : ref[bool] = x in\ny := true;\n!y"
    assert value(src, mode="g") == "true"
    assert value(src, mode="mc") == "true"
    r = run(src, "mv")
    assert isinstance(r.error, CastError) and r.error.span.line == 2


def test_guarded_writes_are_shared():
    src = "let x : ref[?] = ref 1 in let y : ref[int] = x in y := 5; !x"
    for mode in MODES:
        assert value(src, mode=mode) == "5"


def test_float_boxing_counts():
    src = "let x : float = 1.5 +. 2.5 in let y : float = x *. 2.0 in print_float y"
    boxed = run(src)
    unboxed = run(src, dfo=True)
    assert boxed.output == unboxed.output == ["8.0"]
    # two arithmetic results; literal operands feed the operation directly
    assert boxed.counters.float_boxes == 2
    assert run("let x : float = 1.5 in x").counters.float_boxes == 1
    assert unboxed.counters.float_boxes == 0


def test_dfo_boxes_at_dynamic_boundaries():
    src = "let f = fun (x:?) -> x in let y : float = f 2.5 in y +. 1.0"
    r = run(src, dfo=True)
    assert r.shown_value() == "3.5"
    assert r.counters.float_boxes >= 1
    assert type(r.value) is float


def test_dfo_floats_in_structures_are_boxed():
    m = machine("g", dfo=True)
    r = run("let v : vec[float] = vector 2 0.5 in v.[1] <- v.[0] +. 1.0; v", dfo=True)
    assert r.shown_value() == "[|0.5; 1.5|]"
    assert all(type(x) is BoxedFloat for x in r.value.data)
    assert m.to_imm(BoxedFloat(2.0)) == 2.0


def test_show_value_nested():
    assert show_value(RefObj(None, [RefObj(None, [1])])) == "ref (ref 1)"
