import pytest

from evgrad import benchmarks
from evgrad import checker as C
from evgrad import midend as M
from evgrad.pipeline import CompileOptions, compile_program, run_source
from evgrad.surface import parse_program


def core(src, **kw):
    return compile_program(src, CompileOptions(**kw)).core


def anf(src):
    return compile_program(src).anf


def comps(p, cls):
    return [c for c in M.program_comps(p) if isinstance(c, cls)]


def binders(e, out):
    for n in C.iter_nodes(e):
        if isinstance(n, (C.ELet, C.ELetRec)):
            out.append(n.name)
        elif isinstance(n, C.ELam):
            out.extend(p.name for p in n.params)
        elif isinstance(n, C.EArm):
            out.extend(v for v, _ in n.vars)
    return out


def test_alpha_rename_makes_binders_unique():
    src = "let x = 1 in let f = fun (x:int) -> let x = x + 1 in x in f x"
    p = M.alpha_rename(C.elaborate_static(C.typecheck(parse_program(src))))
    names = binders(p.main, [])
    assert len(names) == len(set(names)) == 4
    assert all("_" in n for n in names)


def test_alpha_rename_match_arms():
    src = "type t = A of int | B of int\nlet n = 0 in match A (1) with | A (n) -> n | B (n) -> n"
    p = M.alpha_rename(C.elaborate_static(C.typecheck(parse_program(src))))
    names = binders(p.main, [])
    assert len(names) == len(set(names))


def test_anf_names_intermediate_results():
    text = M.show_core(anf("let f = fun (x:int) -> x in let g = fun (x:int) -> x in f (g 1)"))
    assert "let _t0 : int = g_3 1 in" in text
    assert "f_1 _t0" in text


def test_anf_binary_operands():
    text = M.show_core(anf("let a = 1 in let b = 2 in (a + b) * (a - b)"))
    assert text.index("a_0 + b_1") < text.index("a_0 - b_1") < text.index("_t0 * _t1")


def test_anf_hoists_conditionals():
    text = M.show_core(anf("1 + (if true then 2 else 3)"))
    assert "let _t0 : int = if true then" in text


def test_dynamic_elaboration_listing():
    text = M.show_core(core("let f = fun (x:?) -> x * 2 in print_int (f true)", disabled={"prune"}))
    assert "ascribe(res$" in text and "cod(self)" in text
    assert "ascribe(true, dom(0, f_1))" in text


def test_reads_and_writes_ascribe_content():
    text = M.show_core(core("let r : ref[?] = ref 1 in r := 2; !r"))
    assert "ascribe(2, ref-content(r_0))" in text
    assert "ref-content(r_0))" in text.split("!r_0", 1)[1]


def test_checkfun():
    text = M.show_core(core("fun (x:?, y:?) -> x y"))
    assert "checkfun[1] x_0" in text
    text = M.show_core(core("fun (x:?, y:?) -> x y", disabled={"germs"}))
    assert "<?->?>x_0" in text


def test_checkref():
    text = M.show_core(core("let r : ? = ref 1 in !r"))
    assert "checkref r_0" in text
    for mode in ("g", "mv"):
        for disabled in ((), ("germs",)):
            assert run_source("let r : ? = ref 1 in !r", CompileOptions(mode, disabled=disabled)).value == 1


def test_non_germ_ascription_not_specialized():
    p = core("let f : ? = fun (x:int) -> x in let g : int -> int = f in g 1")
    assert not comps(p, M.CCheckGerm)
    assert any(c.ty == M.Fun((M.INT,), M.INT) for c in comps(p, M.CAscribe))


def test_prune_removes_precise_bounds():
    p = core("let f = fun (x:int) -> x + 1 in f 1")
    assert not comps(p, M.CDynAscribe)
    p = core("let f : ? -> int = fun (x:int) -> x + 1 in f 1")
    assert [c.src for c in comps(p, M.CDynAscribe)] and all(isinstance(c.src, M.Dom) for c in comps(p, M.CDynAscribe))


@pytest.mark.parametrize("name", benchmarks.SUITE + benchmarks.EXTRA)
@pytest.mark.parametrize("mode", ["g", "mc", "mv"])
def test_static_programs_lose_every_dynamic_ascription(name, mode):
    p = core(benchmarks.load(name).source, mode=mode)
    assert p.fully_static
    assert not comps(p, M.CDynAscribe)
    assert not comps(p, M.CCheckGerm)


@pytest.mark.parametrize("name", benchmarks.SUITE)
def test_untyped_programs_have_no_ascription_to_a_germ(name):
    p = core(benchmarks.load(name).source, typing="dynamic")
    for c in comps(p, M.CAscribe):
        if c.atom.ty == M.DYN:
            assert M.germ_kind(c.ty) is None


def test_closure_conversion_captures():
    p = core("let x = 1 in let y = 2 in fun (z:int) -> x + y + z")
    (code,) = p.codes.values()
    assert [n for n, _ in code.captured] == ["x_0", "y_1"]
    (mk,) = comps(p, M.CMakeClosure)
    assert len(mk.captured) == 2


def test_direct_calls():
    p = core("let rec f : int -> int = fun (n:int) -> if n = 0 then 0 else f (n - 1) in f 3")
    assert len(comps(p, M.CDirectCall)) == 2 and not comps(p, M.CApp)
    p = core("let rec f : int -> int = fun (n:int) -> n in f 3", disabled={"direct"})
    assert not comps(p, M.CDirectCall)


def test_escaping_closures_stay_indirect():
    p = core("let f = fun (x:int) -> x in let g : ? = f in f 1")
    assert not comps(p, M.CDirectCall)
    p = core("let f = fun (x:int) -> x in let h = fun (k:int -> int) -> k 1 in h f")
    assert comps(p, M.CDirectCall)  # h is known, f escapes as an argument
    assert all(c.fn.name.startswith("h") for c in comps(p, M.CDirectCall))
