from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evgrad import benchmarks
from evgrad import surface as S
from evgrad.surface import (
    App, Ascription, Assign, BinOp, BoolLit, Deref, FloatLit, If, IntLit, Lam, Let, LetRec, Loop, MkRef, MkTuple,
    MkVec, Param, PrimOp, Proj, Seq, UnitLit, Var, VecGet, VecSet, LexError, ParseError, parse_expr,
    parse_program, parse_type, pretty, tokenize,
)
from evgrad.typelattice import DYN, INT, Fun, Named, Ref
from strategies import gradual_types

FIG2 = "let x = ref (4 :: ?) in\nlet y : ref[bool] = x in\ny := true;\n!y"


def test_tokens():
    kinds = [t.kind for t in tokenize("let x = 1 +. 2.5 in !x := (* c (* nested *) *) x.[0] <- #1 y")]
    assert kinds[:7] == ["LET", "IDENT", "EQ", "INT", "FPLUS", "FLOAT", "IN"]
    assert "DOTBRACKET" in kinds and "LARROW" in kinds and "HASH" in kinds
    assert kinds[-1] == "EOF"


@pytest.mark.parametrize("bad", ["1.2.3", "12abc", "(* open", "let $ = 1"])
def test_lex_errors(bad):
    with pytest.raises((LexError, ParseError)):
        parse_program(bad)


def test_annotated_let():
    e = parse_expr("let f : ?->int = fun g -> g 1 in f true")
    assert isinstance(e, Let) and e.ty == Fun((DYN,), INT)
    assert isinstance(e.bound, Lam) and e.bound.params[0].ty is None


def test_fig2_shape():
    e = parse_expr(FIG2)
    assert isinstance(e.bound, MkRef) and isinstance(e.bound.init, Ascription)
    assert e.body.ty == Ref(parse_type("bool"))
    assert isinstance(e.body.body, Seq)
    assert isinstance(e.body.body.first, Assign) and isinstance(e.body.body.second, Deref)


def test_variant_declaration():
    p = parse_program("type stream = SCons of int * (int -> stream)\nSCons (1, fun (x:int) -> SCons (x, fun y -> y))")
    (decl,) = p.decls
    (ctor,) = decl.ctors
    assert ctor.name == "SCons" and len(ctor.fields) == 2
    assert ctor.fields[1] == Fun((INT,), Named("stream"))


def test_parse_error_reports_expected():
    with pytest.raises(ParseError) as info:
        parse_program("let x = in 1")
    assert "expression" in info.value.expected
    assert str(info.value.span) == "1:9"


def test_comparisons_do_not_chain():
    with pytest.raises(ParseError):
        parse_expr("1 < 2 < 3")


def test_primitive_names_are_reserved():
    with pytest.raises(ParseError):
        parse_expr("let print_int = 1 in 2")


def test_negative_literals_and_unary_minus():
    assert parse_expr("-3") == IntLit(-3)
    assert parse_expr("- x") == BinOp("-", IntLit(0), Var("x"))


def test_spans_are_monotone():
    e = parse_expr("let a = 1 + 2 in a * 3")
    assert e.span.start <= e.bound.span.start <= e.bound.span.end <= e.body.span.start


@pytest.mark.parametrize("src", ["1 + 2", "fun x -> x", "(1 + 2) :: ?", "f (g 1) 2", "a.[i] <- b.[j]", "#1 (1, true)"])
def test_round_trip_small(src):
    e = parse_expr(src)
    assert parse_expr(pretty(e)) == e


def test_pretty_preserves_missing_annotations():
    assert pretty(parse_expr("fun x -> x")) == "fun x -> x"
    assert pretty(parse_expr("1 :: int")) == "1 :: int"


@pytest.mark.parametrize("name", benchmarks.SUITE + benchmarks.EXTRA)
def test_round_trip_benchmarks(name):
    p = parse_program(benchmarks.load(name).source)
    assert parse_program(pretty(p)) == p


def test_round_trip_demo_programs():
    for f in sorted((Path(__file__).parent.parent / "demos").glob("*.gtp")):
        p = parse_program(f.read_text())
        assert parse_program(pretty(p)) == p


def test_annotation_sites_and_erasure():
    p = parse_program("let f : int -> int = fun (x:int) -> (x :: int) in let y = 2 in f y")
    sites = S.annotation_sites(p)
    assert [k for _, k, _ in sites] == ["let", "param", "ascription", "let"]
    assert sites[-1][2] is None
    erased = S.erase_annotations(p)
    assert all(t == DYN for _, _, t in S.annotation_sites(erased))


# ---- generated programs


names = st.sampled_from(["a", "b", "f", "xs"])
leaf = st.one_of(
    names.map(Var),
    st.integers(-5, 1000).map(IntLit),
    st.booleans().map(BoolLit),
    st.sampled_from([0.5, 2.0, 1e-3, 3.25]).map(FloatLit),
    st.just(UnitLit()),
)
opt_type = st.one_of(st.none(), gradual_types(4))


def _exprs(inner):
    return st.one_of(
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "<", "=", "&&", "||", "+.", "<=."]), inner, inner),
        st.builds(If, inner, inner, inner),
        st.builds(Let, names, opt_type, inner, inner),
        st.builds(LetRec, names, opt_type, st.builds(lambda p, b: Lam((p,), b), st.builds(Param, names, opt_type), inner), inner),
        st.builds(lambda ps, b: Lam(tuple(ps), b), st.lists(st.builds(Param, names, opt_type), min_size=1, max_size=2), inner),
        st.builds(lambda f, args: App(f, tuple(args)), inner, st.lists(inner, min_size=1, max_size=2)),
        st.builds(MkRef, inner),
        st.builds(Deref, inner),
        st.builds(Assign, inner, inner),
        st.builds(Seq, inner, inner),
        st.builds(lambda xs: MkTuple(tuple(xs)), st.lists(inner, min_size=2, max_size=3)),
        st.builds(Proj, inner, st.integers(0, 2)),
        st.builds(Ascription, inner, gradual_types(4)),
        st.builds(MkVec, inner, inner),
        st.builds(VecGet, inner, inner),
        st.builds(VecSet, inner, inner, inner),
        st.builds(Loop, names, inner, inner, inner),
        st.builds(lambda op, a: PrimOp(op, (a,)), st.sampled_from(["print_int", "not", "sqrt"]), inner),
    )


exprs = st.recursive(leaf, _exprs, max_leaves=12)


@settings(max_examples=400)
@given(exprs)
def test_round_trip_generated(e):
    assert parse_expr(pretty(e)) == e
