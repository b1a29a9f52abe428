import pytest
from hypothesis import given

from evgrad.evidence import (
    BOX_FLOAT, BOXED, IMM, NONE, UNBOX_FLOAT, Evidence, cod, content, dfo_trans, dom, initial_evidence,
    is_fully_precise, trans,
)
from evgrad.surface import parse_type
from evgrad.typelattice import BOOL, DYN, FLOAT, INT, consistent, precision_le
from strategies import gradual_types


def E(src, rep=None):
    return Evidence(parse_type(src), rep)


def test_initial_evidence():
    assert initial_evidence(DYN, INT) == E("int")
    assert initial_evidence(BOOL, DYN) == E("bool")
    assert initial_evidence(INT, BOOL) is None


def test_trans_examples():
    assert trans(E("bool"), E("?")) == E("bool")
    assert trans(E("bool"), E("int")) is None


@given(gradual_types())
def test_trans_dyn_identity(g):
    assert trans(Evidence(g), E("?")) == Evidence(g)


def test_projections():
    assert dom(E("? -> int"), 0) == E("?")
    assert dom(E("int -> int"), 0) == E("int")
    assert dom(E("(bool, ?) -> unit"), 1) == E("?")
    assert cod(E("? -> int")) == E("int")
    assert cod(E("? -> ?")) == E("?")
    assert cod(E("int -> bool")) == E("bool")
    assert content(E("ref[int]"), "ref") == E("int")
    assert content(E("vec[?]"), "vec") == E("?")
    assert content(E("int * bool"), "proj", 1) == E("bool")


def test_projection_preconditions():
    with pytest.raises(AssertionError):
        dom(E("int"), 0)
    with pytest.raises(AssertionError):
        dom(E("int -> int"), 1)
    with pytest.raises(AssertionError):
        cod(E("ref[int]"))
    with pytest.raises(AssertionError):
        content(E("ref[int]"), "vec")


def test_full_precision():
    assert is_fully_precise(E("int"))
    assert not is_fully_precise(E("int -> ?"))
    assert is_fully_precise(E("ref[int * bool]"))


def test_dfo_trans_actions():
    assert dfo_trans(E("float", IMM), E("?", BOXED)) == (E("float", BOXED), BOX_FLOAT)
    assert dfo_trans(E("float", BOXED), E("float", IMM)) == (E("float", IMM), UNBOX_FLOAT)
    assert dfo_trans(E("int"), E("int")) == (E("int"), NONE)
    assert dfo_trans(E("float", IMM), E("int")) is None


def test_rep_tag_validation():
    with pytest.raises(ValueError):
        Evidence(INT, IMM)
    with pytest.raises(ValueError):
        Evidence(FLOAT, "stack")
    assert str(E("? -> int")) == "<?->int>"
    assert str(E("float", IMM)) == "<float:imm>"


@given(gradual_types(), gradual_types())
def test_trans_symmetric_and_monotone(a, b):
    ea, eb = Evidence(a), Evidence(b)
    r = trans(ea, eb)
    assert r == trans(eb, ea)
    if r is not None:
        assert precision_le(r.type, a) and precision_le(r.type, b)


@given(gradual_types(), gradual_types())
def test_initial_evidence_matches_consistency(a, b):
    e = initial_evidence(a, b)
    assert (e is not None) == consistent(a, b)
    if e is not None:
        assert precision_le(e.type, a) and precision_le(e.type, b)


@given(gradual_types(), gradual_types(), gradual_types())
def test_trans_associative(a, b, c):
    ea, eb, ec = Evidence(a), Evidence(b), Evidence(c)
    ab, bc = trans(ea, eb), trans(eb, ec)
    left = None if ab is None else trans(ab, ec)
    right = None if bc is None else trans(ea, bc)
    assert left == right


def test_trans_matches_concretization_oracle():
    from strategies import concretize, universe

    statics = universe(3, with_dyn=False)
    grads = universe(3, with_dyn=True)
    gamma = {g: concretize(g, statics) for g in grads}
    for a in grads:
        for b in grads[::7]:
            r = trans(Evidence(a), Evidence(b))
            both = gamma[a] & gamma[b]
            if r is None:
                assert not both
            else:
                assert concretize(r.type, statics) == both
