"""Evidence for consistency judgments and consistent transitivity.

Evidence is a single gradual type. Combining two pieces of evidence is the
precision meet of their payloads; an undefined meet is a cast failure.
"""

from __future__ import annotations

from dataclasses import dataclass

from evgrad.typelattice import DYN, FLOAT, Fun, GradualType, Ref, Tuple, Vec, is_static, meet, show_type

IMM = "imm"
BOXED = "boxed"

NONE = "none"
BOX_FLOAT = "box-float"
UNBOX_FLOAT = "unbox-float"


@dataclass(frozen=True)
class Evidence:
    """Evidence payload, optionally tagged with a float representation.

    The tag only appears when the float unboxing optimization is enabled and
    only at the root of a payload that is `float` or `?`.
    """

    type: GradualType
    rep: str | None = None

    def __post_init__(self):
        if self.rep not in (None, IMM, BOXED):
            raise ValueError(f"bad representation tag {self.rep!r}")
        if self.rep == IMM and self.type != FLOAT:
            raise ValueError("only float evidence can be immediate")

    def __str__(self) -> str:
        if self.rep is None:
            return f"<{show_type(self.type)}>"
        return f"<{show_type(self.type)}:{self.rep}>"


def initial_evidence(a: GradualType, b: GradualType) -> Evidence | None:
    m = meet(a, b)
    return None if m is None else Evidence(m)


def trans(e1: Evidence, e2: Evidence) -> Evidence | None:
    """Consistent transitivity. Pure; the runtime does its own counting."""
    m = meet(e1.type, e2.type)
    return None if m is None else Evidence(m)


def dom(e: Evidence, i: int) -> Evidence:
    t = e.type
    if type(t) is not Fun or i >= len(t.params):
        raise AssertionError(f"dom({i}) of non-function evidence {e}")
    return Evidence(t.params[i])


def cod(e: Evidence) -> Evidence:
    t = e.type
    if type(t) is not Fun:
        raise AssertionError(f"cod of non-function evidence {e}")
    return Evidence(t.ret)


def content(e: Evidence, kind: str, index: int | None = None) -> Evidence:
    """Evidence on a structure slot. `kind` is ``ref``, ``vec`` or ``proj``."""
    t = e.type
    if kind == "ref" and type(t) is Ref:
        return Evidence(t.elem)
    if kind == "vec" and type(t) is Vec:
        return Evidence(t.elem)
    if kind == "proj" and type(t) is Tuple and index is not None and index < len(t.items):
        return Evidence(t.items[index])
    raise AssertionError(f"content({kind}) of evidence {e}")


def is_fully_precise(e: Evidence) -> bool:
    return is_static(e.type)


def rep_action(src: str | None, dst: str | None) -> str:
    """Coercion needed to move a float from representation `src` to `dst`."""
    if src == IMM and dst == BOXED:
        return BOX_FLOAT
    if src == BOXED and dst == IMM:
        return UNBOX_FLOAT
    return NONE


def dfo_trans(e1: Evidence, e2: Evidence) -> tuple[Evidence, str] | None:
    m = meet(e1.type, e2.type)
    if m is None:
        return None
    action = rep_action(e1.rep, e2.rep)
    rep = e2.rep if m == FLOAT or m is DYN else None
    if rep == IMM and m != FLOAT:
        rep = None
    return Evidence(m, rep), action
