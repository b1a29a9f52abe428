"""Gradual types ordered by precision, with `?` as the top element.

Consistency is decided through the precision meet: two types are consistent
exactly when their meet exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache


class GradualType:
    """Base class of all gradual types. Instances are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return show_type(self)

    def __repr__(self) -> str:
        return f"<type {show_type(self)}>"


def _node(cls):
    """Make a frozen dataclass whose structural hash is computed once."""
    cls = dataclass(frozen=True, repr=False)(cls)
    generated = cls.__hash__

    def cached(self):
        return self._hash_value

    cls._hash_value = cached_property(generated)
    cls._hash_value.__set_name__(cls, "_hash_value")
    cls.__hash__ = cached
    return cls


@_node
class Base(GradualType):
    name: str


@_node
class Dyn(GradualType):
    pass


@_node
class Ref(GradualType):
    elem: GradualType


@_node
class Vec(GradualType):
    elem: GradualType


@_node
class Tuple(GradualType):
    items: tuple

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError("tuple types need at least two components")


@_node
class Fun(GradualType):
    params: tuple
    ret: GradualType

    def __post_init__(self):
        if not self.params:
            raise ValueError("function types need at least one parameter")


@_node
class Named(GradualType):
    name: str


INT = Base("int")
BOOL = Base("bool")
FLOAT = Base("float")
UNIT = Base("unit")
DYN = Dyn()

BASE_TYPES = {"int": INT, "bool": BOOL, "float": FLOAT, "unit": UNIT}


@dataclass
class VariantEnv:
    """Declared variant types: name -> ordered constructors with field types."""

    types: dict  # type name -> list of (ctor name, tuple of field types)

    def __post_init__(self):
        self.type_ids = {name: i for i, name in enumerate(self.types)}
        self.ctors = {}  # ctor name -> (type name, ctor id, field types)
        for tname, ctors in self.types.items():
            for cid, (cname, fields) in enumerate(ctors):
                self.ctors[cname] = (tname, cid, tuple(fields))

    @classmethod
    def empty(cls) -> "VariantEnv":
        return cls({})


# ---------------------------------------------------------------- lattice


def meet(a: GradualType, b: GradualType) -> GradualType | None:
    """Greatest lower bound under precision, or None when the heads clash."""
    if a is b or a is DYN:
        return b
    if b is DYN:
        return a
    return _meet(a, b)


@lru_cache(maxsize=1 << 16)
def _meet(a, b):
    ta = type(a)
    if ta is not type(b):
        if ta is Dyn:
            return b
        if type(b) is Dyn:
            return a
        return None
    if ta is Dyn:
        return a
    if ta is Base or ta is Named:
        return a if a == b else None
    if ta is Ref or ta is Vec:
        m = meet(a.elem, b.elem)
        return None if m is None else ta(m)
    if ta is Tuple:
        if len(a.items) != len(b.items):
            return None
        items = []
        for x, y in zip(a.items, b.items):
            m = meet(x, y)
            if m is None:
                return None
            items.append(m)
        return Tuple(tuple(items))
    if ta is Fun:
        if len(a.params) != len(b.params):
            return None
        params = []
        for x, y in zip(a.params, b.params):
            m = meet(x, y)
            if m is None:
                return None
            params.append(m)
        r = meet(a.ret, b.ret)
        return None if r is None else Fun(tuple(params), r)
    raise TypeError(f"not a gradual type: {a!r}")


def consistent(a: GradualType, b: GradualType) -> bool:
    return meet(a, b) is not None


def precision_le(a: GradualType, b: GradualType) -> bool:
    """True when `a` is at least as precise as `b`."""
    if a is b or b is DYN:
        return True
    if a is DYN:
        return False
    ta = type(a)
    if ta is not type(b):
        return False
    if ta is Base or ta is Named:
        return a == b
    if ta is Ref or ta is Vec:
        return precision_le(a.elem, b.elem)
    if ta is Tuple:
        return len(a.items) == len(b.items) and all(map(precision_le, a.items, b.items))
    if ta is Fun:
        return (
            len(a.params) == len(b.params)
            and all(map(precision_le, a.params, b.params))
            and precision_le(a.ret, b.ret)
        )
    return False


def is_static(t: GradualType) -> bool:
    """True when `t` mentions no `?`."""
    tt = type(t)
    if tt is Dyn:
        return False
    if tt is Ref or tt is Vec:
        return is_static(t.elem)
    if tt is Tuple:
        return all(map(is_static, t.items))
    if tt is Fun:
        return all(map(is_static, t.params)) and is_static(t.ret)
    return True


def germ_of(kind: str, detail: int | str | None = None) -> GradualType:
    """Least precise type admitting the elimination `kind`.

    Kinds: ``apply`` (detail = arity), ``deref``, ``vec``, ``proj``
    (detail = index) and ``match`` (detail = variant name).
    """
    if kind == "apply":
        return Fun((DYN,) * detail, DYN)
    if kind == "deref":
        return Ref(DYN)
    if kind == "vec":
        return Vec(DYN)
    if kind == "proj":
        return Tuple((DYN,) * max(2, detail + 1))
    if kind == "match":
        return Named(detail)
    raise ValueError(f"unknown elimination kind {kind!r}")


def admits(t: GradualType, kind: str, detail=None) -> bool:
    """Whether a value of static type `t` supports elimination `kind` without a check."""
    tt = type(t)
    if kind == "apply":
        return tt is Fun and len(t.params) == detail
    if kind == "deref":
        return tt is Ref
    if kind == "vec":
        return tt is Vec
    if kind == "proj":
        return tt is Tuple and len(t.items) > detail
    if kind == "match":
        return tt is Named and t.name == detail
    raise ValueError(f"unknown elimination kind {kind!r}")


def type_node_count(t: GradualType) -> int:
    """Number of non-`?` nodes in `t`."""
    tt = type(t)
    if tt is Dyn:
        return 0
    if tt is Ref or tt is Vec:
        return 1 + type_node_count(t.elem)
    if tt is Tuple:
        return 1 + sum(map(type_node_count, t.items))
    if tt is Fun:
        return 1 + sum(map(type_node_count, t.params)) + type_node_count(t.ret)
    return 1


def show_type(t: GradualType) -> str:
    tt = type(t)
    if tt is Base or tt is Named:
        return t.name
    if tt is Dyn:
        return "?"
    if tt is Ref:
        return f"ref[{show_type(t.elem)}]"
    if tt is Vec:
        return f"vec[{show_type(t.elem)}]"
    if tt is Tuple:
        return " * ".join(_show_operand(x) for x in t.items)
    if tt is Fun:
        if len(t.params) == 1:
            p = _show_operand(t.params[0])
        else:
            p = "(" + ", ".join(show_type(x) for x in t.params) + ")"
        return f"{p}->{show_type(t.ret)}"
    raise TypeError(f"not a gradual type: {t!r}")


def _show_operand(t: GradualType) -> str:
    s = show_type(t)
    return f"({s})" if type(t) in (Tuple, Fun) else s
