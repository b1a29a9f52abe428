"""Lexer, parser and pretty-printer for the source language.

The concrete syntax is OCaml-flavored. Integer and float operators use
disjoint lexemes (``+`` vs ``+.``), application is juxtaposition with all
arguments at once, and missing annotations stay distinct from ``?``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, is_dataclass, replace

from evgrad.typelattice import (
    BASE_TYPES, DYN, Dyn, Fun, GradualType, Named, Ref, Tuple, Vec, show_type,
)


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int = 1
    col: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"

    def to(self, other: "Span") -> "Span":
        return Span(self.start, max(self.end, other.end), self.line, self.col)


NOSPAN = Span(0, 0, 0, 0)


class LexError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{span}: {message}")
        self.span = span


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: frozenset = frozenset()):
        if expected:
            message += " (expected " + " or ".join(sorted(expected)) + ")"
        super().__init__(f"{span}: {message}")
        self.span = span
        self.expected = expected


# ------------------------------------------------------------------- tokens


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    span: Span

    def __repr__(self) -> str:
        if self.kind in ("IDENT", "CTOR", "INT", "FLOAT"):
            return f"{self.kind} {self.value}"
        return self.kind


KEYWORDS = {
    kw: kw.upper()
    for kw in (
        "let rec in fun if then else loop to do done ref vector type of match with true false"
    ).split()
}

# Longest lexemes first so that `<-`, `<=.` and friends win over `<`.
SYMBOLS = [
    ("<=.", "FLE"), (">=.", "FGE"),
    ("+.", "FPLUS"), ("-.", "FMINUS"), ("*.", "FTIMES"), ("/.", "FDIV"),
    ("<.", "FLT"), (">.", "FGT"), ("=.", "FEQ"),
    ("->", "ARROW"), ("<-", "LARROW"), ("::", "COLONCOLON"), (":=", "ASSIGN"),
    ("<=", "LE"), (">=", "GE"), ("<>", "NE"), ("&&", "AND"), ("||", "OR"),
    (".[", "DOTBRACKET"),
    ("+", "PLUS"), ("-", "MINUS"), ("*", "STAR"), ("/", "SLASH"), ("%", "PERCENT"),
    ("<", "LT"), (">", "GT"), ("=", "EQ"), ("!", "BANG"), (":", "COLON"),
    (";", "SEMI"), (",", "COMMA"), ("(", "LPAREN"), (")", "RPAREN"),
    ("[", "LBRACKET"), ("]", "RBRACKET"), ("|", "BAR"), ("#", "HASH"), ("?", "QMARK"),
]

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>\d+(?:\.(?!\[)\d*)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-z_][A-Za-z0-9_']*)"
    r"|(?P<ctor>[A-Z][A-Za-z0-9_']*)"
    r"|(?P<sym>" + "|".join(re.escape(s) for s, _ in SYMBOLS) + ")"
)
_SYMBOL_KIND = dict(SYMBOLS)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    n = len(source)

    def span_at(start, end):
        return Span(start, end, line, start - line_start + 1)

    while pos < n:
        if source.startswith("(*", pos):
            depth, start, i = 0, pos, pos
            while i < n:
                if source.startswith("(*", i):
                    depth += 1
                    i += 2
                elif source.startswith("*)", i):
                    depth -= 1
                    i += 2
                    if depth == 0:
                        break
                else:
                    if source[i] == "\n":
                        line += 1
                        line_start = i + 1
                    i += 1
            if depth:
                raise LexError("unterminated comment", span_at(start, n))
            pos = i
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LexError(f"illegal character {source[pos]!r}", span_at(pos, pos + 1))
        kind, text, end = m.lastgroup, m.group(), m.end()
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        elif kind == "num":
            dot_bracket = source.startswith(".[", end)
            if end < n and (source[end].isalnum() or source[end] in "._") and not dot_bracket:
                raise LexError(f"malformed numeric literal {source[pos:end + 1]!r}", span_at(pos, end + 1))
            if "." in text or "e" in text or "E" in text:
                if "." not in text:
                    raise LexError(f"malformed numeric literal {text!r}", span_at(pos, end))
                tokens.append(Token("FLOAT", float(text), span_at(pos, end)))
            else:
                tokens.append(Token("INT", int(text), span_at(pos, end)))
        elif kind == "ident":
            kw = KEYWORDS.get(text)
            tokens.append(Token(kw or "IDENT", text, span_at(pos, end)))
        elif kind == "ctor":
            tokens.append(Token("CTOR", text, span_at(pos, end)))
        else:
            tokens.append(Token(_SYMBOL_KIND[text], text, span_at(pos, end)))
        pos = end
    tokens.append(Token("EOF", None, span_at(n, n)))
    return tokens


# ---------------------------------------------------------------------- AST


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


class Expr:
    """Base class of surface expressions."""

    __slots__ = ()


@dataclass(eq=True)
class Param:
    name: str
    ty: GradualType | None
    span: Span = _span()


@dataclass(eq=True)
class Lam(Expr):
    params: tuple
    body: Expr
    span: Span = _span()


@dataclass(eq=True)
class App(Expr):
    fn: Expr
    args: tuple
    span: Span = _span()


@dataclass(eq=True)
class Var(Expr):
    name: str
    span: Span = _span()


@dataclass(eq=True)
class IntLit(Expr):
    value: int
    span: Span = _span()


@dataclass(eq=True)
class FloatLit(Expr):
    value: float
    span: Span = _span()


@dataclass(eq=True)
class BoolLit(Expr):
    value: bool
    span: Span = _span()


@dataclass(eq=True)
class UnitLit(Expr):
    span: Span = _span()


@dataclass(eq=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    span: Span = _span()


@dataclass(eq=True)
class PrimOp(Expr):
    op: str
    args: tuple
    span: Span = _span()


@dataclass(eq=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    span: Span = _span()


@dataclass(eq=True)
class Loop(Expr):
    var: str
    lo: Expr
    hi: Expr
    body: Expr
    span: Span = _span()


@dataclass(eq=True)
class Let(Expr):
    name: str
    ty: GradualType | None
    bound: Expr
    body: Expr
    span: Span = _span()
    ty_span: Span = _span()


@dataclass(eq=True)
class LetRec(Expr):
    name: str
    ty: GradualType | None
    bound: Expr
    body: Expr
    span: Span = _span()
    ty_span: Span = _span()


@dataclass(eq=True)
class MkRef(Expr):
    init: Expr
    span: Span = _span()


@dataclass(eq=True)
class Deref(Expr):
    ref: Expr
    span: Span = _span()


@dataclass(eq=True)
class Assign(Expr):
    ref: Expr
    value: Expr
    span: Span = _span()


@dataclass(eq=True)
class MkVec(Expr):
    size: Expr
    init: Expr
    span: Span = _span()


@dataclass(eq=True)
class VecGet(Expr):
    vec: Expr
    index: Expr
    span: Span = _span()


@dataclass(eq=True)
class VecSet(Expr):
    vec: Expr
    index: Expr
    value: Expr
    span: Span = _span()


@dataclass(eq=True)
class MkTuple(Expr):
    items: tuple
    span: Span = _span()


@dataclass(eq=True)
class Proj(Expr):
    tup: Expr
    index: int
    span: Span = _span()


@dataclass(eq=True)
class Construct(Expr):
    ctor: str
    args: tuple
    span: Span = _span()


@dataclass(eq=True)
class Arm:
    ctor: str
    vars: tuple
    body: Expr
    span: Span = _span()


@dataclass(eq=True)
class Match(Expr):
    scrutinee: Expr
    arms: tuple
    span: Span = _span()


@dataclass(eq=True)
class Ascription(Expr):
    expr: Expr
    ty: GradualType
    span: Span = _span()


@dataclass(eq=True)
class Seq(Expr):
    first: Expr
    second: Expr
    span: Span = _span()


@dataclass(eq=True)
class CtorDecl:
    name: str
    fields: tuple
    span: Span = _span()


@dataclass(eq=True)
class VariantDecl:
    name: str
    ctors: tuple
    span: Span = _span()


@dataclass(eq=True)
class Program:
    decls: tuple
    main: Expr
    span: Span = _span()


def children(node) -> list:
    """Direct sub-expressions (and arms/params) of a node, in source order."""
    out = []
    for f in fields(node):
        if f.name in ("span", "ty_span"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, tuple):
            out.extend(x for x in v if is_dataclass(x) and not isinstance(x, GradualType))
        elif is_dataclass(v) and not isinstance(v, GradualType):
            out.append(v)
    return out


# ------------------------------------------------------------------- parser

# Primitive operations with their arities.
PRIMS = {
    "print_int": 1, "print_bool": 1, "print_float": 1, "not": 1,
    "float_of_int": 1, "int_of_float": 1, "sqrt": 1, "read_int": 1,
}

BINOPS = {
    "OR": "||", "AND": "&&",
    "LT": "<", "LE": "<=", "GT": ">", "GE": ">=", "EQ": "=", "NE": "<>",
    "FLT": "<.", "FLE": "<=.", "FGT": ">.", "FGE": ">=.", "FEQ": "=.",
    "PLUS": "+", "MINUS": "-", "FPLUS": "+.", "FMINUS": "-.",
    "STAR": "*", "SLASH": "/", "PERCENT": "%", "FTIMES": "*.", "FDIV": "/.",
}

# Precedence levels, loosest first.
SEQ, ASCR, ASSIGN, OR, AND, CMP, ADD, MUL, UNARY, APP, POSTFIX, ATOM = range(12)

OP_LEVEL = {
    "||": OR, "&&": AND,
    "<": CMP, "<=": CMP, ">": CMP, ">=": CMP, "=": CMP, "<>": CMP,
    "<.": CMP, "<=.": CMP, ">.": CMP, ">=.": CMP, "=.": CMP,
    "+": ADD, "-": ADD, "+.": ADD, "-.": ADD,
    "*": MUL, "/": MUL, "%": MUL, "*.": MUL, "/.": MUL,
}

_ATOM_START = {"IDENT", "CTOR", "INT", "FLOAT", "TRUE", "FALSE", "LPAREN", "LOOP"}
_OPEN_FORMS = {"LET", "FUN", "IF", "MATCH"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.tok
        if t.kind != kind:
            raise ParseError(f"unexpected {_describe(t)}", t.span, frozenset({kind}))
        return self.advance()

    def accept(self, kind: str) -> Token | None:
        if self.tok.kind == kind:
            return self.advance()
        return None

    def fail(self, expected):
        t = self.tok
        raise ParseError(f"unexpected {_describe(t)}", t.span, frozenset(expected))

    def span_from(self, start: Span) -> Span:
        prev = self.toks[self.i - 1] if self.i else self.tok
        return Span(start.start, max(start.end, prev.span.end), start.line, start.col)

    # -- programs

    def program(self) -> Program:
        start = self.tok.span
        decls = []
        while self.tok.kind == "TYPE":
            decls.append(self.variant_decl())
        main = self.expr()
        self.expect("EOF")
        return Program(tuple(decls), main, self.span_from(start))

    def variant_decl(self) -> VariantDecl:
        start = self.expect("TYPE").span
        name = self.expect("IDENT").value
        self.expect("EQ")
        self.accept("BAR")
        ctors = [self.ctor_decl()]
        while self.accept("BAR"):
            ctors.append(self.ctor_decl())
        return VariantDecl(name, tuple(ctors), self.span_from(start))

    def ctor_decl(self) -> CtorDecl:
        tok = self.expect("CTOR")
        fields_ = []
        if self.accept("OF"):
            fields_.append(self.type_atom())
            while self.accept("STAR"):
                fields_.append(self.type_atom())
        return CtorDecl(tok.value, tuple(fields_), self.span_from(tok.span))

    # -- types

    def type_(self) -> GradualType:
        start = self.tok
        group = self.type_group()
        if self.accept("ARROW"):
            ret = self.type_()
            params = group if isinstance(group, list) else [group]
            return Fun(tuple(params), ret)
        if isinstance(group, list):
            raise ParseError("parameter list must be followed by ->", start.span, frozenset({"ARROW"}))
        return group

    def type_group(self):
        """A tuple type, or a parenthesized parameter list (returned as a list)."""
        if self.tok.kind == "LPAREN":
            save = self.i
            self.advance()
            first = self.type_()
            if self.tok.kind == "COMMA":
                items = [first]
                while self.accept("COMMA"):
                    items.append(self.type_())
                self.expect("RPAREN")
                return items
            self.i = save
        items = [self.type_atom()]
        while self.accept("STAR"):
            items.append(self.type_atom())
        return items[0] if len(items) == 1 else Tuple(tuple(items))

    def type_atom(self) -> GradualType:
        t = self.tok
        if t.kind == "QMARK":
            self.advance()
            return DYN
        if t.kind == "REF":
            self.advance()
            self.expect("LBRACKET")
            elem = self.type_()
            self.expect("RBRACKET")
            return Ref(elem)
        if t.kind == "IDENT":
            self.advance()
            if t.value == "vec" and self.tok.kind == "LBRACKET":
                self.advance()
                elem = self.type_()
                self.expect("RBRACKET")
                return Vec(elem)
            return BASE_TYPES.get(t.value) or Named(t.value)
        if t.kind == "LPAREN":
            self.advance()
            inner = self.type_()
            self.expect("RPAREN")
            return inner
        self.fail({"type"})

    # -- expressions

    def expr(self) -> Expr:
        first = self.ascr()
        if self.accept("SEMI"):
            second = self.expr()
            return Seq(first, second, first.span.to(second.span))
        return first

    def ascr(self) -> Expr:
        e = self.assign()
        while self.tok.kind == "COLONCOLON":
            self.advance()
            ty = self.type_()
            e = Ascription(e, ty, self.span_from(e.span))
        return e

    def assign(self) -> Expr:
        e = self.binary(OR)
        if self.tok.kind == "ASSIGN":
            self.advance()
            v = self.binary(OR)
            return Assign(e, v, e.span.to(v.span))
        if self.tok.kind == "LARROW":
            if not isinstance(e, VecGet):
                self.fail({"ASSIGN"})
            self.advance()
            v = self.binary(OR)
            return VecSet(e.vec, e.index, v, e.span.to(v.span))
        return e

    def binary(self, level: int) -> Expr:
        if level > MUL:
            return self.unary()
        lhs = self.binary(level + 1)
        while True:
            op = BINOPS.get(self.tok.kind)
            if op is None or OP_LEVEL[op] != level:
                return lhs
            self.advance()
            rhs = self.binary(level + 1)
            lhs = BinOp(op, lhs, rhs, lhs.span.to(rhs.span))
            if level == CMP and BINOPS.get(self.tok.kind) and OP_LEVEL[BINOPS[self.tok.kind]] == CMP:
                self.fail({"operator of another precedence"})

    def unary(self) -> Expr:
        t = self.tok
        if t.kind == "BANG":
            self.advance()
            e = self.unary()
            return Deref(e, self.span_from(t.span))
        if t.kind == "MINUS":
            self.advance()
            nt = self.tok
            if nt.kind == "INT":
                self.advance()
                return IntLit(-nt.value, self.span_from(t.span))
            if nt.kind == "FLOAT":
                self.advance()
                return FloatLit(-nt.value, self.span_from(t.span))
            e = self.unary()
            return BinOp("-", IntLit(0, t.span), e, self.span_from(t.span))
        if t.kind in _OPEN_FORMS:
            return self.open_form()
        return self.app()

    def open_form(self) -> Expr:
        t = self.advance()
        if t.kind == "FUN":
            params = self.params()
            self.expect("ARROW")
            body = self.expr()
            return Lam(params, body, self.span_from(t.span))
        if t.kind == "IF":
            c = self.expr()
            self.expect("THEN")
            th = self.expr()
            self.expect("ELSE")
            el = self.ascr()
            return If(c, th, el, self.span_from(t.span))
        if t.kind == "MATCH":
            scrut = self.expr()
            self.expect("WITH")
            arms = []
            self.accept("BAR")
            arms.append(self.arm())
            while self.accept("BAR"):
                arms.append(self.arm())
            return Match(scrut, tuple(arms), self.span_from(t.span))
        # let / let rec
        rec = self.accept("REC") is not None
        name_tok = self.expect("IDENT")
        _check_binder(name_tok)
        ty, ty_span = None, NOSPAN
        if self.tok.kind == "COLON":
            self.advance()
            ty_start = self.tok.span
            ty = self.type_()
            ty_span = self.span_from(ty_start)
        self.expect("EQ")
        bound = self.expr()
        self.expect("IN")
        body = self.expr()
        cls = LetRec if rec else Let
        return cls(name_tok.value, ty, bound, body, self.span_from(t.span), ty_span)

    def params(self) -> tuple:
        t = self.tok
        if t.kind == "IDENT":
            self.advance()
            _check_binder(t)
            return (Param(t.value, None, t.span),)
        self.expect("LPAREN")
        ps = [self.param()]
        while self.accept("COMMA"):
            ps.append(self.param())
        self.expect("RPAREN")
        return tuple(ps)

    def param(self) -> Param:
        t = self.expect("IDENT")
        _check_binder(t)
        ty = None
        if self.accept("COLON"):
            ty = self.type_()
        return Param(t.value, ty, self.span_from(t.span))

    def arm(self) -> Arm:
        t = self.expect("CTOR")
        names = []
        if self.accept("LPAREN"):
            v = self.expect("IDENT")
            _check_binder(v)
            names.append(v.value)
            while self.accept("COMMA"):
                v = self.expect("IDENT")
                _check_binder(v)
                names.append(v.value)
            self.expect("RPAREN")
        self.expect("ARROW")
        body = self.expr()
        return Arm(t.value, tuple(names), body, self.span_from(t.span))

    def app(self) -> Expr:
        t = self.tok
        if t.kind == "REF":
            self.advance()
            arg = self.postfix()
            return MkRef(arg, self.span_from(t.span))
        if t.kind == "VECTOR":
            self.advance()
            n = self.postfix()
            init = self.postfix()
            return MkVec(n, init, self.span_from(t.span))
        if t.kind == "HASH":
            self.advance()
            idx = self.expect("INT").value
            e = self.postfix()
            return Proj(e, idx, self.span_from(t.span))
        if t.kind == "IDENT" and t.value in PRIMS:
            self.advance()
            args = [self.postfix() for _ in range(PRIMS[t.value])]
            return PrimOp(t.value, tuple(args), self.span_from(t.span))
        head = self.postfix()
        args = []
        while self.tok.kind in _ATOM_START and not (
            self.tok.kind == "IDENT" and self.tok.value in PRIMS
        ):
            args.append(self.postfix())
        if args:
            return App(head, tuple(args), self.span_from(t.span))
        return head

    def postfix(self) -> Expr:
        e = self.atom()
        while self.tok.kind == "DOTBRACKET":
            self.advance()
            idx = self.expr()
            self.expect("RBRACKET")
            e = VecGet(e, idx, self.span_from(e.span))
        return e

    def atom(self) -> Expr:
        t = self.tok
        k = t.kind
        if k == "INT":
            self.advance()
            return IntLit(t.value, t.span)
        if k == "FLOAT":
            self.advance()
            return FloatLit(t.value, t.span)
        if k in ("TRUE", "FALSE"):
            self.advance()
            return BoolLit(k == "TRUE", t.span)
        if k == "IDENT":
            if t.value in PRIMS:
                self.fail({"expression"})
            self.advance()
            return Var(t.value, t.span)
        if k == "CTOR":
            self.advance()
            args = []
            if self.tok.kind == "LPAREN":
                self.advance()
                args.append(self.expr())
                while self.accept("COMMA"):
                    args.append(self.expr())
                self.expect("RPAREN")
            return Construct(t.value, tuple(args), self.span_from(t.span))
        if k == "LOOP":
            self.advance()
            v = self.expect("IDENT")
            _check_binder(v)
            self.expect("EQ")
            lo = self.expr()
            self.expect("TO")
            hi = self.expr()
            self.expect("DO")
            body = self.expr()
            self.expect("DONE")
            return Loop(v.value, lo, hi, body, self.span_from(t.span))
        if k == "LPAREN":
            self.advance()
            if self.tok.kind == "RPAREN":
                self.advance()
                return UnitLit(self.span_from(t.span))
            first = self.expr()
            if self.tok.kind == "COMMA":
                items = [first]
                while self.accept("COMMA"):
                    items.append(self.expr())
                self.expect("RPAREN")
                return MkTuple(tuple(items), self.span_from(t.span))
            self.expect("RPAREN")
            return first
        self.fail({"expression"})


def _check_binder(tok: Token) -> None:
    if tok.value in PRIMS:
        raise ParseError(f"{tok.value!r} is a reserved primitive", tok.span)


def _describe(t: Token) -> str:
    if t.kind == "EOF":
        return "end of input"
    return f"{t.kind} {t.value!r}" if t.value is not None else t.kind


def parse_program(source_or_tokens) -> Program:
    """Parse a whole program from source text or a token list."""
    tokens = tokenize(source_or_tokens) if isinstance(source_or_tokens, str) else source_or_tokens
    return _Parser(tokens).program()


def parse_expr(source: str) -> Expr:
    p = _Parser(tokenize(source))
    e = p.expr()
    p.expect("EOF")
    return e


def parse_type(source: str) -> GradualType:
    p = _Parser(tokenize(source))
    t = p.type_()
    p.expect("EOF")
    return t


# ----------------------------------------------------------- pretty-printer


def format_float(x: float) -> str:
    s = repr(float(x))
    if s in ("inf", "-inf", "nan"):
        raise ValueError(f"float literal {s} has no source syntax")
    mant, _, exp = s.partition("e")
    if "." not in mant:
        mant += ".0"
    return mant + ("e" + exp if exp else "")


def _is_open(e: Expr) -> bool:
    return isinstance(e, (Let, LetRec, Lam, If, Match))


def _level(e: Expr) -> int:
    if isinstance(e, Seq):
        return SEQ
    if isinstance(e, Ascription):
        return ASCR
    if isinstance(e, (Assign, VecSet)):
        return ASSIGN
    if isinstance(e, BinOp):
        return OP_LEVEL[e.op]
    if isinstance(e, Deref):
        return UNARY
    if isinstance(e, (IntLit, FloatLit)) and str(e.value).startswith("-"):
        return UNARY
    if isinstance(e, (App, PrimOp, MkRef, MkVec, Proj)):
        return APP
    if isinstance(e, VecGet):
        return POSTFIX
    if _is_open(e):
        return SEQ
    return ATOM


class Printer:
    """Precedence-aware printer. Subclassed for the elaborated language."""

    def show_type(self, t: GradualType) -> str:
        return show_type(t)

    def level(self, e) -> int:
        return _level(e)

    def is_open(self, e) -> bool:
        return _is_open(e)

    def pp(self, e, need: int = SEQ, tail: bool = True) -> str:
        """Print `e` where the context requires level `need`.

        `tail` says nothing follows `e` up to a closing delimiter, so
        right-open forms (let, fun, if, match) are safe unparenthesized.
        """
        if self.is_open(e):
            if tail and need <= UNARY:
                return self.node(e, tail)
            return "(" + self.node(e, True) + ")"
        if self.level(e) < need:
            return "(" + self.node(e, True) + ")"
        if not tail and need >= POSTFIX and isinstance(e, Construct) and not e.args:
            return f"({e.ctor})"
        return self.node(e, tail)

    def params(self, params) -> str:
        if len(params) == 1 and params[0].ty is None:
            return params[0].name
        parts = [p.name if p.ty is None else f"{p.name}:{self.show_type(p.ty)}" for p in params]
        return "(" + ", ".join(parts) + ")"

    def node(self, e, tail: bool) -> str:
        pp = self.pp
        if isinstance(e, IntLit):
            return str(e.value)
        if isinstance(e, FloatLit):
            return format_float(e.value)
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, UnitLit):
            return "()"
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Lam):
            return f"fun {self.params(e.params)} -> {pp(e.body)}"
        if isinstance(e, App):
            return " ".join([pp(e.fn, POSTFIX, False)] + [pp(a, POSTFIX, False) for a in e.args])
        if isinstance(e, PrimOp):
            return " ".join([e.op] + [pp(a, POSTFIX, False) for a in e.args])
        if isinstance(e, BinOp):
            lvl = OP_LEVEL[e.op]
            right_need = lvl + 1
            left_need = lvl + 1 if lvl == CMP else lvl
            return f"{pp(e.lhs, left_need, False)} {e.op} {pp(e.rhs, right_need, tail)}"
        if isinstance(e, If):
            return f"if {pp(e.cond)} then {pp(e.then)} else {pp(e.orelse, ASCR, tail)}"
        if isinstance(e, Loop):
            return f"loop {e.var} = {pp(e.lo)} to {pp(e.hi)} do {pp(e.body)} done"
        if isinstance(e, (Let, LetRec)):
            kw = "let rec" if isinstance(e, LetRec) else "let"
            ann = "" if e.ty is None else f" : {self.show_type(e.ty)}"
            return f"{kw} {e.name}{ann} = {pp(e.bound)} in {pp(e.body)}"
        if isinstance(e, MkRef):
            return f"ref {pp(e.init, POSTFIX, False)}"
        if isinstance(e, Deref):
            return f"!{pp(e.ref, UNARY, tail)}"
        if isinstance(e, Assign):
            return f"{pp(e.ref, OR, False)} := {pp(e.value, OR, tail)}"
        if isinstance(e, MkVec):
            return f"vector {pp(e.size, POSTFIX, False)} {pp(e.init, POSTFIX, False)}"
        if isinstance(e, VecGet):
            return f"{pp(e.vec, POSTFIX, False)}.[{pp(e.index)}]"
        if isinstance(e, VecSet):
            return f"{pp(e.vec, POSTFIX, False)}.[{pp(e.index)}] <- {pp(e.value, OR, tail)}"
        if isinstance(e, MkTuple):
            return "(" + ", ".join(pp(x) for x in e.items) + ")"
        if isinstance(e, Proj):
            return f"#{e.index} {pp(e.tup, POSTFIX, False)}"
        if isinstance(e, Construct):
            if not e.args:
                return e.ctor
            return e.ctor + " (" + ", ".join(pp(a) for a in e.args) + ")"
        if isinstance(e, Match):
            arms = []
            for k, arm in enumerate(e.arms):
                last = k == len(e.arms) - 1
                pat = arm.ctor + (" (" + ", ".join(arm.vars) + ")" if arm.vars else "")
                body = arm.body
                if isinstance(body, Match) or not last:
                    text = pp(body, SEQ, False) if not isinstance(body, Match) else "(" + self.node(body, True) + ")"
                else:
                    text = pp(body)
                arms.append(f"| {pat} -> {text}")
            return f"match {pp(e.scrutinee)} with " + " ".join(arms)
        if isinstance(e, Ascription):
            return f"{pp(e.expr, ASCR, False)} :: {self.show_type(e.ty)}"
        if isinstance(e, Seq):
            return f"{pp(e.first, ASCR, False)}; {pp(e.second, SEQ, tail)}"
        raise TypeError(f"cannot print {type(e).__name__}")


def _show_field(t: GradualType) -> str:
    s = show_type(t)
    return f"({s})" if isinstance(t, (Tuple, Fun)) else s


def pretty(node) -> str:
    """Source text for a program, declaration or expression."""
    if isinstance(node, Program):
        lines = [pretty(d) for d in node.decls]
        lines.append(Printer().pp(node.main))
        return "\n".join(lines) + "\n"
    if isinstance(node, VariantDecl):
        ctors = []
        for c in node.ctors:
            ctors.append(c.name + (" of " + " * ".join(_show_field(f) for f in c.fields) if c.fields else ""))
        return f"type {node.name} = " + " | ".join(ctors)
    if isinstance(node, GradualType):
        return show_type(node)
    return Printer().pp(node)


# --------------------------------------------------------- annotation sites


def map_annotations(program: Program, fn) -> Program:
    """Rebuild `program` with every annotation position passed through `fn`.

    `fn(site_id, kind, ty)` receives sites numbered in a fixed traversal
    order (declarations first, then the main expression in pre-order);
    `ty` is None for an absent binder annotation. Kinds are ``field``,
    ``param``, ``let``, ``letrec`` and ``ascription``.
    """
    counter = iter(range(1 << 62))

    def site(kind, ty):
        return fn(next(counter), kind, ty)

    decls = tuple(
        replace(d, ctors=tuple(
            replace(c, fields=tuple(site("field", t) for t in c.fields)) for c in d.ctors
        ))
        for d in program.decls
    )

    def walk(node):
        updates = {}
        if isinstance(node, Param):
            return replace(node, ty=site("param", node.ty))
        if isinstance(node, (Let, LetRec)):
            updates["ty"] = site("let" if isinstance(node, Let) else "letrec", node.ty)
        elif isinstance(node, Ascription):
            updates["ty"] = site("ascription", node.ty)
        for f in fields(node):
            if f.name in ("span", "ty_span", "ty"):
                continue
            v = getattr(node, f.name)
            if isinstance(v, tuple):
                updates[f.name] = tuple(walk(x) if isinstance(x, (Expr, Param, Arm)) else x for x in v)
            elif isinstance(v, (Expr, Arm)):
                updates[f.name] = walk(v)
        return replace(node, **updates)

    return replace(program, decls=decls, main=walk(program.main))


def annotation_sites(program: Program) -> list:
    """List of (site id, kind, type-or-None) in `map_annotations` order."""
    sites = []
    map_annotations(program, lambda i, kind, ty: sites.append((i, kind, ty)) or ty)
    return sites


def erase_annotations(program: Program) -> Program:
    """Replace every annotation, present or absent, by `?`."""
    return map_annotations(program, lambda i, kind, ty: DYN)


__all__ = [
    "Span", "Token", "LexError", "ParseError", "tokenize", "parse_program", "parse_expr",
    "parse_type", "pretty", "Printer", "map_annotations", "annotation_sites", "erase_annotations",
]
