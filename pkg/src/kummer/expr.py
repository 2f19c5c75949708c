"""Expression language for positive sequences indexed by ``n``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := postfix ('^' postfix)?
    postfix:= atom '!'*
    atom   := number | 'n' | 'pi' | fn '(' expr ')' | '(' expr ')'
    fn     := 'ln' | 'exp' | 'sqrt'

``^`` binds tighter than unary minus, so ``-n^2`` is ``-(n^2)``.  The
exponent of ``^`` is a single atom: write ``2^(-n)``, not ``2^-n``.
Decimal literals are kept as exact :class:`~fractions.Fraction` values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "ArityError",
    "ExprSyntaxError",
    "Node",
    "UnknownIdentifierError",
    "BINARY_KINDS",
    "FUNCTION_KINDS",
    "const",
    "depth",
    "free_of_n",
    "parse",
    "substitute",
    "to_text",
]

BINARY_KINDS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
FUNCTION_KINDS = ("ln", "exp", "sqrt")
LEAF_KINDS = ("const", "n", "pi")
UNARY_KINDS = ("neg", "fact") + FUNCTION_KINDS

_ARITY = {**{k: 0 for k in LEAF_KINDS}, **{k: 1 for k in UNARY_KINDS}, **{k: 2 for k in BINARY_KINDS}}


class ExprSyntaxError(ValueError):
    """Raised for malformed expression text; ``offset`` is a 0-based byte offset."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


def _is_decimal(value: Fraction) -> bool:
    d = value.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


@dataclass(frozen=True, eq=True)
class Node:
    """One AST node.  ``span`` is ignored by equality and hashing."""

    kind: str
    children: tuple["Node", ...] = ()
    value: Fraction | None = None
    span: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in _ARITY:
            raise ValueError(f"unknown node kind {self.kind!r}")
        if len(self.children) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {_ARITY[self.kind]} children, got {len(self.children)}")
        if self.kind == "const":
            if not isinstance(self.value, Fraction) or self.value < 0 or not _is_decimal(self.value):
                raise ValueError(f"constant must be a non-negative terminating decimal, got {self.value!r}")
        object.__setattr__(self, "_hash", hash((self.kind, self.children, self.value)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return to_text(self)

    # Small construction helpers, mostly for tests and programmatic use.
    def __add__(self, other: "Node") -> "Node":
        return Node("add", (self, other))

    def __sub__(self, other: "Node") -> "Node":
        return Node("sub", (self, other))

    def __mul__(self, other: "Node") -> "Node":
        return Node("mul", (self, other))

    def __truediv__(self, other: "Node") -> "Node":
        return Node("div", (self, other))

    def __pow__(self, other: "Node") -> "Node":
        return Node("pow", (self, other))


N = Node("n")


def const(value: int | str | Fraction) -> Node:
    return Node("const", value=Fraction(value))


def depth(node: Node) -> int:
    return 1 + max((depth(c) for c in node.children), default=0)


def free_of_n(node: Node) -> bool:
    if node.kind == "n":
        return False
    return all(free_of_n(c) for c in node.children)


def substitute(node: Node, replacement: Node) -> Node:
    """Replace every occurrence of ``n`` by ``replacement``."""
    if node.kind == "n":
        return replacement
    if not node.children:
        return node
    return Node(node.kind, tuple(substitute(c, replacement) for c in node.children), node.value)


# ----------------------------------------------------------------------
# printing
# ----------------------------------------------------------------------


def _format_const(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    k = 1
    while 10**k % value.denominator:
        k += 1
    digits = str(value.numerator * (10**k // value.denominator)).rjust(k + 1, "0")
    return f"{digits[:-k]}.{digits[-k:]}"


def to_text(node: Node) -> str:
    """Canonical, fully parenthesised text.  ``parse(to_text(a)) == a``."""
    kind = node.kind
    if kind == "const":
        return _format_const(node.value)
    if kind in ("n", "pi"):
        return kind
    if kind == "neg":
        return f"(-{to_text(node.children[0])})"
    if kind == "fact":
        return f"({to_text(node.children[0])}!)"
    if kind in FUNCTION_KINDS:
        return f"{kind}({to_text(node.children[0])})"
    left, right = node.children
    return f"({to_text(left)}{BINARY_KINDS[kind]}{to_text(right)})"


# ----------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()!,]))"
)


@dataclass
class _Tok:
    kind: str  # num | ident | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _error(self, message: str, cls=ExprSyntaxError):
        raise cls(message, self.tok.pos, self.text)

    def _take(self, op: str) -> _Tok:
        if self.tok.kind == "op" and self.tok.text == op:
            t = self.tok
            self.i += 1
            return t
        found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
        self._error(f"expected {op!r}, found {found}")

    def _at(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self._error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._at("+", "-"):
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            node = Node("add" if op == "+" else "sub", (node, rhs), span=(node.span[0], rhs.span[1]))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self._at("*", "/"):
            op = self.tok.text
            self.i += 1
            rhs = self.unary()
            node = Node("mul" if op == "*" else "div", (node, rhs), span=(node.span[0], rhs.span[1]))
        return node

    def unary(self) -> Node:
        if self._at("-"):
            start = self.tok.pos
            self.i += 1
            inner = self.unary()
            return Node("neg", (inner,), span=(start, inner.span[1]))
        return self.power()

    def power(self) -> Node:
        base = self.postfix()
        if self._at("^"):
            self.i += 1
            if self._at("-"):
                self._error("exponent must be an atom; parenthesise negative exponents")
            exponent = self.postfix()
            if self._at("^"):
                self._error("chained '^' is ambiguous; parenthesise the exponent")
            return Node("pow", (base, exponent), span=(base.span[0], exponent.span[1]))
        return base

    def postfix(self) -> Node:
        node = self.atom()
        while self._at("!"):
            end = self.tok.pos + 1
            self.i += 1
            node = Node("fact", (node,), span=(node.span[0], end))
        return node

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Node("const", value=Fraction(tok.text), span=(tok.pos, tok.pos + len(tok.text)))
        if tok.kind == "ident":
            name = tok.text
            if name in ("n", "pi"):
                self.i += 1
                return Node(name, span=(tok.pos, tok.pos + len(name)))
            if name not in FUNCTION_KINDS:
                self._error(f"unknown identifier {name!r}", UnknownIdentifierError)
            self.i += 1
            if not self._at("("):
                self._error(f"expected '(' after {name}")
            self.i += 1
            arg = self.expr()
            if self._at(","):
                self._error(f"{name} takes exactly one argument", ArityError)
            close = self._take(")")
            return Node(name, (arg,), span=(tok.pos, close.pos + 1))
        if self._at("("):
            self.i += 1
            inner = self.expr()
            close = self._take(")")
            return Node(inner.kind, inner.children, inner.value, span=(tok.pos, close.pos + 1))
        if tok.kind == "end":
            self._error("unexpected end of input")
        self._error(f"unexpected {tok.text!r}")


def parse(text: str) -> Node:
    """Parse sequence-expression text into a :class:`Node` tree."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text)
    return _Parser(text).parse()
