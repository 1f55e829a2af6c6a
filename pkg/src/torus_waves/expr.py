"""Tiny expression language for potentials and forcings on the torus.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Recognized names: constants ``pi`` and ``i``, variables ``x1`` and ``x2``,
functions ``sin cos exp sqrt abs``. Numbers may carry an ``i``/``j`` suffix to
denote an imaginary literal (``2.5i``).

Evaluation is vectorized over numpy arrays; the scalar :func:`evaluate` is the
same code path on 0-d arrays, so :func:`sample` agrees with pointwise
evaluation exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import TorusWavesError
from .spectral_grid import Grid, GridField

CONSTANTS = {"pi": np.pi, "i": 1j}
VARIABLES = ("x1", "x2")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")


class ParseError(TorusWavesError, ValueError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at byte {offset}")


class UnknownIdentifier(ParseError):
    def __init__(self, name, offset):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvalError(TorusWavesError, ArithmeticError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its source text."""

    root: Node
    text: str = ""

    def __call__(self, x1, x2):
        return evaluate_array(self, x1, x2)

    def __str__(self):
        return to_text(self)

    @property
    def is_real(self) -> bool:
        """True if no imaginary constant or literal occurs in the tree."""
        return _is_real(self.root)


# --- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?P<imag>[ij](?![A-Za-z0-9_]))?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str):
    tokens = []
    pos = 0
    # offsets are reported in UTF-8 bytes
    byte_at = lambda p: len(text[:p].encode("utf-8"))
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", byte_at(pos))
        if m.group("num") is not None:
            kind = "num"
        elif m.group("name") is not None:
            kind = "name"
        else:
            kind = "op"
        start = m.start(kind)
        tokens.append(_Tok(kind, m.group(kind), byte_at(start)))
        pos = m.end()
    tokens.append(_Tok("end", "", byte_at(len(text))))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text, what):
        if self.tok.text != text or self.tok.kind != "op":
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {what}, found {found!r}", self.tok.offset)
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"expected operator or end of input, found {self.tok.text!r}",
                             self.tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            if tok.text[-1] in "ij":
                return Num(complex(0.0, float(tok.text[:-1])))
            return Num(complex(float(tok.text)))
        if tok.kind == "name":
            self.advance()
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(", f"'(' after {name}")
                arg = self.expr()
                self.expect(")", "')'")
                return Call(name, arg)
            if name in CONSTANTS:
                return Const(name)
            if name in VARIABLES:
                return Var(name)
            raise UnknownIdentifier(name, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")", "')'")
            return node
        found = tok.text or "end of input"
        raise ParseError(f"expected number, name or '(', found {found!r}", tok.offset)


def parse(text: str) -> Expression:
    return Expression(_Parser(text).parse(), text)


# --- printing --------------------------------------------------------------

def _num_text(value: complex) -> str:
    if value.imag == 0:
        return repr(float(value.real))
    if value.real == 0:
        return f"{float(value.imag)!r}i"
    return f"({float(value.real)!r} + {float(value.imag)!r}i)"


def _node_text(node: Node) -> str:
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_node_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_node_text(node.left)} {node.op} {_node_text(node.right)})"
    return f"{node.func}({_node_text(node.arg)})"


def to_text(e: Expression) -> str:
    """Canonical, fully parenthesized rendering; ``parse(to_text(e))`` reproduces the tree."""
    return _node_text(e.root)


# --- evaluation ------------------------------------------------------------

def _is_real(node: Node) -> bool:
    if isinstance(node, Num):
        return node.value.imag == 0
    if isinstance(node, Const):
        return node.name != "i"
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _is_real(node.operand)
    if isinstance(node, BinOp):
        return _is_real(node.left) and _is_real(node.right)
    return _is_real(node.arg)


def _power(base, expo):
    if not (np.iscomplexobj(base) or np.iscomplexobj(expo)):
        integral = np.all(expo == np.round(expo))
        if integral or np.all(base >= 0):
            if np.any((base == 0) & (expo < 0)):
                raise EvalError("division by zero in power")
            return np.power(np.asarray(base, dtype=float), expo)
    base = np.asarray(base, dtype=complex)
    if np.any((base == 0) & (np.real(expo) < 0)):
        raise EvalError("division by zero in power")
    return np.power(base, expo)


def _eval(node: Node, env):
    if isinstance(node, Num):
        return node.value.real if node.value.imag == 0 else node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvalError("division by exact zero")
            return a / b
        return _power(a, b)
    arg = _eval(node.arg, env)
    if node.func == "sqrt":
        return np.emath.sqrt(arg) if not np.iscomplexobj(arg) else np.sqrt(arg)
    if node.func == "abs":
        return np.abs(arg)
    return getattr(np, node.func)(arg)


def evaluate_array(e: Expression, x1, x2) -> np.ndarray:
    """Evaluate on broadcastable coordinate arrays; always returns complex."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast(x1, x2).shape
    with np.errstate(all="ignore"):
        out = _eval(e.root, {"x1": x1, "x2": x2})
    return np.broadcast_to(np.asarray(out, dtype=complex), shape).copy()


def evaluate(e: Expression, x1: float, x2: float) -> complex:
    return complex(evaluate_array(e, x1, x2))


def sample(e: Expression, g: Grid) -> GridField:
    """Evaluate at every mesh node; entries with ``x1`` varying along rows."""
    X1, X2 = g.mesh
    return GridField(g, evaluate_array(e, X1, X2))


def as_expression(e) -> Expression:
    """Accept either an Expression or source text."""
    return e if isinstance(e, Expression) else parse(str(e))
