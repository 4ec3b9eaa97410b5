"""Arithmetic expression trees over the phase variables x, u, p.

Small recursive-descent parser and evaluator used to define Hamiltonians,
potentials and rate functions from configuration text.  Grammar:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-'? atom
    atom   := number | 'pi' | 'x' | 'u' | 'p' | func '(' expr ')' | '(' expr ')'
    func   in {sin, cos, tan, exp, log, sqrt, abs}

Power is right associative, unary minus binds to the atom ("-2^2" is 4).
Trees support evaluation over floats or numpy arrays, symbolic
differentiation with respect to one variable, and serialization that
round-trips structurally through the parser.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "u", "p")
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")

_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class ExprSyntaxError(ValueError):
    """Malformed source text; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ExprNameError(ValueError):
    """Unknown identifier or wrong call arity."""


class ExprDomainError(ArithmeticError):
    """Evaluation left the real domain (log of a non-positive value, ...)."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


Expression = Num | Var | Pi | Neg | Bin | Call

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            off = len(source) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", off)
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, off = self.peek()
        if kind == "op" and value == text:
            self.advance()
            return
        raise ExprSyntaxError(f"expected {text!r}", off)

    def parse(self) -> Expression:
        node = self.expr()
        kind, value, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {value!r}", off)
        return node

    def expr(self) -> Expression:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = Bin(value, node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = Bin(value, node, self.factor())
            else:
                return node

    def factor(self) -> Expression:
        node = self.unary()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            node = Bin("^", node, self.factor())
        return node

    def unary(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self) -> Expression:
        kind, value, off = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value == "pi":
                return Pi()
            if value in VARIABLES:
                return Var(value)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            raise ExprNameError(f"unknown identifier {value!r} (offset {off})")
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected token {value!r}", off)


def parse_expression(source: str) -> Expression:
    """Parse source text into an expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source).parse()


def evaluate(node: Expression, **env: float | np.ndarray):
    """Evaluate a tree with variable bindings given as keyword arguments."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Pi):
        return math.pi
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprNameError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, **env)
    if isinstance(node, Bin):
        a = evaluate(node.left, **env)
        b = evaluate(node.right, **env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise ExprDomainError("division by zero")
            return a / b
        # power: real-valued only
        with np.errstate(invalid="ignore"):
            out = np.power(a, b)
        if np.any(~np.isfinite(np.asarray(out))) and np.all(np.isfinite(np.asarray(a))):
            raise ExprDomainError("power left the real domain")
        return out
    if isinstance(node, Call):
        v = evaluate(node.arg, **env)
        if node.func == "log" and np.any(np.asarray(v) <= 0.0):
            raise ExprDomainError("log of a non-positive value")
        if node.func == "sqrt" and np.any(np.asarray(v) < 0.0):
            raise ExprDomainError("sqrt of a negative value")
        return _NUMPY_FUNCS[node.func](v)
    raise TypeError(f"not an expression node: {node!r}")


def _pow_real(a: float, b: float) -> float:
    out = a ** b
    if isinstance(out, complex):
        raise ExprDomainError("power left the real domain")
    return out


def _div_real(a: float, b: float) -> float:
    if b == 0.0:
        raise ExprDomainError("division by zero")
    return a / b


_MATH_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt, "abs": abs,
}


def compile_fn(node: Expression):
    """Compile a tree into a closure f(x, u, p) over python floats.

    Roughly an order of magnitude faster than `evaluate` for scalar
    arguments; used in the orbit-integration hot path.  Domain failures
    raise ExprDomainError/ValueError like the interpreted path.
    """
    if isinstance(node, Num):
        v = node.value
        return lambda x, u, p: v
    if isinstance(node, Pi):
        return lambda x, u, p: math.pi
    if isinstance(node, Var):
        return {"x": lambda x, u, p: x,
                "u": lambda x, u, p: u,
                "p": lambda x, u, p: p}[node.name]
    if isinstance(node, Neg):
        f = compile_fn(node.arg)
        return lambda x, u, p: -f(x, u, p)
    if isinstance(node, Bin):
        a = compile_fn(node.left)
        b = compile_fn(node.right)
        if node.op == "+":
            return lambda x, u, p: a(x, u, p) + b(x, u, p)
        if node.op == "-":
            return lambda x, u, p: a(x, u, p) - b(x, u, p)
        if node.op == "*":
            return lambda x, u, p: a(x, u, p) * b(x, u, p)
        if node.op == "/":
            return lambda x, u, p: _div_real(a(x, u, p), b(x, u, p))
        if isinstance(node.right, Num) and node.right.value == 2.0:
            return lambda x, u, p: a(x, u, p) ** 2
        return lambda x, u, p: _pow_real(a(x, u, p), b(x, u, p))
    if isinstance(node, Call):
        f = compile_fn(node.arg)
        g = _MATH_FUNCS[node.func]
        return lambda x, u, p: g(f(x, u, p))
    raise TypeError(f"not an expression node: {node!r}")


def differentiate(node: Expression, var: str) -> Expression:
    """Symbolic derivative with respect to one of x, u, p."""
    if var not in VARIABLES:
        raise ExprNameError(f"cannot differentiate with respect to {var!r}")
    if isinstance(node, (Num, Pi)):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return Neg(differentiate(node.arg, var))
    if isinstance(node, Bin):
        a, b = node.left, node.right
        da, db = differentiate(a, var), differentiate(b, var)
        if node.op == "+":
            return Bin("+", da, db)
        if node.op == "-":
            return Bin("-", da, db)
        if node.op == "*":
            return Bin("+", Bin("*", da, b), Bin("*", a, db))
        if node.op == "/":
            num = Bin("-", Bin("*", da, b), Bin("*", a, db))
            return Bin("/", num, Bin("*", b, b))
        # a^b
        if isinstance(b, Num):
            power = Bin("^", a, Num(b.value - 1.0))
            return Bin("*", Bin("*", b, power), da)
        # general: a^b * (db*log(a) + b*da/a)
        logterm = Bin("*", db, Call("log", a))
        ratio = Bin("/", Bin("*", b, da), a)
        return Bin("*", node, Bin("+", logterm, ratio))
    if isinstance(node, Call):
        inner = differentiate(node.arg, var)
        v = node.arg
        if node.func == "sin":
            outer: Expression = Call("cos", v)
        elif node.func == "cos":
            outer = Neg(Call("sin", v))
        elif node.func == "tan":
            c = Call("cos", v)
            outer = Bin("/", Num(1.0), Bin("*", c, c))
        elif node.func == "exp":
            outer = Call("exp", v)
        elif node.func == "log":
            outer = Bin("/", Num(1.0), v)
        elif node.func == "sqrt":
            outer = Bin("/", Num(0.5), Call("sqrt", v))
        else:  # abs: derivative is the sign, expressed as v/abs(v)
            outer = Bin("/", v, Call("abs", v))
        return Bin("*", outer, inner)
    raise TypeError(f"not an expression node: {node!r}")


def serialize(node: Expression) -> str:
    """Render a tree back to parseable source (fully parenthesized)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{serialize(node.arg)})"
    if isinstance(node, Bin):
        return f"({serialize(node.left)}{node.op}{serialize(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({serialize(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node: Expression) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return free_variables(node.arg)
    if isinstance(node, Bin):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return set()
