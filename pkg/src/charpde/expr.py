"""Arithmetic expressions over the variables ``x``, ``t``, ``u`` and ``s``.

Grammar (whitespace is insignificant)::

    expr    := expr ('+' | '-') expr | expr ('*' | '/') expr
             | '-' expr | expr '^' expr | atom
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
    NUMBER  := decimal or scientific literal, e.g. ``2``, ``0.5``, ``1e-3``
    VARIABLE:= x | t | u | s
    FUNC    := exp | log | sin | cos | tan | atan | sqrt | abs

Precedence, tightest first: ``^`` (right-associative), unary minus, ``* /``,
``+ -``.  So ``-t^2`` is ``-(t^2)`` and ``2^3^2`` is ``2^(3^2)``.

Expressions are parsed by a Pratt parser into immutable node trees.  They can
be evaluated directly (:func:`eval_expr`) or compiled to a plain Python
function (:func:`compile_expr`) for use inside integrator loops; both routes
perform the same floating-point operations in the same order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

VARIABLES = frozenset({"x", "t", "u", "s"})
FUNCTIONS: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "atan": math.atan,
    "sqrt": math.sqrt,
    "abs": math.fabs,
}


class ExprError(ValueError):
    """Base class for expression errors; ``offset`` is the source position."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


# -- nodes --------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: int = field(default=-1, compare=False, repr=False)


Expr = Union[Const, Var, Neg, Binary, Call]
ExprLike = Union[Expr, str, int, float]

ZERO = Const(0.0)
ONE = Const(1.0)


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


# -- Pratt parser -------------------------------------------------------------

_INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.advance()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr(0)
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self, rbp: int) -> Expr:
        left = self.nud(self.advance())
        while True:
            kind, text, pos = self.peek()
            bp = _INFIX_BP.get(text, 0) if kind == "op" else 0
            if bp <= rbp:
                return left
            self.advance()
            # right-associative power: parse the right side one level looser
            right = self.expr(bp - 1 if text == "^" else bp)
            left = Binary(text, left, right, pos)

    def nud(self, tok) -> Expr:
        kind, text, pos = tok
        if kind == "num":
            return Const(float(text), pos)
        if kind == "ident":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {text!r}", pos)
                self.advance()
                arg = self.expr(0)
                self.expect(")")
                return Call(text, arg, pos)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", pos)
            if text not in VARIABLES:
                raise UnknownVariable(f"unknown variable {text!r}", pos)
            return Var(text, pos)
        if text == "-":
            return Neg(self.expr(_UNARY_BP), pos)
        if text == "+":
            return self.expr(_UNARY_BP)
        if text == "(":
            inner = self.expr(0)
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an expression tree."""
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src).parse()


def as_expr(obj: ExprLike) -> Expr:
    """Coerce a string, number or tree into an expression tree."""
    if isinstance(obj, str):
        return parse_expr(obj)
    if isinstance(obj, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(obj, (int, float)):
        value = float(obj)
        return Neg(Const(-value)) if value < 0 else Const(value)
    if isinstance(obj, (Const, Var, Neg, Binary, Call)):
        return obj
    raise TypeError(f"cannot make an expression from {type(obj).__name__}")


# -- printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    return 5


def to_str(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses needed to re-parse it."""
    if isinstance(e, Const):
        v = float(e.value)
        text = str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        return f"({text})" if e.value < 0 or text in ("inf", "nan") else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_str(e.arg)})"
    if isinstance(e, Neg):
        inner = to_str(e.operand)
        return f"-({inner})" if _prec(e.operand) < 3 else f"-{inner}"
    p = _PREC[e.op]
    left, right = to_str(e.left), to_str(e.right)
    if _prec(e.left) < p or (e.op == "^" and _prec(e.left) <= p):
        left = f"({left})"
    if _prec(e.right) < p or (e.op != "^" and _prec(e.right) == p):
        right = f"({right})"
    return f"{left}{e.op}{right}" if e.op == "^" else f"{left} {e.op} {right}"


# -- structural helpers -------------------------------------------------------

def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg,)):
        return free_vars(e.operand)
    if isinstance(e, Call):
        return free_vars(e.arg)
    return free_vars(e.left) | free_vars(e.right)


def substitute(e: ExprLike, var: str, replacement: ExprLike) -> Expr:
    """Replace every occurrence of ``var`` in ``e`` by ``replacement``."""
    e, replacement = as_expr(e), as_expr(replacement)
    if var not in VARIABLES:
        raise UnknownVariable(f"unknown variable {var!r}")

    def walk(node: Expr) -> Expr:
        if isinstance(node, Var):
            return replacement if node.name == var else node
        if isinstance(node, Const):
            return node
        if isinstance(node, Neg):
            return Neg(walk(node.operand), node.pos)
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg), node.pos)
        return Binary(node.op, walk(node.left), walk(node.right), node.pos)

    return walk(e)


def is_zero(e: Expr) -> bool:
    """True when ``e`` is literally the constant zero."""
    return isinstance(e, Const) and e.value == 0.0


# -- evaluation ---------------------------------------------------------------

def _int_exponent(e: Expr) -> int | None:
    if isinstance(e, Const) and e.value.is_integer() and abs(e.value) <= 64:
        return int(e.value)
    return None


def _pow(base: float, exponent: float) -> float:
    if base < 0.0 and not float(exponent).is_integer():
        raise ValueError("negative base with non-integer exponent")
    return base ** exponent


def eval_expr(e: ExprLike, env: Mapping[str, float]) -> float:
    """Evaluate ``e`` in ``env``; unbound variables and domain errors raise."""
    e = as_expr(e)

    def ev(node: Expr) -> float:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            try:
                return env[node.name]
            except KeyError:
                raise UnboundVariable(
                    f"variable {node.name!r} is not bound", node.pos
                ) from None
        if isinstance(node, Neg):
            return -ev(node.operand)
        if isinstance(node, Call):
            arg = ev(node.arg)
            try:
                return FUNCTIONS[node.func](arg)
            except (ValueError, OverflowError) as exc:
                raise ExprDomainError(
                    f"{node.func}({arg!r}): {exc}", node.pos
                ) from None
        left = ev(node.left)
        n = _int_exponent(node.right) if node.op == "^" else None
        right = ev(node.right) if n is None else n
        try:
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                return left / right
            return left ** right if n is not None else _pow(left, right)
        except (ArithmeticError, ValueError) as exc:
            raise ExprDomainError(
                f"{left!r} {node.op} {right!r}: {exc}", node.pos
            ) from None

    return ev(e)


def _codegen(node: Expr) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_codegen(node.operand)})"
    if isinstance(node, Call):
        return f"_{node.func}({_codegen(node.arg)})"
    left = _codegen(node.left)
    if node.op == "^":
        n = _int_exponent(node.right)
        if n is not None:
            return f"({left} ** {n})"
        return f"_pow({left}, {_codegen(node.right)})"
    return f"({left} {node.op} {_codegen(node.right)})"


_NAMESPACE = {f"_{name}": fn for name, fn in FUNCTIONS.items()}
_NAMESPACE["_pow"] = _pow


class CompiledExpr:
    """An expression compiled to a Python function of positional arguments.

    Domain errors are re-raised as :class:`ExprDomainError` with the offending
    node's source offset, found by re-running the tree evaluator.
    """

    __slots__ = ("expr", "args", "_fn")

    def __init__(self, expr: ExprLike, args: tuple[str, ...]):
        self.expr = as_expr(expr)
        self.args = tuple(args)
        unbound = free_vars(self.expr) - set(self.args)
        if unbound:
            raise UnboundVariable(
                f"expression {to_str(self.expr)!r} uses {sorted(unbound)} "
                f"but only {list(self.args)} are available"
            )
        src = f"lambda {', '.join(self.args)}: {_codegen(self.expr)}"
        self._fn = eval(compile(src, "<expr>", "eval"), dict(_NAMESPACE))

    def __call__(self, *values: float) -> float:
        try:
            return self._fn(*values)
        except (ArithmeticError, ValueError):
            env = dict(zip(self.args, values))
            eval_expr(self.expr, env)
            raise

    def __repr__(self) -> str:
        return f"CompiledExpr({to_str(self.expr)!r}, args={self.args})"

    def __getstate__(self):
        return (self.expr, self.args)

    def __setstate__(self, state):
        self.__init__(*state)


def compile_expr(e: ExprLike, args: tuple[str, ...] = ("x", "t")) -> CompiledExpr:
    return CompiledExpr(e, args)
