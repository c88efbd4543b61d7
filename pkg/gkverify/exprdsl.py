"""Closed-form scalar expressions over the coordinates x1..xN.

Expressions are parsed once into an immutable tree and evaluated either as
plain floats or with dual numbers, which carry the exact first partials
alongside the value (forward-mode differentiation, no finite differencing).

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ['^' ['-' | '+'] integer]
    primary := number | 'x' digits | func '(' expr ')' | '(' expr ')'
    func    := sin | cos | exp | ln | sqrt
"""
import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
)

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")


class Dual:
    """A value together with its gradient with respect to x1..xN."""

    __slots__ = ("value", "grad")

    def __init__(self, value: float, grad: np.ndarray):
        self.value = value
        self.grad = grad

    @classmethod
    def constant(cls, value: float, dimension: int) -> "Dual":
        return cls(value, np.zeros(dimension))

    @classmethod
    def variable(cls, value: float, index: int, dimension: int) -> "Dual":
        grad = np.zeros(dimension)
        grad[index] = 1.0
        return cls(value, grad)

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.value + other.value, self.grad + other.grad)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.value - other.value, self.grad - other.grad)

    def __mul__(self, other: "Dual") -> "Dual":
        return Dual(self.value * other.value, self.value * other.grad + other.value * self.grad)

    def __truediv__(self, other: "Dual") -> "Dual":
        value = self.value / other.value
        return Dual(value, (self.grad - value * other.grad) / other.value)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.grad)

    def __pow__(self, exponent: int) -> "Dual":
        if exponent == 0:
            return Dual(1.0, np.zeros_like(self.grad))
        return Dual(self.value ** exponent, exponent * self.value ** (exponent - 1) * self.grad)

    def sin(self) -> "Dual":
        return Dual(math.sin(self.value), math.cos(self.value) * self.grad)

    def cos(self) -> "Dual":
        return Dual(math.cos(self.value), -math.sin(self.value) * self.grad)

    def exp(self) -> "Dual":
        value = math.exp(self.value)
        return Dual(value, value * self.grad)

    def ln(self) -> "Dual":
        return Dual(math.log(self.value), self.grad / self.value)

    def sqrt(self) -> "Dual":
        value = math.sqrt(self.value)
        return Dual(value, self.grad / (2.0 * value))


def _check_finite(value: float, node: "Node") -> float:
    if not math.isfinite(value):
        raise EvaluationDomainError("non-finite result", node.to_text())
    return value


class Node:
    def evaluate(self, x: Sequence[float]) -> float:
        raise NotImplementedError

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def variables(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Constant(Node):
    value: float

    def evaluate(self, x: Sequence[float]) -> float:
        return self.value

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        return Dual.constant(self.value, dimension)

    def to_text(self) -> str:
        text = repr(float(self.value))
        return f"({text})" if text.startswith("-") else text


@dataclass(frozen=True)
class Variable(Node):
    index: int  # 1-based

    def evaluate(self, x: Sequence[float]) -> float:
        return float(x[self.index - 1])

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        return Dual.variable(float(x[self.index - 1]), self.index - 1, dimension)

    def to_text(self) -> str:
        return f"x{self.index}"

    def variables(self) -> frozenset:
        return frozenset((self.index,))


@dataclass(frozen=True)
class Unary(Node):
    op: str  # "neg" or one of FUNCTIONS
    operand: Node

    def _check_domain(self, arg: float, with_gradient: bool) -> None:
        if self.op == "ln" and arg <= 0.0:
            raise EvaluationDomainError(f"ln of non-positive value {arg!r}", self.to_text())
        if self.op == "sqrt" and (arg < 0.0 or (with_gradient and arg == 0.0)):
            raise EvaluationDomainError(f"sqrt of {arg!r}", self.to_text())

    def evaluate(self, x: Sequence[float]) -> float:
        arg = self.operand.evaluate(x)
        if self.op == "neg":
            return -arg
        self._check_domain(arg, with_gradient=False)
        try:
            return _check_finite(_FLOAT_FUNCTIONS[self.op](arg), self)
        except OverflowError:
            raise EvaluationDomainError("overflow", self.to_text())

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        arg = self.operand.evaluate_dual(x, dimension)
        if self.op == "neg":
            return -arg
        self._check_domain(arg.value, with_gradient=True)
        try:
            result = _DUAL_FUNCTIONS[self.op](arg)
        except OverflowError:
            raise EvaluationDomainError("overflow", self.to_text())
        _check_finite(result.value, self)
        return result

    def to_text(self) -> str:
        if self.op == "neg":
            return f"(-{self.operand.to_text()})"
        return f"{self.op}({self.operand.to_text()})"

    def variables(self) -> frozenset:
        return self.operand.variables()


@dataclass(frozen=True)
class Binary(Node):
    op: str  # one of + - * /
    left: Node
    right: Node

    def evaluate(self, x: Sequence[float]) -> float:
        a = self.left.evaluate(x)
        b = self.right.evaluate(x)
        if self.op == "/" and b == 0.0:
            raise EvaluationDomainError("division by zero", self.to_text())
        return _check_finite(_FLOAT_BINARY[self.op](a, b), self)

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        a = self.left.evaluate_dual(x, dimension)
        b = self.right.evaluate_dual(x, dimension)
        if self.op == "/" and b.value == 0.0:
            raise EvaluationDomainError("division by zero", self.to_text())
        result = _DUAL_BINARY[self.op](a, b)
        _check_finite(result.value, self)
        return result

    def to_text(self) -> str:
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"

    def variables(self) -> frozenset:
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Power(Node):
    base: Node
    exponent: int

    def evaluate(self, x: Sequence[float]) -> float:
        value = self.base.evaluate(x)
        if value == 0.0 and self.exponent < 0:
            raise EvaluationDomainError("division by zero", self.to_text())
        try:
            return _check_finite(value ** self.exponent, self)
        except OverflowError:
            raise EvaluationDomainError("overflow", self.to_text())

    def evaluate_dual(self, x: Sequence[float], dimension: int) -> Dual:
        base = self.base.evaluate_dual(x, dimension)
        if base.value == 0.0 and self.exponent < 0:
            raise EvaluationDomainError("division by zero", self.to_text())
        try:
            result = base ** self.exponent
        except OverflowError:
            raise EvaluationDomainError("overflow", self.to_text())
        _check_finite(result.value, self)
        return result

    def to_text(self) -> str:
        base = self.base.to_text()
        if isinstance(self.base, Power):
            base = f"({base})"
        return f"{base}^{self.exponent}"

    def variables(self) -> frozenset:
        return self.base.variables()


_FLOAT_FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}

_DUAL_FUNCTIONS: Dict[str, Callable[[Dual], Dual]] = {
    "sin": Dual.sin,
    "cos": Dual.cos,
    "exp": Dual.exp,
    "ln": Dual.ln,
    "sqrt": Dual.sqrt,
}

_FLOAT_BINARY: Dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}

_DUAL_BINARY: Dict[str, Callable[[Dual, Dual], Dual]] = {
    "+": Dual.__add__,
    "-": Dual.__sub__,
    "*": Dual.__mul__,
    "/": Dual.__truediv__,
}


def as_point(coordinates: Sequence[float], dimension: int) -> np.ndarray:
    point = np.asarray(coordinates, dtype=float)
    if point.shape != (dimension,):
        raise DimensionError(f"point has shape {point.shape}, expected ({dimension},)")
    return point


class ExpressionTree:
    """An immutable parsed expression bound to a declared dimension."""

    def __init__(self, root: Node, dimension: int, source: Optional[str] = None):
        self.root = root
        self.dimension = dimension
        self.source = source

    @property
    def is_constant(self) -> bool:
        return not self.root.variables()

    @property
    def is_zero(self) -> bool:
        return isinstance(self.root, Constant) and self.root.value == 0.0

    def eval(self, point: Sequence[float]) -> float:
        x = as_point(point, self.dimension)
        return self.root.evaluate(x)

    def eval_with_gradient(self, point: Sequence[float]) -> Tuple[float, np.ndarray]:
        x = as_point(point, self.dimension)
        result = self.root.evaluate_dual(x, self.dimension)
        return result.value, result.grad

    def to_text(self) -> str:
        return self.root.to_text()

    def __str__(self) -> str:
        return self.source if self.source is not None else self.to_text()

    def __repr__(self) -> str:
        return f"ExpressionTree({self.to_text()!r}, dimension={self.dimension})"


def constant(value: float, dimension: int) -> ExpressionTree:
    return ExpressionTree(Constant(float(value)), dimension)


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_VARIABLE_RE = re.compile(r"x(\d+)")


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int  # byte offset into the UTF-8 source


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _byte_offset(self, char_offset: int) -> int:
        return len(self.text[:char_offset].encode("utf-8"))

    def _tokenize(self, text: str) -> List[_Token]:
        tokens = []
        i = 0
        while True:
            match = _TOKEN_RE.match(text, i)
            if match is None or match.end() == i:
                rest = text[i:]
                stripped = rest.lstrip()
                if not stripped:
                    break
                bad = i + (len(rest) - len(stripped))
                raise ExpressionSyntaxError(f"unexpected character {stripped[0]!r}", self._byte_offset(bad))
            kind = match.lastgroup
            tokens.append(_Token(kind, match.group(kind), self._byte_offset(match.start(kind))))
            i = match.end()
        tokens.append(_Token("end", "", self._byte_offset(len(text))))
        return tokens

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _accept(self, op: str) -> bool:
        if self.current.kind == "op" and self.current.text == op:
            self.pos += 1
            return True
        return False

    def _error(self, message: str) -> ExpressionSyntaxError:
        token = self.current
        found = "end of input" if token.kind == "end" else repr(token.text)
        return ExpressionSyntaxError(f"{message}, found {found}", token.offset)

    def parse(self) -> Node:
        node = self._expr()
        if self.current.kind != "end":
            raise self._error("unexpected token")
        return node

    def _expr(self) -> Node:
        node = self._term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = Binary(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = Binary(op, node, self._unary())
        return node

    def _unary(self) -> Node:
        if self._accept("-"):
            return Unary("neg", self._unary())
        return self._power()

    def _power(self) -> Node:
        base = self._primary()
        if not self._accept("^"):
            return base
        sign = 1
        if self._accept("-"):
            sign = -1
        else:
            self._accept("+")
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise self._error("exponent must be an integer literal")
        self._advance()
        return Power(base, sign * int(token.text))

    def _primary(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Constant(float(token.text))
        if token.kind == "ident":
            return self._identifier()
        if self._accept("("):
            node = self._expr()
            if not self._accept(")"):
                raise self._error("expected ')'")
            return node
        raise self._error("expected a number, variable, function or '('")

    def _identifier(self) -> Node:
        token = self._advance()
        match = _VARIABLE_RE.fullmatch(token.text)
        if match:
            index = int(match.group(1))
            if not 1 <= index <= self.dimension:
                raise VariableIndexError(
                    f"variable {token.text} outside x1..x{self.dimension}", token.offset
                )
            return Variable(index)
        if token.text in FUNCTIONS:
            if not self._accept("("):
                raise self._error(f"expected '(' after {token.text}")
            operand = self._expr()
            if not self._accept(")"):
                raise self._error("expected ')'")
            return Unary(token.text, operand)
        raise UnknownIdentifierError(f"unknown identifier {token.text!r}", token.offset)


def parse_expression(text: str, dimension: int) -> ExpressionTree:
    if dimension < 2:
        raise DimensionError(f"dimension must be at least 2, got {dimension}")
    root = _Parser(text, dimension).parse()
    return ExpressionTree(root, dimension, source=text)
