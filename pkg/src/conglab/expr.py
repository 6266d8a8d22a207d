"""Small expression language over coordinate variables.

Expressions are immutable trees (in practice DAGs, since derived expressions
share subterms).  They support exact partial differentiation, vectorised
evaluation with numpy, and printing back to the source grammar::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

with FUNC one of sin, cos, exp, log, sqrt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at byte offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(sorted(expected))})"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        self.identifier = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvalError(ArithmeticError):
    """Evaluation hit a singular subexpression.

    ``kind`` is ``"division by zero"`` or ``"domain"``; ``node`` names the
    offending node type; ``where`` holds flat indices of the bad entries when
    the evaluation was vectorised (empty for scalar evaluation).
    """

    def __init__(self, kind: str, node: str, where: np.ndarray | None = None):
        self.kind = kind
        self.node = node
        self.where = np.zeros(0, dtype=int) if where is None else where
        super().__init__(f"{kind} in {node} node")


# ---------------------------------------------------------------------------
# nodes


class Expr:
    __slots__ = ("free", "_deriv")

    free: frozenset[int]

    def children(self) -> tuple[Expr, ...]:
        return ()

    def __add__(self, other):
        return add(self, const(other))

    def __radd__(self, other):
        return add(const(other), self)

    def __sub__(self, other):
        return sub(self, const(other))

    def __rsub__(self, other):
        return sub(const(other), self)

    def __mul__(self, other):
        return mul(self, const(other))

    def __rmul__(self, other):
        return mul(const(other), self)

    def __truediv__(self, other):
        return div(self, const(other))

    def __rtruediv__(self, other):
        return div(const(other), self)

    def __pow__(self, other):
        return power(self, const(other))

    def __neg__(self):
        return neg(self)

    def __str__(self) -> str:
        return to_string(self)

    def __repr__(self) -> str:
        return f"Expr({to_string(self)!r})"


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self.free = frozenset()
        self._deriv = {}


class Var(Expr):
    __slots__ = ("index", "name")

    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name
        self.free = frozenset((index,))
        self._deriv = {}


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self.free = arg.free
        self._deriv = {}

    def children(self):
        return (self.arg,)


class BinOp(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        self.op = op
        self.left = left
        self.right = right
        self.free = left.free | right.free
        self._deriv = {}

    def children(self):
        return (self.left, self.right)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        self.name = name
        self.arg = arg
        self.free = arg.free
        self._deriv = {}

    def children(self):
        return (self.arg,)


ZERO = Num(0.0)
ONE = Num(1.0)


def const(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Num(float(x))


def _num(e: Expr) -> float | None:
    return e.value if isinstance(e, Num) else None


# smart constructors: fold literal arithmetic and the 0/1 identities only

def add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0.0:
        return Num(va / vb)
    if va == 0.0 and vb != 0.0:
        return ZERO
    if vb == 1.0:
        return a
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        if va > 0 or (float(vb).is_integer() and (va != 0 or vb >= 0)):
            return Num(va**vb)
    if vb == 0.0:
        return ONE
    if vb == 1.0:
        return a
    return BinOp("^", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    v = _num(a)
    if v is not None:
        try:
            return Num(_SCALAR_FUNCS[name](v))
        except (ValueError, OverflowError):
            pass
    return Func(name, a)


def sin(a) -> Expr:
    return func("sin", const(a))


def cos(a) -> Expr:
    return func("cos", const(a))


def exp(a) -> Expr:
    return func("exp", const(a))


def log(a) -> Expr:
    return func("log", const(a))


def sqrt(a) -> Expr:
    return func("sqrt", const(a))


_SCALAR_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log, "sqrt": math.sqrt}


def variables(names: Sequence[str]) -> tuple[Var, ...]:
    return tuple(Var(i, name) for i, name in enumerate(names))


# ---------------------------------------------------------------------------
# traversal


def _postorder(root: Expr, skip=None) -> Iterator[Expr]:
    """Unique nodes of the DAG, children before parents.

    ``skip(node)`` prunes a node (and its subtree) from the walk.
    """
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            yield node
            continue
        if skip is not None and skip(node):
            seen.add(id(node))
            continue
        stack.append((node, True))
        for child in reversed(node.children()):
            if id(child) not in seen:
                stack.append((child, False))


def node_count(e: Expr) -> int:
    return sum(1 for _ in _postorder(e))


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, axis: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``axis``.

    Results are cached on the nodes, so repeated and shared derivatives are
    cheap.  The cache is a plain dict keyed by axis; concurrent writers can at
    worst compute the same derivative twice.
    """
    if axis not in e.free:
        return ZERO
    hit = e._deriv.get(axis)
    if hit is not None:
        return hit

    def skip(node):
        return axis not in node.free or axis in node._deriv

    for node in _postorder(e, skip):
        node._deriv[axis] = _derivative_rule(node, axis)
    return e._deriv[axis]


def _d(node: Expr, axis: int) -> Expr:
    if axis not in node.free:
        return ZERO
    return node._deriv[axis]


def _derivative_rule(node: Expr, axis: int) -> Expr:
    if isinstance(node, Var):
        return ONE if node.index == axis else ZERO
    if isinstance(node, Neg):
        return neg(_d(node.arg, axis))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a, axis), _d(b, axis)
        op = node.op
        if op == "+":
            return add(da, db)
        if op == "-":
            return sub(da, db)
        if op == "*":
            return add(mul(da, b), mul(a, db))
        if op == "/":
            return sub(div(da, b), div(mul(a, db), mul(b, b)))
        if op == "^":
            if axis not in b.free:
                return mul(mul(b, power(a, sub(b, ONE))), da)
            return mul(node, add(mul(db, func("log", a)), div(mul(b, da), a)))
    if isinstance(node, Func):
        x = node.arg
        dx = _d(x, axis)
        name = node.name
        if name == "sin":
            return mul(func("cos", x), dx)
        if name == "cos":
            return neg(mul(func("sin", x), dx))
        if name == "exp":
            return mul(node, dx)
        if name == "log":
            return div(dx, x)
        if name == "sqrt":
            return div(dx, mul(Num(2.0), node))
    raise TypeError(f"cannot differentiate {type(node).__name__}")


def gradient(e: Expr, n: int) -> tuple[Expr, ...]:
    return tuple(differentiate(e, k) for k in range(n))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, point):
    """Evaluate at a point.

    ``point`` is a sequence of coordinates; each entry may be a float or a
    numpy array (all broadcastable together), in which case the result is an
    array.  Singular subexpressions raise :class:`EvalError`.
    """
    coords = [np.asarray(p, dtype=float) for p in point]
    scalar = all(c.ndim == 0 for c in coords)
    values: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for node in _postorder(e):
            values[id(node)] = _eval_node(node, values, coords)
    out = values[id(e)]
    if scalar:
        return float(out)
    shape = np.broadcast_shapes(*(c.shape for c in coords))
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def _bad(mask) -> np.ndarray:
    return np.flatnonzero(np.atleast_1d(mask))


def _eval_node(node, values, coords):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.index >= len(coords):
            raise EvalError("domain", "variable")
        return coords[node.index]
    if isinstance(node, Neg):
        return -values[id(node.arg)]
    if isinstance(node, BinOp):
        a = values[id(node.left)]
        b = values[id(node.right)]
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            zero = np.asarray(b) == 0
            if np.any(zero):
                raise EvalError("division by zero", "division", _bad(zero))
            return a / b
        # power
        a_arr = np.asarray(a, dtype=float)
        if isinstance(node.right, Num) and node.right.value.is_integer():
            k = node.right.value
            if k < 0 and np.any(a_arr == 0):
                raise EvalError("division by zero", "power", _bad(a_arr == 0))
            return a_arr ** k
        b_arr = np.asarray(b, dtype=float)
        neg_base = (a_arr < 0) & ~np.equal(np.mod(b_arr, 1.0), 0.0)
        if np.any(neg_base):
            raise EvalError("domain", "power", _bad(neg_base))
        zero_neg = (a_arr == 0) & (b_arr < 0)
        if np.any(zero_neg):
            raise EvalError("division by zero", "power", _bad(zero_neg))
        return a_arr ** b_arr
    if isinstance(node, Func):
        x = np.asarray(values[id(node.arg)], dtype=float)
        name = node.name
        if name == "log":
            bad = x <= 0
            if np.any(bad):
                raise EvalError("domain", "log", _bad(bad))
            return np.log(x)
        if name == "sqrt":
            bad = x < 0
            if np.any(bad):
                raise EvalError("domain", "sqrt", _bad(bad))
            return np.sqrt(x)
        return getattr(np, name)(x)
    raise TypeError(f"cannot evaluate {type(node).__name__}")


def evaluate_many(exprs: Sequence[Expr], point) -> np.ndarray:
    """Evaluate several expressions at the same point(s); stacks on axis 0."""
    return np.stack([np.asarray(evaluate(e, point), dtype=float) for e in exprs])


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY = 3
_ATOM = 5


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, Num):
        return _UNARY if e.value < 0 else _ATOM
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, BinOp):
        return _PREC[e.op]
    return _ATOM


def to_string(e: Expr) -> str:
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _prec(e.arg) >= _UNARY)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if e.op == "^":
            left = _wrap(e.left, _prec(e.left) >= _ATOM)
            right = _wrap(e.right, _prec(e.right) >= _UNARY)
            return f"{left}^{right}"
        left = _wrap(e.left, _prec(e.left) >= p)
        right = _wrap(e.right, _prec(e.right) > p)
        sep = f" {e.op} " if p == 1 else e.op
        return f"{left}{sep}{right}"
    raise TypeError(type(e).__name__)


def _wrap(e: Expr, bare: bool) -> str:
    s = to_string(e)
    return s if bare else f"({s})"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)

_ATOM_START = frozenset({"number", "identifier", "function", "'('", "'-'"})


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    byte_of = lambda i: len(source[:i].encode("utf-8"))
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            toks.append(_Tok("end", "", byte_of(pos)))
            return toks
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", byte_of(pos), _ATOM_START)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), byte_of(m.start(kind))))
        pos = m.end()


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.toks = _tokenize(source)
        self.i = 0
        self.vars = {name: Var(k, name) for k, name in enumerate(coords)}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _is_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def fail(self, expected: frozenset[str]):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.offset, expected)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail(frozenset({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"}))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self._is_op("+", "-"):
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            e = BinOp(op, e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self._is_op("*", "/"):
            op = self.tok.text
            self.i += 1
            rhs = self.unary()
            e = BinOp(op, e, rhs)
        return e

    def unary(self) -> Expr:
        if self._is_op("-"):
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._is_op("^"):
            self.i += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name":
            if t.text in FUNCTIONS:
                self.i += 1
                if not self._is_op("("):
                    self.fail(frozenset({"'('"}))
                self.i += 1
                arg = self.expr()
                if not self._is_op(")"):
                    self.fail(frozenset({"')'", "'+'", "'-'", "'*'", "'/'", "'^'"}))
                self.i += 1
                return Func(t.text, arg)
            var = self.vars.get(t.text)
            if var is None:
                raise UnknownIdentifierError(t.text, t.offset)
            self.i += 1
            return var
        if self._is_op("("):
            self.i += 1
            e = self.expr()
            if not self._is_op(")"):
                self.fail(frozenset({"')'", "'+'", "'-'", "'*'", "'/'", "'^'"}))
            self.i += 1
            return e
        self.fail(_ATOM_START)


def parse(source: str, coords: Sequence[str]) -> Expr:
    """Parse ``source`` against the coordinate names ``coords``.

    The returned tree is exactly the parse (no folding), so printing it gives
    back the input up to whitespace and redundant parentheses.
    """
    for name in coords:
        if name in FUNCTIONS:
            raise ValueError(f"coordinate name {name!r} shadows a function")
    try:
        return _Parser(source, coords).parse()
    except RecursionError:
        raise ParseError("expression nested too deeply", 0) from None


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    """Rectangular tensor grid; ``points[k]`` samples on axis ``k``."""

    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mins", tuple(float(x) for x in self.mins))
        object.__setattr__(self, "maxs", tuple(float(x) for x in self.maxs))
        object.__setattr__(self, "points", tuple(int(x) for x in self.points))
        if not (len(self.mins) == len(self.maxs) == len(self.points)):
            raise ValueError("grid axes disagree in length")
        for k, (lo, hi, m) in enumerate(zip(self.mins, self.maxs, self.points)):
            if m < 3:
                raise ValueError(f"grid axis {k} needs at least 3 points, got {m}")
            if not lo < hi:
                raise ValueError(f"grid axis {k}: min {lo} must be < max {hi}")

    @classmethod
    def box(cls, bounds: Sequence[tuple[float, float]], points: int | Sequence[int]) -> Grid:
        if isinstance(points, int):
            points = [points] * len(bounds)
        return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds), tuple(points))

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, m) for lo, hi, m in zip(self.mins, self.maxs, self.points)]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (m - 1) for lo, hi, m in zip(self.mins, self.maxs, self.points))

    @property
    def diameter(self) -> float:
        return float(np.hypot.reduce(np.subtract(self.maxs, self.mins)))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def flat_points(self) -> np.ndarray:
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    @property
    def center_index(self) -> tuple[int, ...]:
        return tuple(m // 2 for m in self.points)

    def point(self, index: Sequence[int]) -> tuple[float, ...]:
        return tuple(float(ax[i]) for ax, i in zip(self.axes(), index))

    def random_points(self, count: int, seed: int = 0, margin: float = 0.0) -> np.ndarray:
        """Uniform samples inside the box, shape ``(count, ndim)``."""
        rng = np.random.default_rng(seed)
        lo = np.array(self.mins) + margin * (np.array(self.maxs) - np.array(self.mins))
        hi = np.array(self.maxs) - margin * (np.array(self.maxs) - np.array(self.mins))
        return rng.uniform(lo, hi, size=(count, self.ndim))

    def locate(self, flat_index) -> list[tuple[float, ...]]:
        """Coordinates of grid points given flat indices."""
        axes = self.axes()
        out = []
        for f in np.atleast_1d(flat_index):
            idx = np.unravel_index(int(f), self.shape)
            out.append(tuple(float(axes[k][i]) for k, i in enumerate(idx)))
        return out
