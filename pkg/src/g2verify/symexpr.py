"""Scalar expression trees with exact differentiation and vectorised evaluation.

Expressions are immutable trees.  Constructors do light constant folding and
flattening only; there is no general simplifier.  Identities are checked by
evaluating at random points.

Evaluation is vectorised: an assignment may bind names to numpy arrays and the
result is then an array of the broadcast shape.  All values are complex.
Multivalued functions (log, sqrt, fractional powers) are only defined on the
non-negative real axis, and ``lambertw`` on real arguments >= -1/e.
"""
from __future__ import annotations

import ast
import math
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

Number = Union[int, float, complex, Fraction]

CONST = "const"
CNAME = "cname"
VAR = "var"
ADD = "add"
MUL = "mul"
POW = "pow"
FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "sinh", "cosh", "lambertw")

_REAL_TOL = 1e-12


class DomainError(ValueError):
    """A node was evaluated outside its domain."""


class UnboundSymbolError(KeyError):
    """A free symbol has no value in the assignment."""


def _normalize_number(v: Number) -> Number:
    if isinstance(v, bool):
        v = int(v)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, complex):
        if v.imag == 0:
            return _normalize_number(v.real)
        return v
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v.is_integer():
            return Fraction(int(v))
        return v
    if isinstance(v, np.complexfloating):
        return _normalize_number(complex(v))
    if isinstance(v, np.integer):
        return Fraction(int(v))
    raise TypeError(f"not a number: {v!r}")


class _Key(tuple):
    """Structural key with a cached hash; keys nest, so hashing stays shallow."""

    def __hash__(self):
        h = self.__dict__.get("h")
        if h is None:
            h = self.__dict__["h"] = tuple.__hash__(self)
        return h


def _plain(d):
    if isinstance(d, Fraction):
        return ("q", d.numerator, d.denominator)
    if isinstance(d, complex):
        return ("c", d.real, d.imag)
    return d


class Expr:
    """Immutable expression node.

    ``op`` is one of the node kinds, ``args`` the children and ``data`` holds
    the payload: the value of a constant, the name of a symbol, or the exponent
    (a Fraction) of a power node.
    """

    __slots__ = ("op", "args", "data", "_key", "_dcache")

    def __init__(self, op: str, args: tuple = (), data=None):
        self.op = op
        self.args = args
        self.data = data
        self._key = None
        self._dcache = None

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __pow__(self, q):
        return power(self, q)

    # -- inspection -------------------------------------------------------
    @property
    def key(self) -> tuple:
        """Structural key; two trees are the same iff their keys are equal."""
        if self._key is None:
            if self.op in (CONST, CNAME, VAR):
                self._key = _Key((self.op, _plain(self.data)))
            else:
                self._key = _Key((self.op, _plain(self.data), tuple(a.key for a in self.args)))
        return self._key

    def is_const(self) -> bool:
        return self.op == CONST

    def is_zero(self) -> bool:
        return self.op == CONST and self.data == 0

    def __repr__(self) -> str:
        return f"Expr({to_string(self)})"

    def __str__(self) -> str:
        return to_string(self)

    def __bool__(self):
        raise TypeError("truth value of an Expr is ambiguous")

    __hash__ = object.__hash__


ExprLike = Union[Expr, Number]

ZERO = Expr(CONST, (), Fraction(0))
ONE = Expr(CONST, (), Fraction(1))


def as_expr(v: ExprLike) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


def const(v: Number) -> Expr:
    v = _normalize_number(v)
    if v == 0:
        return ZERO
    if v == 1:
        return ONE
    return Expr(CONST, (), v)


def var(name: str) -> Expr:
    """A coordinate (differentiable) symbol."""
    return Expr(VAR, (), name)


def cname(name: str) -> Expr:
    """A named constant: bound at evaluation time, derivative zero."""
    return Expr(CNAME, (), name)


def _fold(a: Number, b: Number, mul_op: bool) -> Number:
    return _normalize_number(a * b if mul_op else a + b)


def add(*terms: ExprLike) -> Expr:
    """Sum with constant folding; terms differing only by a constant factor
    are collected."""
    groups: dict[tuple, list] = {}
    total: Number = Fraction(0)
    stack = list(terms)
    stack.reverse()
    while stack:
        t = as_expr(stack.pop())
        if t.op == ADD:
            stack.extend(reversed(t.args))
        elif t.op == CONST:
            total = _fold(total, t.data, False)
        else:
            if t.op == MUL and t.args[0].op == CONST:
                c, rest = t.args[0].data, t.args[1:]
            elif t.op == MUL:
                c, rest = Fraction(1), t.args
            else:
                c, rest = Fraction(1), (t,)
            k = tuple(a.key for a in rest)
            slot = groups.get(k)
            if slot is None:
                groups[k] = [c, rest]
            else:
                slot[0] = _fold(slot[0], c, False)
    flat: list[Expr] = []
    for c, rest in groups.values():
        if c == 0:
            continue
        if c == 1:
            flat.append(rest[0] if len(rest) == 1 else Expr(MUL, rest))
        else:
            flat.append(Expr(MUL, (const(c),) + rest))
    if total != 0:
        flat.append(const(total))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Expr(ADD, tuple(flat))


def mul(*factors: ExprLike) -> Expr:
    """Product with constant folding; repeated bases are merged into powers."""
    groups: dict[tuple, list] = {}
    coeff: Number = Fraction(1)
    stack = list(factors)
    stack.reverse()
    while stack:
        t = as_expr(stack.pop())
        if t.op == MUL:
            stack.extend(reversed(t.args))
        elif t.op == CONST:
            coeff = _fold(coeff, t.data, True)
        else:
            base, q = (t.args[0], t.data) if t.op == POW else (t, Fraction(1))
            slot = groups.get(base.key)
            if slot is None:
                groups[base.key] = [base, q]
            else:
                slot[1] += q
    if coeff == 0:
        return ZERO
    flat: list[Expr] = []
    for base, q in groups.values():
        f = power(base, q)
        if f.op == CONST:
            coeff = _fold(coeff, f.data, True)
        elif f.op == MUL:
            flat.extend(f.args)
        else:
            flat.append(f)
    if coeff == 0:
        return ZERO
    if coeff != 1:
        flat.insert(0, const(coeff))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Expr(MUL, tuple(flat))


def _as_exponent(q) -> Fraction:
    if isinstance(q, Expr):
        if q.op != CONST or not isinstance(q.data, Fraction):
            raise TypeError("exponents must be rational constants")
        return q.data
    if isinstance(q, float):
        return Fraction(q).limit_denominator(10**6)
    return Fraction(q)


def _exact_root(n: int, k: int):
    r = round(n ** (1.0 / k))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c ** k == n:
            return c
    return None


def power(base: ExprLike, q) -> Expr:
    q = _as_exponent(q)
    base = as_expr(base)
    if q == 0:
        return ONE
    if q == 1:
        return base
    if base.op == CONST:
        b = base.data
        if q.denominator == 1:
            if not (b == 0 and q < 0):
                return const(b ** int(q))
        elif isinstance(b, Fraction) and b > 0:
            p = _exact_root(b.numerator, q.denominator)
            d = _exact_root(b.denominator, q.denominator)
            if p is not None and d is not None:
                return const(Fraction(p, d) ** q.numerator)
    if base.op == POW and q.denominator == 1:
        return power(base.args[0], base.data * q)
    return Expr(POW, (base,), q)


def _func(name: str):
    def build(x: ExprLike) -> Expr:
        x = as_expr(x)
        if x.op == CONST and name in ("exp", "sin", "sinh") and x.data == 0:
            return ZERO if name != "exp" else ONE
        if x.op == CONST and name in ("cos", "cosh") and x.data == 0:
            return ONE
        if x.op == CONST and name in ("log",) and x.data == 1:
            return ZERO
        if x.op == CONST and name == "sqrt" and isinstance(x.data, Fraction) and x.data >= 0:
            p, q = x.data.numerator, x.data.denominator
            rp, rq = math.isqrt(p), math.isqrt(q)
            if rp * rp == p and rq * rq == q:
                return const(Fraction(rp, rq))
        return Expr(name, (x,))
    build.__name__ = name
    return build


exp = _func("exp")
log = _func("log")
sqrt = _func("sqrt")
sin = _func("sin")
cos = _func("cos")
sinh = _func("sinh")
cosh = _func("cosh")
lambertw = _func("lambertw")


# ---------------------------------------------------------------------------
# symbols and substitution

def free_symbols(e: Expr) -> tuple[set[str], set[str]]:
    """Return (variables, named constants) occurring in ``e``."""
    vs: set[str] = set()
    cs: set[str] = set()
    seen: set[int] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if n.op == VAR:
            vs.add(n.data)
        elif n.op == CNAME:
            cs.add(n.data)
        else:
            stack.extend(n.args)
    return vs, cs


def _rebuild(n: Expr, args: list[Expr]) -> Expr:
    if n.op == ADD:
        return add(*args)
    if n.op == MUL:
        return mul(*args)
    if n.op == POW:
        return power(args[0], n.data)
    return _func(n.op)(args[0])


def subs(e: Expr, mapping: Mapping[str, ExprLike]) -> Expr:
    """Replace symbols (variables or named constants) by expressions."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[int, Expr] = {}

    def go(n: Expr) -> Expr:
        r = memo.get(id(n))
        if r is not None:
            return r
        if n.op in (VAR, CNAME):
            r = repl.get(n.data, n)
        elif n.op == CONST:
            r = n
        else:
            new = [go(a) for a in n.args]
            r = n if all(x is y for x, y in zip(new, n.args)) else _rebuild(n, new)
        memo[id(n)] = r
        return r

    return go(e)


def same(a: ExprLike, b: ExprLike) -> bool:
    """Structural equality of two trees."""
    return as_expr(a).key == as_expr(b).key


# ---------------------------------------------------------------------------
# differentiation

def diff(e: ExprLike, x: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``x``.

    Named constants differentiate to zero.  Results are cached on the nodes.
    """
    e = as_expr(e)
    return _diff(e, x)


def _diff(n: Expr, x: str) -> Expr:
    cache = n._dcache
    if cache is not None:
        hit = cache.get(x)
        if hit is not None:
            return hit
    op = n.op
    if op == VAR:
        r = ONE if n.data == x else ZERO
    elif op in (CONST, CNAME):
        r = ZERO
    elif op == ADD:
        r = add(*[_diff(a, x) for a in n.args])
    elif op == MUL:
        terms = []
        for i, a in enumerate(n.args):
            da = _diff(a, x)
            if da.is_zero():
                continue
            terms.append(mul(*n.args[:i], da, *n.args[i + 1:]))
        r = add(*terms)
    else:
        a = n.args[0]
        da = _diff(a, x)
        if da.is_zero():
            r = ZERO
        elif op == POW:
            q = n.data
            r = mul(q, power(a, q - 1), da)
        elif op == "exp":
            r = mul(n, da)
        elif op == "log":
            r = mul(power(a, -1), da)
        elif op == "sqrt":
            r = mul(Fraction(1, 2), power(n, -1), da)
        elif op == "sin":
            r = mul(cos(a), da)
        elif op == "cos":
            r = mul(-1, sin(a), da)
        elif op == "sinh":
            r = mul(cosh(a), da)
        elif op == "cosh":
            r = mul(sinh(a), da)
        elif op == "lambertw":
            # W' = W/(x(1+W)) written as exp(-W)/(1+W), regular at x = 0
            r = mul(exp(mul(-1, n)), power(add(1, n), -1), da)
        else:  # pragma: no cover
            raise ValueError(f"unknown node {op}")
    if n._dcache is None:
        n._dcache = {}
    n._dcache[x] = r
    return r


# ---------------------------------------------------------------------------
# Lambert W

_INV_E = math.exp(-1.0)


def _lambertw_array(x: np.ndarray, branch: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if branch == 0:
        if np.any(x < -_INV_E - 1e-15):
            raise DomainError("lambertw branch 0 needs x >= -1/e")
    elif branch == -1:
        if np.any(x < -_INV_E - 1e-15) or np.any(x >= 0):
            raise DomainError("lambertw branch -1 needs -1/e <= x < 0")
    else:
        raise ValueError("branch must be 0 or -1")
    x = np.maximum(x, -_INV_E)
    w = np.empty_like(x)
    near = x < -0.32 if branch == 0 else x < -0.25
    p = np.sqrt(np.maximum(2.0 * (math.e * x[near] + 1.0), 0.0))
    if branch == -1:
        p = -p
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    far = ~near
    xf = x[far]
    if branch == 0:
        big = xf > math.e
        g = np.log1p(np.where(big, 0.0, xf))
        l1 = np.log(np.where(big, xf, math.e))
        l2 = np.log(l1)
        g = np.where(big, l1 - l2 + l2 / l1, g)
    else:
        l1 = np.log(-xf)
        l2 = np.log(-l1)
        g = l1 - l2 + l2 / l1
    w[far] = g
    for _ in range(100):
        ew = np.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / np.where(wp1 == 0, 1.0, 2.0 * wp1)
        step = np.where(denom == 0, 0.0, f / np.where(denom == 0, 1.0, denom))
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(w))):
            break
    w = np.where(x == -_INV_E, -1.0, w)
    return w


def lambert_w(x: float, branch: int = 0) -> float:
    """Real Lambert W on branch 0 or -1 (Halley iteration)."""
    return float(_lambertw_array(np.asarray([x], dtype=float), branch)[0])


# ---------------------------------------------------------------------------
# evaluation

def _describe(n: Expr) -> str:
    s = to_string(n)
    return s if len(s) <= 80 else s[:77] + "..."


def _check_real(z: np.ndarray, n: Expr, allow_zero: bool) -> np.ndarray:
    re = z.real
    if np.any(np.abs(z.imag) > _REAL_TOL * np.maximum(1.0, np.abs(re))):
        raise DomainError(f"non-real argument in {_describe(n)}")
    bad = re < 0 if allow_zero else re <= 0
    if np.any(bad):
        raise DomainError(f"argument out of domain in {_describe(n)}")
    return re


class Evaluator:
    """Evaluates many expressions at one (vectorised) assignment, sharing work
    between common subtrees."""

    def __init__(self, assignment: Mapping[str, object]):
        self.values = {k: np.asarray(v, dtype=complex) for k, v in assignment.items()}
        self.memo: dict[int, np.ndarray] = {}
        self._keep: list[Expr] = []

    def __call__(self, e: ExprLike) -> np.ndarray:
        e = as_expr(e)
        return self._eval(e)

    def _eval(self, n: Expr) -> np.ndarray:
        hit = self.memo.get(id(n))
        if hit is not None:
            return hit
        op = n.op
        if op == CONST:
            r = np.asarray(complex(n.data) if not isinstance(n.data, Fraction) else float(n.data), dtype=complex)
        elif op in (VAR, CNAME):
            try:
                r = self.values[n.data]
            except KeyError:
                raise UnboundSymbolError(n.data) from None
        elif op == ADD:
            r = self._eval(n.args[0])
            for a in n.args[1:]:
                r = r + self._eval(a)
        elif op == MUL:
            r = self._eval(n.args[0])
            for a in n.args[1:]:
                r = r * self._eval(a)
        else:
            z = self._eval(n.args[0])
            with np.errstate(all="ignore"):
                if op == POW:
                    q = n.data
                    if q.denominator == 1:
                        if q < 0 and np.any(z == 0):
                            raise DomainError(f"division by zero in {_describe(n)}")
                        r = z ** int(q)
                    else:
                        re = _check_real(z, n, allow_zero=q > 0)
                        r = np.asarray(re ** float(q), dtype=complex)
                elif op == "exp":
                    r = np.exp(z)
                elif op == "log":
                    r = np.asarray(np.log(_check_real(z, n, False)), dtype=complex)
                elif op == "sqrt":
                    r = np.asarray(np.sqrt(_check_real(z, n, True)), dtype=complex)
                elif op == "sin":
                    r = np.sin(z)
                elif op == "cos":
                    r = np.cos(z)
                elif op == "sinh":
                    r = np.sinh(z)
                elif op == "cosh":
                    r = np.cosh(z)
                elif op == "lambertw":
                    re = z.real
                    if np.any(np.abs(z.imag) > _REAL_TOL * np.maximum(1.0, np.abs(re))):
                        raise DomainError(f"non-real argument in {_describe(n)}")
                    try:
                        r = np.asarray(_lambertw_array(re, 0), dtype=complex)
                    except DomainError as exc:
                        raise DomainError(f"{exc} in {_describe(n)}") from None
                else:  # pragma: no cover
                    raise ValueError(f"unknown node {op}")
        if not np.all(np.isfinite(r)):
            raise DomainError(f"non-finite value in {_describe(n)}")
        self.memo[id(n)] = r
        self._keep.append(n)
        return r


def evaluate(e: ExprLike, assignment: Mapping[str, object]) -> complex | np.ndarray:
    """Evaluate ``e``; returns a complex scalar or an array when the
    assignment binds arrays."""
    r = Evaluator(assignment)(e)
    if r.ndim == 0:
        return complex(r)
    return r


# ---------------------------------------------------------------------------
# printing and parsing

def _num_str(v: Number) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, complex):
        return f"complex({v.real!r}, {v.imag!r})"
    return repr(float(v))


def to_string(e: ExprLike) -> str:
    """Python-syntax rendering; ``parse`` inverts it exactly."""
    e = as_expr(e)
    memo: dict[int, str] = {}

    def go(n: Expr) -> str:
        hit = memo.get(id(n))
        if hit is not None:
            return hit
        op = n.op
        if op == CONST:
            s = _num_str(n.data)
            if isinstance(n.data, Fraction) and (n.data < 0 or n.data.denominator != 1):
                s = f"({s})"
            elif isinstance(n.data, float) and n.data < 0:
                s = f"({s})"
        elif op in (VAR, CNAME):
            s = n.data
        elif op == ADD:
            s = "(" + " + ".join(go(a) for a in n.args) + ")"
        elif op == MUL:
            s = "*".join(go(a) for a in n.args)
        elif op == POW:
            s = f"({go(n.args[0])})**({_num_str(n.data)})"
        else:
            s = f"{op}({go(n.args[0])})"
        memo[id(n)] = s
        return s

    return go(e)


def parse(text: str, constants: Iterable[str] = ()) -> Expr:
    """Parse an expression string.  Names listed in ``constants`` become
    named constants, all other names become variables."""
    consts = set(constants)
    tree = ast.parse(text, mode="eval").body

    def number(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = number(node.operand)
            return None if v is None else (-v if isinstance(node.op, ast.USub) else v)
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
            a, b = number(node.left), number(node.right)
            if isinstance(a, int) and isinstance(b, int):
                return Fraction(a, b)
        return None

    def go(node) -> Expr:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                raise ValueError(f"unsupported literal {node.value!r}")
            return const(node.value)
        if isinstance(node, ast.Name):
            return cname(node.id) if node.id in consts else var(node.id)
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return mul(-1, go(node.operand))
            if isinstance(node.op, ast.UAdd):
                return go(node.operand)
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                q = number(node.right)
                if q is None:
                    raise ValueError("exponent must be a rational literal")
                return power(go(node.left), q)
            if isinstance(node.op, ast.Div):
                q = number(node)
                if isinstance(q, Fraction):
                    return const(q)
                return go(node.left) / go(node.right)
            a, b = go(node.left), go(node.right)
            if isinstance(node.op, ast.Add):
                return add(a, b)
            if isinstance(node.op, ast.Sub):
                return add(a, mul(-1, b))
            if isinstance(node.op, ast.Mult):
                return mul(a, b)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            name = node.func.id
            if name == "complex" and len(node.args) == 2:
                re, im = number(node.args[0]), number(node.args[1])
                return const(complex(float(re), float(im)))
            if name in FUNCTIONS and len(node.args) == 1:
                return _func(name)(go(node.args[0]))
        raise ValueError(f"cannot parse {ast.dump(node)}")

    return go(tree)
