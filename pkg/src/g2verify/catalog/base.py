"""Shared pieces for catalog entries: expectations, complex frames and the
translation of complex or matrix structure equations to real generators."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .. import symexpr as sx
from ..coframe import FieldForm, Model, Samples, _Acc, wedge
from ..g2ops import G2Field
from ..symexpr import Expr, ExprLike


@dataclass
class FlowSpec:
    """Splitting data for the Laplacian-flow rescaling family."""

    k: ExprLike
    nu_block: tuple = (0, 1, 2)


@dataclass
class SolitonSpec:
    V: Sequence[ExprLike]
    c: ExprLike = 0


@dataclass
class ImmersionSpec:
    label: str
    u: Sequence[ExprLike]
    coords: Sequence[str]
    signature: Sequence[int]
    claimed: Sequence[Sequence[ExprLike]]
    grid: dict


@dataclass
class ExtraCheck:
    """A named residual computed on the built entry; passes when <= tol."""

    name: str
    fn: Callable[["Built", Samples], float]
    tol: float


@dataclass
class Expected:
    kind: str  # "torsion-free", "quadratic" or "soliton"
    lam: Fraction | None = None
    torsion_type: str = "zero"
    erp: bool = False
    flow: FlowSpec | None = None
    soliton: SolitonSpec | None = None
    immersions: list = field(default_factory=list)
    extras: list = field(default_factory=list)
    lie_group: bool = False
    metadata: dict = field(default_factory=dict)


@dataclass
class Built:
    id: str
    model: Model
    g2: G2Field
    expected: Expected
    phi_ref: FieldForm | None = None
    grid: Callable[[int], Samples] | None = None


# ---------------------------------------------------------------------------
# complex forms

def _split_coeff(z) -> tuple[Expr, Expr]:
    if isinstance(z, tuple):
        return sx.as_expr(z[0]), sx.as_expr(z[1])
    if isinstance(z, complex):
        return sx.const(z.real), sx.const(z.imag)
    return sx.as_expr(z), sx.ZERO


class CForm:
    """A complex form re + i im built from real generator forms."""

    __slots__ = ("re", "im")

    def __init__(self, re: FieldForm, im: FieldForm | None = None):
        self.re = re
        self.im = im if im is not None else FieldForm(re.degree)

    @property
    def degree(self) -> int:
        return self.re.degree

    def __add__(self, o: "CForm") -> "CForm":
        return CForm(self.re + o.re, self.im + o.im)

    def __sub__(self, o: "CForm") -> "CForm":
        return CForm(self.re - o.re, self.im - o.im)

    def __neg__(self) -> "CForm":
        return CForm(-self.re, -self.im)

    def __mul__(self, z) -> "CForm":
        x, y = _split_coeff(z)
        return CForm(self.re.scale(x) - self.im.scale(y), self.re.scale(y) + self.im.scale(x))

    __rmul__ = __mul__

    def __xor__(self, o: "CForm") -> "CForm":
        return CForm(wedge(self.re, o.re) - wedge(self.im, o.im), wedge(self.re, o.im) + wedge(self.im, o.re))

    def conj(self) -> "CForm":
        return CForm(self.re, -self.im)

    @classmethod
    def zero(cls, degree: int) -> "CForm":
        return cls(FieldForm(degree), FieldForm(degree))


def csum(forms: Sequence[CForm], degree: int) -> CForm:
    out = CForm.zero(degree)
    for f in forms:
        out = out + f
    return out


def _nice(x: float) -> ExprLike:
    """Snap a float to a nearby simple rational."""
    if abs(x) < 1e-13:
        return 0
    q = Fraction(x).limit_denominator(1000)
    if abs(float(q) - x) < 1e-12:
        return q
    return x


def solve_real_structure(n: int, defs: Sequence[CForm], rhs: Sequence[CForm]) -> list[FieldForm]:
    """Given complex (or real) 1-forms defs[m] = sum_g A_mg w_g with constant
    coefficients and their exterior derivatives rhs[m], return d w_g for each
    real generator.  Consistency of the complex data is not assumed here; the
    d^2 gate and ``structure_consistency`` catch it."""
    rows = []
    for f in defs:
        for part in (f.re, f.im):
            row = np.zeros(n)
            for (g,), c in part.terms.items():
                if c.op != sx.CONST:
                    raise ValueError("frame definitions must have constant coefficients")
                row[g] = complex(c.data).real if not isinstance(c.data, Fraction) else float(c.data)
            rows.append(row)
    A = np.array(rows)
    if np.linalg.matrix_rank(A) < n:
        raise ValueError("frame definitions do not determine all generators")
    P = np.linalg.pinv(A)
    parts = []
    for f in rhs:
        parts.extend([f.re, f.im])
    out = []
    for g in range(n):
        acc = _Acc()
        for r, part in enumerate(parts):
            w = _nice(P[g, r])
            if w == 0:
                continue
            acc.extend(part, w)
        out.append(acc.form(2))
    return out


def structure_consistency(defs: Sequence[CForm], rhs: Sequence[CForm], dgen: Sequence[FieldForm],
                          samples: Samples) -> float:
    """Residual of d(defs[m]) = rhs[m] once the solved real equations are used."""
    from ..coframe import sup_norm

    worst = 0.0
    for f, r in zip(defs, rhs):
        for part, target in ((f.re, r.re), (f.im, r.im)):
            acc = _Acc()
            for (g,), c in part.terms.items():
                acc.extend(dgen[g], c)
            worst = max(worst, sup_norm(acc.form(2) - target, samples))
    return worst


def matrix_wedge(A, B, degree_a: int, degree_b: int, n: int):
    """Matrix product with wedge multiplication of entries (entries None = 0)."""
    rows, inner, cols = len(A), len(B), len(B[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = _Acc()
            for k in range(inner):
                a, b = A[i][k], B[k][j]
                if a is None or b is None:
                    continue
                acc.extend(wedge(a, b))
            row.append(acc.form(degree_a + degree_b))
        out.append(row)
    return out


def complex_unit():
    return (0, 1)
