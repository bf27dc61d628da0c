"""Coframe models: generators with structure equations, scalar coordinates,
named constants, and the exterior derivative on forms built from them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import symexpr as sx
from .multivec import sort_sign
from .symexpr import Expr, ExprLike

MODEL_FORMAT = "g2verify.model/1"
_PRUNE = 1e-14


class ModelError(ValueError):
    """A model specification is incomplete or inconsistent."""


class SamplerError(RuntimeError):
    """No admissible sample points could be drawn."""


class NotSemibasicError(ValueError):
    """A form has components along non-heptad generators."""


def _is_negligible(e: Expr) -> bool:
    return e.op == sx.CONST and abs(complex(e.data)) < _PRUNE


class FieldForm:
    """Sparse k-form: strictly increasing generator index tuples -> Expr."""

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms: Mapping[tuple, ExprLike] | None = None):
        self.degree = degree
        clean: dict[tuple, Expr] = {}
        for I, c in (terms or {}).items():
            if len(I) != degree:
                raise ValueError(f"index {I} does not match degree {degree}")
            c = sx.as_expr(c)
            if c.is_zero() or _is_negligible(c):
                continue
            clean[tuple(I)] = c
        self.terms = clean

    @classmethod
    def scalar(cls, f: ExprLike) -> "FieldForm":
        return cls(0, {(): f})

    @classmethod
    def gen(cls, i: int, coeff: ExprLike = 1) -> "FieldForm":
        return cls(1, {(i,): coeff})

    @classmethod
    def from_unsorted(cls, degree: int, items: Iterable[tuple[tuple, ExprLike]]) -> "FieldForm":
        acc = _Acc()
        for idx, c in items:
            s, I = sort_sign(idx)
            if s:
                acc.put(I, sx.mul(s, c))
        return acc.form(degree)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "FieldForm") -> "FieldForm":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        acc = _Acc()
        acc.extend(self)
        acc.extend(other)
        return acc.form(self.degree)

    def __sub__(self, other: "FieldForm") -> "FieldForm":
        return self + (-other)

    def __neg__(self) -> "FieldForm":
        return FieldForm(self.degree, {I: sx.mul(-1, c) for I, c in self.terms.items()})

    def scale(self, f: ExprLike) -> "FieldForm":
        f = sx.as_expr(f)
        return FieldForm(self.degree, {I: sx.mul(f, c) for I, c in self.terms.items()})

    def __mul__(self, f: ExprLike) -> "FieldForm":
        return self.scale(f)

    __rmul__ = __mul__

    def __xor__(self, other: "FieldForm") -> "FieldForm":
        return wedge(self, other)

    def generators_used(self) -> set[int]:
        return {i for I in self.terms for i in I}

    def map_coeffs(self, fn) -> "FieldForm":
        return FieldForm(self.degree, {I: fn(c) for I, c in self.terms.items()})

    def __repr__(self) -> str:
        body = " + ".join(f"({sx.to_string(c)})*w{I}" for I, c in self.terms.items())
        return f"FieldForm[{self.degree}]({body or '0'})"


class _Acc:
    """Accumulates Expr terms per index and sums them once."""

    __slots__ = ("parts",)

    def __init__(self):
        self.parts: dict[tuple, list[Expr]] = {}

    def put(self, I: tuple, c: Expr) -> None:
        self.parts.setdefault(I, []).append(c)

    def extend(self, a: FieldForm, factor: ExprLike | None = None) -> None:
        for I, c in a.terms.items():
            self.put(I, c if factor is None else sx.mul(factor, c))

    def form(self, degree: int) -> FieldForm:
        return FieldForm(degree, {I: sx.add(*cs) for I, cs in self.parts.items()})


def wedge(a: FieldForm, b: FieldForm) -> FieldForm:
    acc = _Acc()
    for I, f in a.terms.items():
        for J, g in b.terms.items():
            s, K = sort_sign(I + J)
            if s:
                acc.put(K, sx.mul(s, f, g))
    return acc.form(a.degree + b.degree)


def wedge_all(*forms: FieldForm) -> FieldForm:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class Scalar:
    """A scalar coordinate with its declared differential.

    ``sample`` is ("uniform", lo, hi), ("expr", Expr) for a value resolved
    from other scalars and constants, or ("implicit", eq, lo, hi) for the root
    of eq in this scalar bracketed by the Exprs lo < hi.
    """

    name: str
    differential: FieldForm
    sample: tuple


@dataclass(frozen=True)
class Constant:
    name: str
    lo: float
    hi: float


class Samples:
    """A batch of sample points: each name maps to an array of values."""

    def __init__(self, values: Mapping[str, np.ndarray], n: int | None = None):
        self.values = {k: np.asarray(v) for k, v in values.items()}
        sizes = {len(v) for v in self.values.values()}
        if n is not None:
            sizes.add(n)
        if len(sizes) > 1:
            raise ValueError("inconsistent sample sizes")
        self.n = sizes.pop() if sizes else 0
        self._evaluator: sx.Evaluator | None = None

    @property
    def evaluator(self) -> sx.Evaluator:
        if self._evaluator is None:
            self._evaluator = sx.Evaluator(self.values)
        return self._evaluator

    def eval(self, e: ExprLike) -> np.ndarray:
        v = self.evaluator(e)
        return np.broadcast_to(v, (self.n,))

    def points(self) -> list[dict[str, complex]]:
        return [{k: complex(v[i]) for k, v in self.values.items()} for i in range(self.n)]

    def subset(self, idx) -> "Samples":
        n = len(np.arange(self.n)[idx])
        return Samples({k: v[idx] for k, v in self.values.items()}, n)


class Model:
    """Finite coframe presentation of a manifold or bundle total space."""

    def __init__(
        self,
        name: str,
        generators: Sequence[str],
        structure: Mapping[str, FieldForm],
        scalars: Sequence[Scalar] = (),
        constants: Sequence[Constant] = (),
        constraints: Sequence[ExprLike] = (),
        notes: str = "",
    ):
        self.name = name
        self.generators = tuple(generators)
        if len(set(self.generators)) != len(self.generators):
            raise ModelError("duplicate generator names")
        self.index = {g: i for i, g in enumerate(self.generators)}
        missing = [g for g in self.generators if g not in structure]
        if missing:
            raise ModelError(f"structure equation missing for {', '.join(missing)}")
        extra = [g for g in structure if g not in self.index]
        if extra:
            raise ModelError(f"structure equation for unknown generator {', '.join(extra)}")
        self.structure = tuple(structure[g] for g in self.generators)
        for g, s in zip(self.generators, self.structure):
            if s.degree != 2:
                raise ModelError(f"d{g} must be a 2-form")
        self.scalars = tuple(scalars)
        self.scalar_index = {s.name: s for s in self.scalars}
        self.constants = tuple(constants)
        self.constant_names = {c.name for c in self.constants}
        if self.constant_names & set(self.scalar_index):
            raise ModelError("a name is both a scalar and a constant")
        for s in self.scalars:
            if s.differential.degree != 1:
                raise ModelError(f"d{s.name} must be a 1-form")
            if not isinstance(s.sample, tuple) or s.sample[0] not in ("uniform", "expr", "implicit"):
                raise ModelError(f"scalar {s.name} needs a sampler rule")
        self.constraints = tuple(sx.as_expr(c) for c in constraints)
        self.notes = notes
        n = len(self.generators)
        for label, form in [(f"d{g}", s) for g, s in zip(self.generators, self.structure)] + \
                [(f"d{s.name}", s.differential) for s in self.scalars]:
            for I, c in form.terms.items():
                if any(i >= n for i in I):
                    raise ModelError(f"{label} references an unknown generator")
                self._check_symbols(c, label)
        self._dgen: dict[tuple, FieldForm] = {}

    @property
    def n(self) -> int:
        return len(self.generators)

    def _check_symbols(self, c: Expr, label: str) -> None:
        vs, cs = sx.free_symbols(c)
        bad = (vs - set(self.scalar_index)) | (cs - self.constant_names)
        if bad:
            raise ModelError(f"{label} uses undeclared symbols {sorted(bad)}")

    def gen(self, name: str, coeff: ExprLike = 1) -> FieldForm:
        if name not in self.index:
            raise ModelError(f"unknown generator {name}")
        return FieldForm.gen(self.index[name], coeff)

    def form(self, *items: tuple[ExprLike, str]) -> FieldForm:
        """Build a form from (coefficient, 'a b c') pairs of generator names."""
        parts = []
        for c, names in items:
            idx = tuple(self.index[x] for x in names.split())
            parts.append((idx, c))
        degree = len(parts[0][0]) if parts else 0
        return FieldForm.from_unsorted(degree, parts)

    def var(self, name: str) -> Expr:
        if name in self.scalar_index:
            return sx.var(name)
        if name in self.constant_names:
            return sx.cname(name)
        raise ModelError(f"unknown symbol {name}")

    # -- exterior derivative ------------------------------------------------
    def d_basis(self, I: tuple) -> FieldForm:
        """d(w_I) via the Leibniz rule over the structure equations."""
        hit = self._dgen.get(I)
        if hit is not None:
            return hit
        if len(I) == 0:
            r = FieldForm(1)
        elif len(I) == 1:
            r = self.structure[I[0]]
        else:
            head = FieldForm.gen(I[0])
            tail = FieldForm(len(I) - 1, {I[1:]: 1})
            r = wedge(self.structure[I[0]], tail) - wedge(head, self.d_basis(I[1:]))
        self._dgen[I] = r
        return r

    def d_scalar(self, f: ExprLike) -> FieldForm:
        f = sx.as_expr(f)
        vs, _ = sx.free_symbols(f)
        acc = _Acc()
        for x in sorted(vs):
            s = self.scalar_index.get(x)
            if s is None:
                raise ModelError(f"symbol {x} is not a scalar coordinate of {self.name}")
            dfx = sx.diff(f, x)
            if dfx.is_zero():
                continue
            acc.extend(s.differential, dfx)
        return acc.form(1)

    def d(self, a: FieldForm) -> FieldForm:
        """Exterior derivative."""
        acc = _Acc()
        for I, f in a.terms.items():
            if any(i >= self.n for i in I):
                raise ModelError("form references an unknown generator")
            df = self.d_scalar(f)
            if not df.is_zero():
                acc.extend(wedge(df, FieldForm(len(I), {I: 1})))
            dI = self.d_basis(I)
            if not dI.is_zero():
                acc.extend(dI, f)
        return acc.form(a.degree + 1)

    # -- sampling -------------------------------------------------------------
    def sample(self, n: int, seed: int) -> Samples:
        """Draw ``n`` admissible points; deterministic in ``seed``."""
        rng = np.random.default_rng(seed)
        names = [c.name for c in self.constants] + [s.name for s in self.scalars]
        if n == 0 or not names:
            return Samples({k: np.zeros(0, dtype=complex) for k in names}, n)
        kept: dict[str, list] = {k: [] for k in names}
        have = 0
        for _ in range(60):
            want = max(n - have, 1) * 2
            vals: dict[str, np.ndarray] = {}
            for c in self.constants:
                vals[c.name] = rng.uniform(c.lo, c.hi, want) if c.hi > c.lo else np.full(want, c.lo)
            for s in self.scalars:
                if s.sample[0] == "uniform":
                    vals[s.name] = rng.uniform(s.sample[1], s.sample[2], want)
            ok = self._resolve(vals, want)
            for i in np.flatnonzero(ok):
                if have >= n:
                    break
                for k in names:
                    kept[k].append(vals[k][i])
                have += 1
            if have >= n:
                return Samples({k: np.asarray(v, dtype=complex) for k, v in kept.items()})
        raise SamplerError(f"could not draw {n} admissible points for {self.name}")

    def _resolve(self, vals: dict[str, np.ndarray], size: int) -> np.ndarray:
        """Fill derived scalars in place; return the admissibility mask."""
        ok = np.ones(size, dtype=bool)
        for s in self.scalars:
            if s.sample[0] == "expr":
                vals[s.name], good = _eval_pointwise(s.sample[1], vals, size)
                ok &= good
            elif s.sample[0] == "implicit":
                vals[s.name], good = solve_implicit(s.name, *s.sample[1:], vals, size)
                ok &= good
        for c in self.constraints:
            v, good = _eval_pointwise(c, vals, size)
            ok &= good & (np.abs(v) <= 1e-12)
        return ok

    def grid(self, values: Mapping[str, object]) -> Samples:
        """Samples at prescribed constants and uniform scalars; derived scalars are resolved."""
        arrays = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in values.items()}
        size = max(a.size for a in arrays.values())
        vals = {k: np.broadcast_to(a, (size,)).astype(float) for k, a in arrays.items()}
        missing = [c.name for c in self.constants if c.name not in vals] + \
            [s.name for s in self.scalars if s.sample[0] == "uniform" and s.name not in vals]
        if missing:
            raise SamplerError(f"grid for {self.name} lacks {', '.join(missing)}")
        ok = self._resolve(vals, size)
        if not ok.all():
            raise SamplerError(f"grid for {self.name} leaves the admissible domain")
        return Samples({k: np.asarray(v, dtype=complex) for k, v in vals.items()}, size)

    def to_json(self) -> dict:
        return model_to_json(self)


def _eval_pointwise(e: Expr, vals: Mapping[str, np.ndarray], size: int):
    try:
        v = sx.Evaluator(vals)(e)
        return np.broadcast_to(v, (size,)).copy(), np.ones(size, dtype=bool)
    except sx.DomainError:
        out = np.zeros(size, dtype=complex)
        good = np.zeros(size, dtype=bool)
        for i in range(size):
            try:
                out[i] = complex(sx.Evaluator({k: a[i] for k, a in vals.items()})(e))
                good[i] = True
            except sx.DomainError:
                pass
        return out, good


def solve_implicit(name: str, eq: Expr, lo: Expr, hi: Expr, vals: Mapping[str, np.ndarray],
                   size: int, xtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise bracketed root of eq in ``name``, polished by one Newton step."""
    from scipy.optimize import brentq

    deq = sx.diff(eq, name)
    out = np.zeros(size, dtype=complex)
    good = np.zeros(size, dtype=bool)
    for i in range(size):
        env = {k: a[i] for k, a in vals.items() if k != name}
        try:
            a = float(sx.Evaluator(env)(lo).real)
            b = float(sx.Evaluator(env)(hi).real)

            def g(x: float) -> float:
                return float(sx.Evaluator({**env, name: x})(eq).real)

            x = brentq(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)
            slope = float(sx.Evaluator({**env, name: x})(deq).real)
            if slope != 0.0:
                y = x - g(x) / slope
                if a < y < b and abs(g(y)) <= abs(g(x)):
                    x = y
        except (ValueError, sx.DomainError):
            continue
        out[i] = x
        good[i] = True
    return out, good


# ---------------------------------------------------------------------------
# numeric evaluation and residuals

def evaluate_form(a: FieldForm, samples: Samples) -> dict[tuple, np.ndarray]:
    """Coefficient arrays (one value per sample) keyed by generator index."""
    out = {}
    for I, c in a.terms.items():
        try:
            out[I] = samples.eval(c)
        except sx.DomainError as exc:
            raise sx.DomainError(f"{exc} (coefficient of w{I})") from None
    return out


def sup_norm(a: FieldForm, samples: Samples) -> float:
    vals = evaluate_form(a, samples)
    if not vals or samples.n == 0:
        return 0.0
    return float(max(np.max(np.abs(v)) for v in vals.values()))


def d_squared_residual(M: Model, samples: Samples) -> float:
    """Max over generators and scalar coordinates of |d(d(.))| at the samples."""
    worst = 0.0
    for i in range(M.n):
        worst = max(worst, sup_norm(M.d(M.structure[i]), samples))
    for s in M.scalars:
        worst = max(worst, sup_norm(M.d(s.differential), samples))
    return worst


def constraint_residual(M: Model, samples: Samples) -> float:
    """Residual of d(constraint) = 0 at the samples."""
    worst = 0.0
    for c in M.constraints:
        worst = max(worst, sup_norm(M.d_scalar(c), samples))
    return worst


# ---------------------------------------------------------------------------
# change of coframe

def substitute_generators(a: FieldForm, images: Sequence[FieldForm]) -> FieldForm:
    """Replace generator i by the 1-form images[i] throughout ``a``."""
    acc = _Acc()
    for I, c in a.terms.items():
        prod = FieldForm.scalar(c)
        for i in I:
            prod = wedge(prod, images[i])
            if prod.is_zero():
                break
        acc.extend(prod)
    return acc.form(a.degree)


def symbolic_inverse(E: list[list[Expr]], probe: Samples) -> list[list[Expr]]:
    """Inverse of a square Expr matrix by Gauss-Jordan elimination, pivots
    chosen by magnitude at the probe point."""
    n = len(E)
    A = [[sx.as_expr(x) for x in row] + [sx.ONE if i == j else sx.ZERO for j in range(n)]
         for i, row in enumerate(E)]

    def val(e: Expr) -> float:
        return float(np.max(np.abs(probe.eval(e)))) if not e.is_zero() else 0.0

    for col in range(n):
        best, piv = 0.0, None
        for r in range(col, n):
            v = val(A[r][col])
            if v > best:
                best, piv = v, r
        if piv is None or best < 1e-12:
            raise ModelError("frame matrix is singular at the probe point")
        A[col], A[piv] = A[piv], A[col]
        inv = sx.power(A[col][col], -1)
        A[col] = [sx.mul(inv, x) for x in A[col]]
        for r in range(n):
            if r == col or A[r][col].is_zero():
                continue
            f = A[r][col]
            A[r] = [sx.add(x, sx.mul(-1, f, y)) if not y.is_zero() else x for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def reframe(M: Model, new_names: Sequence[str], forms: Sequence[FieldForm],
            probe: Samples, name: str | None = None, images: Sequence[FieldForm] | None = None) -> Model:
    """Model whose first generators are the given 1-forms of ``M``; remaining
    old generators are kept where needed to complete a coframe.

    ``images`` optionally gives each old generator in the new coframe, which
    avoids the symbolic inverse when the frame is a full coframe."""
    n = M.n
    rows = []
    for f in forms:
        if f.degree != 1:
            raise ModelError("frame members must be 1-forms")
        row = [sx.ZERO] * n
        for (i,), c in f.terms.items():
            row[i] = c
        rows.append(row)
    names = list(new_names)
    numeric = np.array([[np.max(np.abs(probe.eval(c))) if not c.is_zero() else 0.0 for c in r] for r in rows]) \
        if rows else np.zeros((0, n))
    for g in range(n):
        if len(rows) == n:
            break
        trial = np.vstack([numeric, np.eye(n)[g]])
        if np.linalg.matrix_rank(trial, tol=1e-9) > len(rows):
            row = [sx.ZERO] * n
            row[g] = sx.ONE
            rows.append(row)
            numeric = trial
            names.append(M.generators[g])
    if len(rows) != n:
        raise ModelError("frame forms are linearly dependent")
    if images is None:
        F = symbolic_inverse(rows, probe)
        images = [FieldForm(1, {(a,): F[g][a] for a in range(n)}) for g in range(n)]
    elif len(names) != len(forms):
        raise ModelError("explicit images need a full coframe")
    else:
        for a, f in enumerate(forms):
            back = substitute_generators(f, images) - FieldForm.gen(a)
            if sup_norm(back, probe) > 1e-9:
                raise ModelError("explicit images do not invert the frame")
    structure = {}
    for a in range(n):
        old = FieldForm(1, {(g,): rows[a][g] for g in range(n)})
        structure[names[a]] = substitute_generators(M.d(old), images)
    scalars = [Scalar(s.name, substitute_generators(s.differential, images), s.sample) for s in M.scalars]
    out = Model(name or M.name, names, structure, scalars, M.constants, M.constraints, M.notes)
    out.old_images = images  # old generator g as a 1-form in the new coframe
    return out


# ---------------------------------------------------------------------------
# JSON model specs

def _form_to_json(M: Model, a: FieldForm) -> list:
    return [[[M.generators[i] for i in I], sx.to_string(c)] for I, c in a.terms.items()]


def _form_from_json(index: Mapping[str, int], degree: int, data, consts) -> FieldForm:
    items = []
    for names, text in data:
        try:
            idx = tuple(index[x] for x in names)
        except KeyError as exc:
            raise ModelError(f"unknown generator {exc.args[0]}") from None
        if len(idx) != degree:
            raise ModelError(f"term {names} has the wrong degree")
        items.append((idx, sx.parse(text, consts)))
    return FieldForm.from_unsorted(degree, items)


def model_to_json(M: Model) -> dict:
    scalars = []
    for s in M.scalars:
        if s.sample[0] == "uniform":
            rule = {"uniform": [s.sample[1], s.sample[2]]}
        elif s.sample[0] == "implicit":
            rule = {"implicit": [sx.to_string(x) for x in s.sample[1:]]}
        else:
            rule = {"expr": sx.to_string(s.sample[1])}
        scalars.append({"name": s.name, "differential": _form_to_json(M, s.differential), "sample": rule})
    return {
        "format": MODEL_FORMAT,
        "name": M.name,
        "generators": list(M.generators),
        "structure": {g: _form_to_json(M, f) for g, f in zip(M.generators, M.structure)},
        "scalars": scalars,
        "constants": [{"name": c.name, "range": [c.lo, c.hi]} for c in M.constants],
        "constraints": [sx.to_string(c) for c in M.constraints],
        "notes": M.notes,
    }


def define_model(spec: Mapping) -> Model:
    """Validate a JSON-style specification and build the Model."""
    fmt = spec.get("format", MODEL_FORMAT)
    if fmt != MODEL_FORMAT:
        raise ModelError(f"unsupported model format {fmt!r}")
    for key in ("name", "generators", "structure"):
        if key not in spec:
            raise ModelError(f"model spec lacks '{key}'")
    gens = list(spec["generators"])
    index = {g: i for i, g in enumerate(gens)}
    consts = [c["name"] for c in spec.get("constants", [])]
    structure_spec = spec["structure"]
    missing = [g for g in gens if g not in structure_spec]
    if missing:
        raise ModelError(f"structure equation missing for {', '.join(missing)}")
    structure = {g: _form_from_json(index, 2, structure_spec[g], consts) for g in structure_spec if g in index}
    extra = [g for g in structure_spec if g not in index]
    if extra:
        raise ModelError(f"structure equation for unknown generator {', '.join(extra)}")
    scalars = []
    for s in spec.get("scalars", []):
        rule = s.get("sample")
        if not rule:
            raise ModelError(f"scalar {s.get('name')} needs a sampler rule")
        if "uniform" in rule:
            lo, hi = rule["uniform"]
            sample = ("uniform", float(lo), float(hi))
        elif "expr" in rule:
            sample = ("expr", sx.parse(rule["expr"], consts))
        elif "implicit" in rule:
            sample = ("implicit",) + tuple(sx.parse(x, consts) for x in rule["implicit"])
        else:
            raise ModelError(f"scalar {s['name']} has an unknown sampler rule")
        scalars.append(Scalar(s["name"], _form_from_json(index, 1, s["differential"], consts), sample))
    constants = [Constant(c["name"], float(c["range"][0]), float(c["range"][1])) for c in spec.get("constants", [])]
    constraints = [sx.parse(c, consts) for c in spec.get("constraints", [])]
    return Model(spec["name"], gens, structure, scalars, constants, constraints, spec.get("notes", ""))
