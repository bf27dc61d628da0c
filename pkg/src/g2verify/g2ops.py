"""G2 analysis on coframe models: the 3-form, torsion, the quadratic
condition, curvature, Bryant's identities, solitons and auxiliary checks."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Sequence, Union

import numpy as np

from . import multivec as mv
from . import symexpr as sx
from .coframe import (
    FieldForm,
    Model,
    ModelError,
    NotSemibasicError,
    Samples,
    _Acc,
    evaluate_form,
    reframe,
    sup_norm,
    wedge,
)
from .multivec import NumForm, sort_sign
from .symexpr import Expr, ExprLike

# Coefficient of T_im T_mj in the expansion of d(tau) through H.  The value is
# pinned by the trace identity <d tau, phi> = |tau|^2; see extract_H.
H_COEFF = 21.0
T2_COEFF = -3.0

HeptadItem = Union[str, tuple, FieldForm]


class G2Error(ValueError):
    """Adapted-frame or calibration failure."""


class G2Field:
    """A model with a designated orthonormal heptad e_i = c_i * w_{g(i)}.

    ``heptad`` items are a generator name, a (coefficient, name) pair, or a
    general 1-form.  General 1-forms trigger a change of coframe so that each
    heptad member becomes a generator.
    """

    def __init__(self, model: Model, heptad: Sequence[HeptadItem], probe: Samples | None = None):
        if len(heptad) != 7:
            raise G2Error("a heptad has exactly 7 members")
        items = []
        general = False
        for h in heptad:
            if isinstance(h, str):
                items.append((sx.ONE, h))
            elif isinstance(h, tuple):
                items.append((sx.as_expr(h[0]), h[1]))
            elif isinstance(h, FieldForm):
                if h.degree != 1:
                    raise G2Error("heptad members must be 1-forms")
                if len(h.terms) == 1:
                    (i,), c = next(iter(h.terms.items()))
                    items.append((c, model.generators[i]))
                else:
                    items.append(h)
                    general = True
            else:
                raise G2Error(f"bad heptad member {h!r}")
        if general:
            probe = probe or model.sample(1, 0)
            forms = [it if isinstance(it, FieldForm) else model.gen(it[1], it[0]) for it in items]
            names = [f"e{i + 1}" for i in range(7)]
            model = reframe(model, names, forms, probe)
            items = [(sx.ONE, nm) for nm in names]
        self.model = model
        self.hgen = [model.index[name] for _, name in items]
        if len(set(self.hgen)) != 7:
            raise G2Error("heptad members must be distinct generators")
        self.hscale = [c for c, _ in items]
        self.hinv = [sx.power(c, -1) for c in self.hscale]
        self.hpos = {g: i for i, g in enumerate(self.hgen)}
        self.phi_h = FieldForm.from_unsorted(3, [(I, s) for I, s in mv.PHI_TERMS])
        self.psi_h = FieldForm.from_unsorted(4, [(I, s) for I, s in mv.PSI_TERMS])
        self.phi = self.from_heptad(self.phi_h)
        self.psi = self.from_heptad(self.psi_h)

    # -- frame conversions --------------------------------------------------
    def split(self, a: FieldForm) -> tuple[FieldForm, FieldForm]:
        """(heptad part written in the heptad, remainder over the generators)."""
        acc = _Acc()
        rest = {}
        for I, c in a.terms.items():
            if all(i in self.hpos for i in I):
                s, J = sort_sign([self.hpos[i] for i in I])
                acc.put(J, sx.mul(s, c, *[self.hinv[self.hpos[i]] for i in I]))
            else:
                rest[I] = c
        return acc.form(a.degree), FieldForm(a.degree, rest)

    def to_heptad(self, a: FieldForm, samples: Samples | None = None, tol: float = 1e-9) -> FieldForm:
        h, rest = self.split(a)
        if not rest.is_zero() and samples is not None:
            bad = sup_norm(rest, samples)
            if bad > tol:
                raise NotSemibasicError(f"form has vertical components of size {bad:.3g}")
        return h

    def from_heptad(self, b: FieldForm) -> FieldForm:
        acc = _Acc()
        for J, c in b.terms.items():
            s, I = sort_sign([self.hgen[j] for j in J])
            acc.put(I, sx.mul(s, c, *[self.hscale[j] for j in J]))
        return acc.form(b.degree)

    def numeric(self, b: FieldForm, samples: Samples) -> NumForm:
        """Evaluate a heptad form into a batched NumForm."""
        out = np.zeros((samples.n, comb(7, b.degree)), dtype=complex)
        pos = mv.position(b.degree)
        for J, v in evaluate_form(b, samples).items():
            out[:, pos[J]] = v
        return NumForm(b.degree, out)

    def adapted_frame_residual(self, phi_ref: FieldForm, samples: Samples) -> float:
        """Sup distance between a reference 3-form, written in the heptad, and
        the standard 3-form."""
        h, rest = self.split(phi_ref)
        diff = h - self.phi_h
        return max(sup_norm(diff, samples), sup_norm(rest, samples))

    def check_adapted(self, phi_ref: FieldForm, samples: Samples, tol: float = 1e-12) -> float:
        r = self.adapted_frame_residual(phi_ref, samples)
        if r > tol:
            raise G2Error(f"3-form is not standard in the heptad (residual {r:.3g})")
        return r

    # -- symbolic torsion pipeline ---------------------------------------------
    @cached_property
    def dphi(self) -> FieldForm:
        return self.model.d(self.phi)

    @cached_property
    def _dpsi_split(self) -> tuple[FieldForm, FieldForm]:
        return self.split(self.model.d(self.psi))

    @cached_property
    def _sigma(self) -> FieldForm:
        return hodge_h(self._dpsi_split[0])

    @cached_property
    def tau(self) -> FieldForm:
        """Torsion 2-form in the heptad."""
        P7, P14 = mv.lambda2_projectors()
        return apply_matrix(self._sigma, -P14)

    @cached_property
    def tau_p7(self) -> FieldForm:
        P7, _ = mv.lambda2_projectors()
        return apply_matrix(self._sigma, P7)

    @cached_property
    def tau_gen(self) -> FieldForm:
        return self.from_heptad(self.tau)

    @cached_property
    def _dtau_split(self) -> tuple[FieldForm, FieldForm]:
        return self.split(self.model.d(self.tau_gen))

    @property
    def dtau(self) -> FieldForm:
        return self._dtau_split[0]

    @cached_property
    def normsq(self) -> Expr:
        return sx.add(*[sx.mul(c, c) for c in self.tau.terms.values()])

    @cached_property
    def tau2(self) -> FieldForm:
        return wedge(self.tau, self.tau)

    @cached_property
    def tau3(self) -> FieldForm:
        return wedge(self.tau2, self.tau)

    def d_heptad(self, b: FieldForm) -> tuple[FieldForm, FieldForm]:
        """Exterior derivative of a heptad form, split as in ``split``."""
        return self.split(self.model.d(self.from_heptad(b)))

    # -- numeric views ------------------------------------------------------
    def tau_num(self, S: Samples) -> NumForm:
        return self.numeric(self.tau, S)

    def dtau_num(self, S: Samples) -> NumForm:
        return self.numeric(self.dtau, S)


def attach_g2(model: Model, heptad: Sequence[HeptadItem], phi_ref: FieldForm | None = None,
              samples: Samples | None = None) -> G2Field:
    """Attach the standard 3-form in the heptad; if a reference 3-form is
    given it must agree with it (adapted-frame check)."""
    G = G2Field(model, heptad)
    if phi_ref is not None:
        S = samples if samples is not None else model.sample(8, 0)
        G.check_adapted(phi_ref, S)
    return G


# ---------------------------------------------------------------------------
# constant-coefficient maps on heptad forms

def hodge_h(b: FieldForm) -> FieldForm:
    target, signs = mv.hodge_table(b.degree)
    pos = mv.position(b.degree)
    out_basis = mv.basis(7 - b.degree)
    return FieldForm(7 - b.degree, {out_basis[target[pos[J]]]: sx.mul(int(signs[pos[J]]), c)
                                    for J, c in b.terms.items()})


def apply_matrix(b: FieldForm, M: np.ndarray, out_degree: int | None = None) -> FieldForm:
    """Apply a constant matrix to the coefficient vector of a heptad form."""
    k = b.degree
    out_degree = k if out_degree is None else out_degree
    pos = mv.position(k)
    out_basis = mv.basis(out_degree)
    acc = _Acc()
    for J, c in b.terms.items():
        col = M[:, pos[J]]
        for r in np.flatnonzero(np.abs(col) > 1e-15):
            acc.put(out_basis[r], sx.mul(float(col[r]), c))
    return acc.form(out_degree)


def _sup(x) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


# ---------------------------------------------------------------------------
# closure and torsion

def closure_residual(G: G2Field, S: Samples) -> float:
    return sup_norm(G.dphi, S)


@dataclass
class TorsionData:
    tau: NumForm
    T: np.ndarray
    normsq: np.ndarray
    p7_residual: float
    vertical_residual: float
    reconstruction_residual: float
    membership_residual: float
    g2_defect: float


def torsion_matrix(tau: NumForm) -> np.ndarray:
    """T with tau = 3 T_ij e^i ^ e^j, i.e. T_ij = tau_ij / 6."""
    return mv.two_form_matrix(tau) / 6.0


def torsion(G: G2Field, S: Samples) -> TorsionData:
    tau = G.tau_num(S)
    dpsi_h, rest = G._dpsi_split
    dpsi = G.numeric(dpsi_h, S)
    recon = dpsi - mv.wedge(tau, mv.phi())
    T = torsion_matrix(tau)
    return TorsionData(
        tau=tau,
        T=T,
        normsq=mv.form_inner(tau, tau),
        p7_residual=_sup(G.numeric(G.tau_p7, S).coeffs),
        vertical_residual=sup_norm(rest, S),
        reconstruction_residual=_sup(recon.coeffs),
        membership_residual=_sup(mv.wedge(tau, mv.psi()).coeffs),
        g2_defect=_sup(mv.g2_defect(T)),
    )


def classify_torsion(tau: NumForm, rel_tol: float = 1e-8, zero_tol: float = 1e-12) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Per point: 'zero', 'positive', 'negative' or 'generic', with |tau|^2 and
    |tau^3|^2."""
    n2 = mv.form_inner(tau, tau).real
    t3 = mv.wedge(mv.wedge(tau, tau), tau)
    n3 = mv.form_inner(t3, t3).real
    labels = []
    for a, b in zip(np.atleast_1d(n2), np.atleast_1d(n3)):
        if a <= zero_tol:
            labels.append("zero")
        elif b <= rel_tol * a ** 3:
            labels.append("positive")
        elif abs(b / (2.0 / 3.0 * a ** 3) - 1.0) <= rel_tol:
            labels.append("negative")
        else:
            labels.append("generic")
    return labels, n2, n3


def type_margins(tau: NumForm) -> tuple[np.ndarray, np.ndarray]:
    """Relative distances from the positive and negative type conditions."""
    n2 = mv.form_inner(tau, tau).real
    t3 = mv.wedge(mv.wedge(tau, tau), tau)
    n3 = mv.form_inner(t3, t3).real
    return n3 / n2 ** 3, np.abs(n3 / (2.0 / 3.0 * n2 ** 3) - 1.0)


# ---------------------------------------------------------------------------
# quadratic condition

@dataclass
class QuadraticFit:
    lam: float | None
    residual: float
    spread: float
    per_point: np.ndarray
    indeterminate: bool = False


def quadratic_parts(tau: NumForm) -> tuple[NumForm, NumForm]:
    """(A, B) with the quadratic condition reading d tau = A + lambda B."""
    ph = mv.phi()
    n2 = mv.form_inner(tau, tau)
    A = ph.scale(n2 / 7.0) if tau.batch else ph.scale(n2 / 7.0)
    B = A + mv.hodge(mv.wedge(tau, tau))
    return A, B


def fit_lambda_numeric(tau: NumForm, dtau: NumForm) -> QuadraticFit:
    A, B = quadratic_parts(tau)
    bb = mv.form_inner(B, B).real
    if np.any(np.sqrt(np.abs(bb)) < 1e-10):
        return QuadraticFit(None, float("nan"), float("nan"), np.full(np.shape(bb), np.nan), True)
    lam = (mv.form_inner(dtau - A, B).real / bb)
    lam_mean = float(np.mean(lam))
    resid = dtau - A - B.scale(lam_mean)
    return QuadraticFit(lam_mean, _sup(resid.coeffs), float(np.max(lam) - np.min(lam)), lam)


def fit_lambda(G: G2Field, S: Samples) -> QuadraticFit:
    return fit_lambda_numeric(G.tau_num(S), G.dtau_num(S))


@dataclass
class HTensor:
    H: np.ndarray
    fit_residual: float
    quadratic_residual: float


def _h_design() -> np.ndarray:
    basis = mv.traceless_sym_basis()
    cols = [mv.sym_to_three_form(H_COEFF * B).coeffs.real for B in basis]
    A = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(A, tol=1e-10) < 27:
        raise G2Error("H system is rank deficient")
    return A


def extract_H(T: np.ndarray, dtau: NumForm, lam: float | None) -> HTensor:
    """Least-squares symmetric traceless H with
    d tau = eps_ikl (21 H_ij - 3 T_im T_mj) e^jkl, and the residual of
    H = ((1 - 6 lam)/7) (T_ik T_kj + (1/7) delta_ij T_kl T_kl)."""
    A = _h_design()
    T2 = T @ T
    rhs = dtau.coeffs - mv.sym_to_three_form(T2_COEFF * T2).coeffs
    x, *_ = np.linalg.lstsq(A, rhs.real.T if rhs.ndim > 1 else rhs.real, rcond=None)
    x = x.T if rhs.ndim > 1 else x
    H = np.einsum("...a,aij->...ij", x, mv.traceless_sym_basis())
    fit = rhs.real - x @ A.T
    if lam is None:
        return HTensor(H, _sup(fit), float("nan"))
    TT = np.einsum("...kl,...kl->...", T, T).real
    target = (1 - 6 * lam) / 7.0 * (T2.real + TT[..., None, None] * np.eye(7) / 7.0)
    return HTensor(H, _sup(fit), _sup(H - target))


# ---------------------------------------------------------------------------
# identities of Bryant and ERP consequences

def _d_numeric(G: G2Field, b: FieldForm, S: Samples) -> tuple[NumForm, float]:
    h, rest = G.d_heptad(b)
    return G.numeric(h, S), sup_norm(rest, S)


def bryant_identity_residuals(G: G2Field, S: Samples, lam: float) -> tuple[float, float]:
    tau = G.tau_num(S)
    n2 = mv.form_inner(tau, tau)
    dt3, v1 = _d_numeric(G, G.tau3, S)
    r466 = dt3 - mv.volume().scale(3 * (6 * lam - 1) / 7.0 * n2 ** 2)
    dn2, v2 = _d_numeric(G, FieldForm.scalar(G.normsq), S)
    t3 = mv.wedge(mv.wedge(tau, tau), tau)
    r469 = dn2.scale(3 * lam - 4) - mv.hodge(t3).scale(7 * lam * (2 * lam - 1))
    return max(_sup(r466.coeffs), v1), max(_sup(r469.coeffs), v2)


def erp_residuals(G: G2Field, S: Samples) -> dict[str, float]:
    """d|tau|^2, d(tau^tau) and d*(tau^tau) (all vanish for ERP structures)."""
    out = {}
    dn2, v = _d_numeric(G, FieldForm.scalar(G.normsq), S)
    out["d_normsq"] = max(_sup(dn2.coeffs), v)
    dtt, v = _d_numeric(G, G.tau2, S)
    out["d_tau2"] = max(_sup(dtt.coeffs), v)
    dstt, v = _d_numeric(G, hodge_h(G.tau2), S)
    out["d_star_tau2"] = max(_sup(dstt.coeffs), v)
    return out


def flow_family_residual(G: G2Field, S: Samples, k: ExprLike, nu_block=(0, 1, 2)) -> float:
    """Residual of d tau = 12 k^2 (phi - e^{nu block})."""
    kk = S.eval(sx.as_expr(k)).real
    block = NumForm.basis_form(tuple(nu_block))
    s, _ = sort_sign(nu_block)
    target = (mv.phi() - block.scale(s)).scale(12 * kk ** 2)
    return _sup((G.dtau_num(S) - NumForm(3, np.broadcast_to(target.coeffs, (S.n, 35)))).coeffs)


# ---------------------------------------------------------------------------
# curvature

def ricci_numeric(tau: NumForm, dtau: NumForm) -> tuple[np.ndarray, np.ndarray]:
    n2 = mv.form_inner(tau, tau)
    gamma = dtau - mv.hodge(mv.wedge(tau, tau)).scale(0.5)
    Ric = n2[..., None, None] * np.eye(7) / 4.0 - mv.j_map(gamma) / 4.0
    return -0.5 * n2, Ric


def ricci(G: G2Field, S: Samples) -> tuple[np.ndarray, np.ndarray]:
    return ricci_numeric(G.tau_num(S), G.dtau_num(S))


def lie_group_ricci(c: np.ndarray) -> np.ndarray:
    """Ricci tensor of a left-invariant metric with orthonormal coframe w_i and
    dw_k = -1/2 c^k_ij w_i ^ w_j, i.e. [e_i, e_j] = c^k_ij e_k."""
    n = c.shape[0]
    # Levi-Civita via Koszul: g(nabla_i e_j, e_k) = 1/2 (c_ijk - c_jki + c_kij)
    C = np.einsum("kij->ijk", c)  # C[i,j,k] = <[e_i,e_j], e_k>
    Gam = 0.5 * (C - np.einsum("jki->ijk", C) + np.einsum("kij->ijk", C))
    # R(e_i,e_j)e_k = nabla_i nabla_j e_k - nabla_j nabla_i e_k - nabla_[e_i,e_j] e_k
    R = (np.einsum("jkm,iml->ijkl", Gam, Gam) - np.einsum("ikm,jml->ijkl", Gam, Gam)
         - np.einsum("ijm,mkl->ijkl", C, Gam))
    # Ric(j,k) = sum_i <R(e_i, e_j) e_k, e_i>
    return np.einsum("ijki->jk", R)


def structure_constants(G: G2Field) -> np.ndarray:
    """c^k_ij of a constant-coefficient model in the heptad (no vertical terms)."""
    c = np.zeros((7, 7, 7))
    for k in range(7):
        g = G.hgen[k]
        h, rest = G.split(G.model.structure[g])
        if not rest.is_zero():
            raise G2Error("model has vertical structure terms")
        for (i, j), e in h.terms.items():
            e = sx.mul(e, G.hscale[k])
            if any(sx.free_symbols(e)):
                raise G2Error("structure coefficients are not constant")
            s = complex(sx.evaluate(e, {})).real
            c[k, i, j] = -s
            c[k, j, i] = s
    return c


# ---------------------------------------------------------------------------
# Lie derivatives and solitons

def interior_gen(G: G2Field, V: Sequence[ExprLike], a: FieldForm) -> FieldForm:
    """Contraction with V = sum V_i e_i^*, e_i^* dual to the heptad."""
    comps = {}
    for i, v in enumerate(V):
        v = sx.as_expr(v)
        if not v.is_zero():
            comps[G.hgen[i]] = sx.mul(v, G.hinv[i])
    acc = _Acc()
    for I, c in a.terms.items():
        for slot, g in enumerate(I):
            vg = comps.get(g)
            if vg is None:
                continue
            acc.put(I[:slot] + I[slot + 1:], sx.mul((-1) ** slot, vg, c))
    return acc.form(a.degree - 1)


def lie_derivative(G: G2Field, V: Sequence[ExprLike], a: FieldForm) -> FieldForm:
    """Cartan's formula L_V a = d(V _| a) + V _| da on generator forms."""
    M = G.model
    out = M.d(interior_gen(G, V, a)) if a.degree > 0 else FieldForm(a.degree + 1)
    return out + interior_gen(G, V, M.d(a))


def soliton_residual(G: G2Field, V: Sequence[ExprLike], c: ExprLike, S: Samples) -> float:
    """Sup of |d tau - c phi - L_V phi| at the samples."""
    lv = lie_derivative(G, V, G.phi)
    lv_h, rest = G.split(lv)
    diff = G.dtau - G.phi_h.scale(c) - lv_h
    return max(sup_norm(diff, S), sup_norm(rest, S))


# ---------------------------------------------------------------------------
# characteristic variety

def _wedge_one_matrix(xi: np.ndarray) -> np.ndarray:
    """Matrix of beta -> beta ^ xi on 2-forms (35 x 21)."""
    W = mv.wedge_table(2, 1)
    return np.einsum("ijk,j->ki", W, xi)


def characteristic_kernel(xi) -> int:
    """dim {beta in Lambda^2_14 : beta ^ xi = 0}."""
    xi = np.asarray(xi, dtype=float)
    if np.linalg.norm(xi) == 0:
        raise ValueError("xi must be nonzero")
    M = _wedge_one_matrix(xi / np.linalg.norm(xi)) @ mv.lambda2_14_basis()
    return 14 - int(np.linalg.matrix_rank(M, tol=1e-10))


def annihilator_dimension(xi) -> int:
    """dim {beta in Lambda^2 : beta ^ xi = 0}."""
    xi = np.asarray(xi, dtype=float)
    if np.linalg.norm(xi) == 0:
        raise ValueError("xi must be nonzero")
    return 21 - int(np.linalg.matrix_rank(_wedge_one_matrix(xi / np.linalg.norm(xi)), tol=1e-10))


def annihilator_meets_14(xi) -> int:
    """Dimension of the intersection of the annihilator of xi with Lambda^2_14."""
    xi = np.asarray(xi, dtype=float) / np.linalg.norm(xi)
    W = _wedge_one_matrix(xi)
    _, s, Vt = np.linalg.svd(W)
    null = Vt[np.sum(s > 1e-10):].T
    B = mv.lambda2_14_basis()
    stacked = np.hstack([null, B])
    return null.shape[1] + B.shape[1] - int(np.linalg.matrix_rank(stacked, tol=1e-10))


# ---------------------------------------------------------------------------
# quadric immersions

@dataclass
class ImmersionResult:
    norm_residual: float
    metric_residual: float
    degenerate: bool


def quadric_immersion_check(u: Sequence[ExprLike], coords: Sequence[str], signature: Sequence[int],
                            claimed: Sequence[Sequence[ExprLike]], grid: dict[str, np.ndarray]) -> ImmersionResult:
    """Check <u,u> = -1 and compare the induced metric with ``claimed``."""
    u = [sx.as_expr(x) for x in u]
    sig = np.asarray(signature, dtype=float)
    ev = sx.Evaluator(grid)
    U = np.stack([np.broadcast_to(ev(x), np.shape(next(iter(grid.values())))) for x in u])
    norm = np.einsum("i,i...->...", sig, U * U)
    dU = [np.stack([np.broadcast_to(ev(sx.diff(x, c)), U.shape[1:]) for x in u]) for c in coords]
    k = len(coords)
    worst = 0.0
    gram = np.zeros((k, k) + U.shape[1:], dtype=complex)
    for a in range(k):
        for b in range(k):
            gram[a, b] = np.einsum("i,i...->...", sig, dU[a] * dU[b])
            target = np.broadcast_to(ev(sx.as_expr(claimed[a][b])), U.shape[1:])
            worst = max(worst, _sup(gram[a, b] - target))
    gm = np.moveaxis(gram.reshape(k, k, -1), -1, 0)
    degenerate = bool(np.any(np.abs(np.linalg.det(gm)) < 1e-12))
    return ImmersionResult(_sup(norm + 1.0), worst, degenerate)
