"""Negative-type entries: R+ x N over a 6-manifold N with a U(2)-structure.

Real generators: dr, varpi = P1 + i P2, theta_1 = T1 + i T2, theta_2 = T3 + i T4
and the u(2) connection kappa_11 = i K1, kappa_22 = i K2, kappa_12 = K3 + i K4.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares

from .. import symexpr as sx
from ..coframe import FieldForm, Model, Scalar, sup_norm, wedge
from ..g2ops import attach_g2
from .base import Built, CForm, Expected, ExtraCheck, _nice, csum, solve_real_structure

GENS = ["dr", "P1", "P2", "T1", "T2", "T3", "T4", "K1", "K2", "K3", "K4"]
EPS = [[0, Fraction(1, 2)], [Fraction(-1, 2), 0]]
SEMIBASIC = (1, 2, 3, 4, 5, 6)

# dK_i = (from -kappa ^ kappa) + sum of FROZEN[lam][i][(g, h)] P/T_g ^ P/T_h,
# generator indices into GENS.  Found by solve_curvature(lam), snapped to rationals.
FROZEN_CURVATURE: dict[Fraction, dict[int, dict[tuple, Fraction]]] = {
    Fraction(-1, 8): {0: {(1, 2): Fraction(9, 2)}, 1: {(1, 2): Fraction(9, 2)}, 2: {}, 3: {}},
    Fraction(3, 4): {
        0: {(1, 2): Fraction(25, 18), (3, 4): Fraction(-20, 9)},
        1: {(1, 2): Fraction(25, 18), (5, 6): Fraction(-20, 9)},
        2: {(3, 5): Fraction(10, 9), (4, 6): Fraction(10, 9)},
        3: {(3, 6): Fraction(-10, 9), (4, 5): Fraction(10, 9)},
    },
}
# phi for lambda = 3/4 closes only with varpi, theta rescaled by sqrt(A), sqrt(B)
SCALES_34 = (Fraction(100, 81), Fraction(80, 81))


def _frame():
    Z = FieldForm(1)
    g = [FieldForm.gen(i) for i in range(len(GENS))]
    varpi = CForm(g[1], g[2])
    theta = [CForm(g[3], g[4]), CForm(g[5], g[6])]
    K = g[7:]
    kappa = [[CForm(Z, K[0]), CForm(K[2], K[3])], [CForm(-K[2], K[3]), CForm(Z, K[1])]]
    return g, varpi, theta, kappa


def coefficients(lam: Fraction) -> tuple[sx.Expr, sx.Expr]:
    """(c_varpi, c_theta): the imaginary coefficients in
    d varpi = kappa_aa ^ varpi + i c_varpi eps_ab conj(theta_a ^ theta_b),
    d theta_a = -kappa_ab ^ theta_b + i c_theta eps_ab conj(varpi ^ theta_b)."""
    den = lam * (2 * lam - 1)
    cw = Fraction(-2, 49) * (lam + 1) * (8 * lam + 1) / den
    # 10/49 follows from the 7-dimensional equations with f = (3 lam - 4) / (28 lam (2 lam - 1) r)
    ct = Fraction(10, 49) * (5 * lam - 2) * (lam + 1) / den
    return sx.const(cw), sx.const(ct)


def exponents(lam: Fraction) -> tuple[Fraction, Fraction, Fraction]:
    """Powers of r multiplying varpi^conj(varpi), theta^conj(theta) and the cubic part of phi."""
    den = 49 * lam * (2 * lam - 1)
    a = (68 * lam ** 2 - 18 * lam + 12) / den
    b = (32 * lam ** 2 + 57 * lam - 24) / den
    c = 6 * (lam + 1) * (11 * lam - 3) / den
    return a, b, c


def _structure(lam: Fraction, c_theta=None, simple: bool = False, c_varpi=None) -> list[FieldForm]:
    """Real structure equations before curvature corrections."""
    g, varpi, theta, kappa = _frame()
    n = len(GENS)
    if simple:
        st = [FieldForm(2) for _ in range(n)]
        return st
    cw, ct = coefficients(lam)
    if c_theta is not None:
        ct = sx.as_expr(c_theta)
    if c_varpi is not None:
        cw = sx.as_expr(c_varpi)
    trace = kappa[0][0] + kappa[1][1]
    dvarpi = (trace ^ varpi) + csum([(theta[a].conj() ^ theta[b].conj()) * EPS[a][b]
                                     for a in range(2) for b in range(2) if EPS[a][b]], 2) * (0, cw)
    dtheta = [csum([-(kappa[a][b] ^ theta[b]) for b in range(2)], 2)
              + csum([(varpi.conj() ^ theta[b].conj()) * EPS[a][b] for b in range(2) if EPS[a][b]], 2)
              * (0, ct) for a in range(2)]
    kk = [[csum([kappa[a][c] ^ kappa[c][b] for c in range(2)], 2) for b in range(2)] for a in range(2)]
    dr = CForm(g[0])
    defs = [dr, varpi, theta[0], theta[1], kappa[0][0], kappa[1][1], kappa[0][1]]
    rhs = [CForm.zero(2), dvarpi, dtheta[0], dtheta[1], -kk[0][0], -kk[1][1], -kk[0][1]]
    return solve_real_structure(n, defs, rhs)


def _quadratic_basis() -> list[tuple[int, int]]:
    return list(combinations(SEMIBASIC, 2))


def _with_curvature(st: list[FieldForm], curv: dict[int, dict[tuple, Fraction]]) -> list[FieldForm]:
    out = list(st)
    for i, terms in curv.items():
        extra = FieldForm(2, {k: v for k, v in terms.items() if v != 0})
        out[7 + i] = out[7 + i] + extra
    return out


def _d2_vector(st: list[FieldForm], rows: list[int]) -> np.ndarray:
    """Constant coefficients of d(d w) for the listed generators."""
    M = Model("probe", GENS, dict(zip(GENS, st)))
    vec = []
    for i in rows:
        dd = M.d(st[i])
        for I in combinations(range(len(GENS)), 3):
            c = dd.terms.get(I)
            vec.append(0.0 if c is None else complex(sx.evaluate(c, {})).real)
    return np.array(vec)


def solve_curvature(lam: Fraction, c_theta=None, c_varpi=None) -> tuple[dict[int, dict[tuple, Fraction]], float]:
    """Curvature terms dK_i += x_ij (quadratic semibasic) making every d^2 vanish.

    d^2 of the semibasic generators is affine in x: solve it by least squares,
    then move inside its null space to kill the (quadratic) d^2 kappa rows.
    Returns coefficients snapped to rationals and the residual after snapping."""
    base = _structure(lam, c_theta, c_varpi=c_varpi)
    basis = _quadratic_basis()
    semis = list(SEMIBASIC)
    rows = list(range(len(GENS)))

    def curvature(x) -> dict[int, dict[tuple, float]]:
        return {i: {basis[j]: float(x[i * len(basis) + j]) for j in range(len(basis))
                    if abs(x[i * len(basis) + j]) > 1e-15} for i in range(4)}

    r0 = _d2_vector(base, semis)
    cols = [_d2_vector(_with_curvature(base, {i: {pair: Fraction(1)}}), semis) - r0
            for i in range(4) for pair in basis]
    A = np.stack(cols, axis=1)
    x0, *_ = np.linalg.lstsq(A, -r0, rcond=None)
    _, sv, vt = np.linalg.svd(A)
    null = vt[int((sv > 1e-9).sum()):].T
    sol = least_squares(lambda y: _d2_vector(_with_curvature(base, curvature(x0 + null @ y)), rows),
                        np.zeros(null.shape[1]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    x = x0 + null @ sol.x
    curv: dict[int, dict[tuple, Fraction]] = {i: {} for i in range(4)}
    for j, v in enumerate(x):
        q = _nice(float(v))
        if q != 0:
            curv[j // len(basis)][basis[j % len(basis)]] = q
    resid = float(np.max(np.abs(_d2_vector(_with_curvature(base, curv), rows))))
    return curv, resid


def build_negative(entry_id: str, lam: Fraction, curvature: dict | None = None, simple: bool = False, c_varpi=None,
                   c_theta=None, extras: list | None = None, notes: str = "",
                   scales: tuple = (1, 1)) -> Built:
    st = _structure(lam, c_theta, simple, c_varpi)
    if curvature:
        st = _with_curvature(st, curvature)
    r = sx.var("r")
    g = [FieldForm.gen(i) for i in range(len(GENS))]
    M = Model(entry_id, GENS, dict(zip(GENS, st)), [Scalar("r", g[0], ("uniform", 0.5, 2.0))], notes=notes)
    a, b, c = exponents(lam)
    ha = sx.mul(sx.sqrt(scales[0]), sx.power(r, a / 2))
    hb = sx.mul(sx.sqrt(scales[1]), sx.power(r, b / 2))
    heptad = ["dr", (ha, "P1"), (ha, "P2"), (hb, "T1"), (hb, "T2"), (hb, "T3"), (hb, "T4")]
    phi_ref = phi_reference(lam, scales)
    G = attach_g2(M, heptad, phi_ref)
    exp = Expected("quadratic", lam, "negative", extras=extras or [],
                   metadata={"exponents": [str(a), str(b), str(c)]})
    return Built(entry_id, M, G, exp, phi_ref)


def phi_reference(lam: Fraction, scales: tuple = (1, 1)) -> FieldForm:
    """i/2 dr ^ (A r^a varpi conj(varpi) + B r^b theta_a conj(theta_a))
    + 1/2 sqrt(A) B r^c (conj(eps_ab) varpi theta_a theta_b + c.c.)."""
    g, varpi, theta, _ = _frame()
    a, b, c = exponents(lam)
    r = sx.var("r")
    dr = CForm(g[0])
    A, B = (sx.as_expr(x) for x in scales)
    quad = (varpi ^ varpi.conj()) * sx.mul(A, sx.power(r, a)) \
        + csum([theta[k] ^ theta[k].conj() for k in range(2)], 2) * sx.mul(B, sx.power(r, b))
    first = (dr ^ quad) * (0, Fraction(1, 2))
    cubic = csum([((varpi ^ theta[i]) ^ theta[j]) * EPS[i][j] for i in range(2) for j in range(2) if EPS[i][j]], 3)
    second = (cubic + cubic.conj()) * sx.mul(Fraction(1, 2), sx.sqrt(A), B, sx.power(r, c))
    out = first + second
    return out.re


def su3_forms(scale_w=1, scale_t=1, scale_u=1):
    """(Omega, Re Upsilon, Im Upsilon) for
    Omega = i/2 (s_w varpi conj(varpi) + s_t theta_a conj(theta_a)),
    Upsilon = s_u eps_ab varpi theta_a theta_b."""
    _, varpi, theta, _ = _frame()
    om = ((varpi ^ varpi.conj()) * scale_w + csum([theta[k] ^ theta[k].conj() for k in range(2)], 2) * scale_t) \
        * (0, Fraction(1, 2))
    up = csum([((varpi ^ theta[i]) ^ theta[j]) * EPS[i][j] for i in range(2) for j in range(2) if EPS[i][j]], 3) \
        * scale_u
    return om.re, up.re, up.im


def nearly_kaehler_residual(B: Built, S) -> float:
    """sup of |d Om - 3 Re Up| and |d Im Up + 2 Om ^ Om| for the rescaled SU(3)-structure."""
    om, re, im = su3_forms(Fraction(25, 36), Fraction(10, 9), Fraction(25, 27))
    M = B.model
    return max(sup_norm(M.d(om) - re * 3, S), sup_norm(M.d(im) + wedge(om, om) * 2, S))


def build_m1_flat() -> Built:
    return build_negative("neg_m1_flat", Fraction(-1), simple=True,
                          notes="lambda = -1, A = H = 0: flat R^2 x R^4, every base generator closed")


def build_25() -> Built:
    return build_negative("neg_25_t2bundle", Fraction(2, 5),
                          notes="lambda = 2/5, A = H = 0 over flat hyperkaehler X: d kappa = -kappa ^ kappa")


def build_m18() -> Built:
    lam = Fraction(-1, 8)
    return build_negative("neg_m18_twistor", lam, FROZEN_CURVATURE[lam],
                          notes="lambda = -1/8, A = H = 0: twistor space of flat X; curvature closed up by d^2")


def build_34() -> Built:
    lam = Fraction(3, 4)
    nk = ExtraCheck("nearly_kaehler", nearly_kaehler_residual, 1e-9)
    return build_negative("neg_34_twistor", lam, FROZEN_CURVATURE[lam], extras=[nk], scales=SCALES_34,
                          notes="lambda = 3/4, A = H = 0: twistor space of an ASD Einstein X; curvature by d^2")
