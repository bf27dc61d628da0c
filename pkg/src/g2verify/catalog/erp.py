"""ERP entries: Bryant's bundle model and the type-S examples."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .. import symexpr as sx
from ..coframe import Constant, FieldForm, Model, Scalar, wedge
from ..g2ops import attach_g2
from .base import Built, CForm, Expected, FlowSpec, ImmersionSpec, csum, solve_real_structure

SIXTH = Fraction(1, 6)


def _gen(i: int, c=1) -> FieldForm:
    return FieldForm.gen(i, c)


# ---------------------------------------------------------------------------
# Bryant's example on the U(2)+ bundle

def build_bryant() -> Built:
    gens = ["w1", "w2", "w3", "w4", "w5", "w6", "w7", "K1", "K2", "K3", "K4"]
    Z = FieldForm(1)
    w = [_gen(i) for i in range(7)]
    K = [_gen(7 + i) for i in range(4)]
    # complex frame: nu_{a b}, eta_a and the u(2) connection kappa
    nu = [[CForm(Z, -w[0]), CForm(-w[1], w[2])], [CForm(w[1], w[2]), CForm(Z, w[0])]]
    eta = [CForm(w[3], w[4]), CForm(-w[5], w[6])]
    ka = [[CForm(Z, K[0]), CForm(K[2], K[3])], [CForm(-K[2], K[3]), CForm(Z, K[1])]]
    k = sx.cname("k")
    ik = (0, k)
    deta = [csum([-(ka[a][b] ^ eta[b]) + (nu[a][b] ^ eta[b]) * ik for b in range(2)], 2) for a in range(2)]
    dnu = [[csum([-(ka[a][c] ^ nu[c][b]) + (ka[c][b] ^ nu[a][c]) for c in range(2)], 2)
            for b in range(2)] for a in range(2)]
    dka = [[csum([-(ka[a][c] ^ ka[c][b]) + (nu[a][c] ^ nu[c][b]) * sx.mul(k, k) for c in range(2)], 2)
            for b in range(2)] for a in range(2)]
    defs = [nu[0][0], nu[0][1], nu[1][1], nu[1][0], eta[0], eta[1], ka[0][0], ka[1][1], ka[0][1], ka[1][0]]
    rhs = [dnu[0][0], dnu[0][1], dnu[1][1], dnu[1][0], deta[0], deta[1], dka[0][0], dka[1][1], dka[0][1], dka[1][0]]
    dg = solve_real_structure(len(gens), defs, rhs)
    M = Model("bryant_erp", gens, dict(zip(gens, dg)), constants=[Constant("k", 0.5, 2.0)],
              notes="U(2)+ bundle: d eta = -kappa eta + i k nu eta, d kappa = -kappa kappa + k^2 nu nu")
    # phi = -1/12 nu_ab nu_bc nu_ca + 1/2 nu_ab conj(eta_a) eta_b
    cubic = csum([(nu[a][b] ^ nu[b][c]) ^ nu[c][a] for a in range(2) for b in range(2) for c in range(2)], 3)
    mixed = csum([(nu[a][b] ^ eta[a].conj()) ^ eta[b] for a in range(2) for b in range(2)], 3)
    phi_ref = (cubic * Fraction(-1, 12) + mixed * Fraction(1, 2)).re
    G = attach_g2(M, gens[:7], phi_ref)
    exp = Expected("quadratic", SIXTH, "positive", erp=True, flow=FlowSpec(k, (0, 1, 2)),
                   metadata={"complex_frame": [
                       "nu11 = -i w1", "nu12 = -w2 + i w3", "nu22 = i w1",
                       "eta1 = w4 + i w5", "eta2 = -w6 + i w7",
                       "kappa11 = i K1", "kappa22 = i K2", "kappa12 = K3 + i K4"]})
    return Built("bryant_erp", M, G, exp, phi_ref)


# ---------------------------------------------------------------------------
# type S: d w_i = -psi_ij w_j on the base and d w_{4..7} = -mu ^ w_{4..7}

# psi31 enters the mu matrix with this sign; +1 leaves d^2 != 0 on the
# cohomogeneity-one M3 model, where psi12 and psi31 are nonzero.
PSI31_SIGN = -1


def _mu_matrix(sig, psi12, psi31, psi23, rho12, w):
    """The 4x4 matrix of 1-forms (times 1/2) acting on (w4, w5, w6, w7)."""
    psi31 = psi31 * PSI31_SIGN
    s11, s12, s13 = sig[0]
    s21, s22, s23 = sig[1]
    w1, w2, w3 = w
    rows = [
        [-s12 - s23 - w1, s13 - s22 - psi23 + rho12, s21 + psi31 - w3, s11 + psi12 - w2],
        [s13 - s22 + psi23 - rho12, s12 + s23 - w1, -s11 + psi12 - w2, s21 - psi31 + w3],
        [s21 - psi31 - w3, -s11 - psi12 - w2, s23 - s12 + w1, s22 + s13 - psi23 - rho12],
        [s11 - psi12 - w2, s21 + psi31 + w3, s22 + s13 + psi23 + rho12, -s23 + s12 + w1],
    ]
    return [[e * Fraction(1, 2) for e in row] for row in rows]


def _type_s_structure(w, sig, psi12, psi31, psi23, rho12) -> list[FieldForm]:
    """d w_1..d w_7 for a type-S model."""
    Z = FieldForm(1)
    psi = [[Z, psi12, -psi31], [-psi12, Z, psi23], [psi31, -psi23, Z]]
    out = []
    for i in range(3):
        acc = FieldForm(2)
        for j in range(3):
            acc = acc - wedge(psi[i][j], w[j])
        out.append(acc)
    mu = _mu_matrix(sig, psi12, psi31, psi23, rho12, w[:3])
    for a in range(4):
        acc = FieldForm(2)
        for b in range(4):
            acc = acc - wedge(mu[a][b], w[3 + b])
        out.append(acc)
    return out


def _tetra_roots() -> dict:
    return {"roots": "arranged in a regular tetrahedron"}


def gj_immersion() -> ImmersionSpec:
    x, y, z = sx.var("x"), sx.var("y"), sx.var("z")
    c = sx.power(3, Fraction(-1, 2))
    u = [sx.mul(c, f) for f in (sx.cosh(x), sx.sinh(x), sx.sinh(y), sx.sinh(z), sx.cosh(y), sx.cosh(z))]
    third = Fraction(1, 3)
    claimed = [[third, 0, 0], [0, third, 0], [0, 0, third]]
    grid = _grid({"x": (-1.5, 1.5, 20), "y": (-1.5, 1.5, 20), "z": (-1.5, 1.5, 8)})
    return ImmersionSpec("GJ", u, ["x", "y", "z"], [-1, 1, 1, 1, -1, -1], claimed, grid)


def m2_immersion() -> ImmersionSpec:
    x, y, t = sx.var("x"), sx.var("y"), sx.var("theta")
    u = [sx.mul(sx.cosh(x), sx.cosh(y)), sx.mul(sx.cosh(x), sx.sinh(y)),
         sx.mul(-1, sx.sinh(x), sx.sin(t), sx.cosh(y)), sx.mul(sx.sinh(x), sx.cos(t), sx.cosh(y)),
         sx.mul(sx.sinh(x), sx.cos(t), sx.sinh(y)), sx.mul(sx.sinh(x), sx.sin(t), sx.sinh(y))]
    claimed = [[1, 0, 0], [0, 1, 0], [0, 0, sx.power(sx.sinh(x), 2)]]
    grid = _grid({"y": (-1.5, 1.5, 20), "x": (0.1, 2.0, 20), "theta": (0.0, 2 * np.pi, 8)})
    return ImmersionSpec("M2", u, ["y", "x", "theta"], [-1, 1, 1, 1, -1, -1], claimed, grid)


def m3_immersion() -> ImmersionSpec:
    x, y, t = sx.var("x"), sx.var("y"), sx.var("theta")
    s6 = Fraction(1, 6)
    u = [sx.mul(s6, sx.add(sx.mul(2, sx.cosh(x)), sx.mul(4, sx.cosh(y)))),
         sx.mul(s6, 2, sx.sqrt(3), sx.sinh(x)),
         sx.mul(s6, 2, sx.sqrt(6), sx.sinh(y), sx.sin(t)),
         sx.mul(s6, 2, sx.sqrt(6), sx.sinh(y), sx.cos(t)),
         sx.mul(s6, -2, sx.sqrt(2), sx.add(sx.cosh(x), sx.mul(-1, sx.cosh(y)))),
         0]
    claimed = [[Fraction(1, 3), 0, 0], [0, Fraction(2, 3), 0],
               [0, 0, sx.mul(Fraction(2, 3), sx.power(sx.sinh(y), 2))]]
    grid = _grid({"x": (-1.5, 1.5, 20), "y": (0.1, 2.0, 20), "theta": (0.0, 2 * np.pi, 8)})
    return ImmersionSpec("M3", u, ["x", "y", "theta"], [-1, 1, 1, 1, -1, -1], claimed, grid)


def _grid(axes: dict) -> dict:
    names = list(axes)
    lin = [np.linspace(lo, hi, n) for lo, hi, n in axes.values()]
    mesh = np.meshgrid(*lin, indexing="ij")
    return {k: m.ravel() for k, m in zip(names, mesh)}


def build_lauret() -> Built:
    gens = [f"w{i}" for i in range(1, 8)]
    w = [_gen(i) for i in range(7)]
    Z = FieldForm(1)
    # the Gauss equation sigma_ai ^ sigma_aj = -w_i ^ w_j forces r = 1/sqrt(2)
    r = sx.power(2, Fraction(-1, 2))
    q = sx.mul(sx.sqrt(2), r)
    w1, w2, w3 = w[:3]
    sig = [[w3 * sx.mul(-1, q), w2 * r, w1 * sx.mul(-1, q) - w3 * r],
           [w2 * sx.mul(-1, q), w1 * sx.mul(-1, q) + w3 * r, w2 * r]]
    st = _type_s_structure(w, sig, Z, Z, Z, Z)
    M = Model("lauret_GJ", gens, dict(zip(gens, st)),
              notes="Lie algebra: dw1 = dw2 = dw3 = 0 with the 4x4 block on w4..w7")
    G = attach_g2(M, gens)
    exp = Expected("quadratic", SIXTH, "positive", erp=True, flow=FlowSpec(Fraction(1, 2), (0, 1, 2)),
                   immersions=[gj_immersion()], lie_group=True, metadata=_tetra_roots())
    return Built("lauret_GJ", M, G, exp)


def build_m2() -> Built:
    gens = [f"w{i}" for i in range(1, 8)] + ["p23"]
    w = [_gen(i) for i in range(7)]
    p23 = _gen(7)
    Z = FieldForm(1)
    w1, w2, w3 = w[:3]
    sig = [[w3, Z, w1], [-w2, -w1, Z]]
    st = _type_s_structure(w, sig, Z, Z, p23, p23)
    st.append(-wedge(w2, w3))
    M = Model("erp_M2", gens, dict(zip(gens, st)),
              notes="8-dimensional Lie algebra; roots: triple root and an antipodal single root")
    G = attach_g2(M, gens[:7])
    exp = Expected("quadratic", SIXTH, "positive", erp=True, flow=FlowSpec(Fraction(1, 2), (0, 1, 2)),
                   immersions=[m2_immersion()], metadata={"roots": "triple root and an antipodal single root"})
    return Built("erp_M2", M, G, exp)


C_M3 = sx.mul(3, sx.power(2, Fraction(-2, 3)))


def _m3_model(name: str, r: sx.ExprLike, s: sx.ExprLike, scalars=(), constraints=(), notes="") -> Model:
    gens = [f"w{i}" for i in range(1, 8)] + ["p23"]
    w = [_gen(i) for i in range(7)]
    p23 = _gen(7)
    Z = FieldForm(1)
    w1, w2, w3 = w[:3]
    r3 = sx.power(r, 3)
    sig = [[w1 * sx.mul(-2, r3), w2 * r3, w3 * r3], [Z, Z, Z]]
    st = _type_s_structure(w, sig, w2 * s, w3 * sx.mul(-1, s), p23, Z)
    st.append(-wedge(w2, w3) * sx.add(sx.power(r, 6), sx.mul(-1, s, s), 1))
    return Model(name, gens, dict(zip(gens, st)), scalars, constraints=constraints, notes=notes)


def build_m3_homog() -> Built:
    M = _m3_model("erp_M3_homog", sx.power(2, Fraction(-1, 6)), 0,
                  notes="constant invariants r = 2^(-1/6), s = 0; antipodal double roots")
    G = attach_g2(M, M.generators[:7])
    exp = Expected("quadratic", SIXTH, "positive", erp=True, flow=FlowSpec(Fraction(1, 2), (0, 1, 2)),
                   immersions=[m3_immersion()], metadata={"roots": "antipodal double roots"})
    return Built("erp_M3_homog", M, G, exp)


def build_m3_cohom1() -> Built:
    r, s = sx.var("r"), sx.var("s")
    # s = (r^2 - 2^(-1/3)) sqrt(r^2 + 2^(2/3)) solves s^2 = r^6 - c r^2 + 1 with c = 3 2^(-2/3)
    s_rule = sx.mul(sx.add(sx.mul(r, r), sx.mul(-1, sx.power(2, Fraction(-1, 3)))),
                    sx.sqrt(sx.add(sx.mul(r, r), sx.power(2, Fraction(2, 3)))))
    w1 = _gen(0)
    scal = [Scalar("r", w1 * sx.mul(r, s), ("uniform", 0.1, 0.88)),
            Scalar("s", w1 * sx.add(sx.mul(2, sx.power(r, 6)), sx.mul(s, s), -1), ("expr", s_rule))]
    constraint = sx.add(sx.mul(s, s), sx.mul(-1, sx.power(r, 6)), sx.mul(C_M3, r, r), -1)
    M = _m3_model("erp_M3_cohom1", r, s, scal, [constraint],
                  notes="cohomogeneity one: dr = r s w1, ds = (2 r^6 + s^2 - 1) w1, s^2 = r^6 - c r^2 + 1")
    G = attach_g2(M, M.generators[:7])
    exp = Expected("quadratic", SIXTH, "positive", erp=True, flow=FlowSpec(Fraction(1, 2), (0, 1, 2)),
                   immersions=[m3_immersion()], metadata={"c": "3 * 2^(-2/3)"})
    return Built("erp_M3_cohom1", M, G, exp)
