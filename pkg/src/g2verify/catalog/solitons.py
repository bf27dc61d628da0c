"""Steady gradient Laplace solitons on R x N.

soliton_twistor: N the twistor space of flat R^4, closed-form f via Lambert W.
soliton_hk: N a flat T^2-type bundle over flat R^4, f defined implicitly.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .. import multivec as mv
from .. import symexpr as sx
from ..coframe import Constant, FieldForm, Model, Samples, Scalar, wedge, wedge_all
from ..g2ops import attach_g2
from .base import Built, ExtraCheck, Expected, SolitonSpec

GRID_POINTS = 50

# so(4) = su(2) + su(2) acting on n1..n4; Z rotates the twistor fibre
_SO4 = [[None, ("Z1", "X1"), ("Z2", "-X2"), ("-Z3", "-X3")],
        [("-Z1", "-X1"), None, ("-Z3", "X3"), ("-Z2", "-X2")],
        [("-Z2", "X2"), ("Z3", "-X3"), None, ("Z1", "-X1")],
        [("Z3", "X3"), ("Z2", "X2"), ("-Z1", "X1"), None]]


def _g(M_index: dict, name: str, coeff=1) -> FieldForm:
    if name.startswith("-"):
        return FieldForm.gen(M_index[name[1:]], sx.mul(-1, coeff))
    return FieldForm.gen(M_index[name], coeff)


def _su2(index: dict, names: list[str], k: int) -> dict[str, FieldForm]:
    a, b, c = (_g(index, x) for x in names)
    return {names[0]: wedge(b, c) * k, names[1]: wedge(c, a) * k, names[2]: wedge(a, b) * k}


def _max_abs(S: Samples, e) -> float:
    v = S.eval(e)
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _ode_check(exprs: list):
    return lambda B, S: max(_max_abs(S, e) for e in exprs)


def _relative_check(lhs, rhs):
    """|lhs - rhs| / max(1, |rhs|): absolute error at double precision scales with |rhs|."""
    def check(B: Built, S: Samples) -> float:
        a, b = S.eval(lhs), S.eval(rhs)
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if np.size(b) else 0.0
    return check


def _torsion_closed_form(c23, c45):
    """tau = c23 e23 + c45 (e45 + e67) in the heptad."""
    def check(B: Built, S: Samples) -> float:
        tau = B.g2.tau_num(S).coeffs
        pos = mv.position(2)
        want = np.zeros_like(tau)
        want[:, pos[(1, 2)]] = S.eval(c23)
        want[:, pos[(3, 4)]] = want[:, pos[(5, 6)]] = S.eval(c45)
        return float(np.max(np.abs(tau - want))) if tau.size else 0.0
    return check


# ---------------------------------------------------------------------------
# twistor family

def build_twistor() -> Built:
    gens = ["dr", "Z1", "Z2", "Z3", "X1", "X2", "X3", "n1", "n2", "n3", "n4"]
    ix = {g: i for i, g in enumerate(gens)}
    st: dict[str, FieldForm] = {"dr": FieldForm(2)}
    for i in range(4):
        acc = FieldForm(2)
        for j in range(4):
            if _SO4[i][j] is not None:
                z, x = _SO4[i][j]
                acc = acc - wedge(_g(ix, z) + _g(ix, x), _g(ix, f"n{j + 1}"))
        st[f"n{i + 1}"] = acc
    st.update(_su2(ix, ["Z1", "Z2", "Z3"], -2))
    st.update(_su2(ix, ["X1", "X2", "X3"], -2))
    r, k1, k2 = sx.var("r"), sx.cname("k1"), sx.cname("k2")
    dr = FieldForm.gen(0)
    # f = k1 (W(exp(-2r/k1)/k1) + 1) solves f' = -(f v + 2) with v = -2 k1/f^2
    arg = sx.mul(sx.exp(sx.mul(-2, r, sx.power(k1, -1))), sx.power(k1, -1))
    w = sx.lambertw(arg)
    f = sx.mul(k1, sx.add(w, 1))
    g2 = sx.mul(sx.add(f, sx.mul(-1, k1)), sx.power(sx.mul(k1, k2, f), -1))
    g = sx.sqrt(g2)
    v = sx.mul(-2, k1, sx.power(f, -2))
    h = sx.log(sx.mul(sx.add(f, sx.mul(-1, k1)), sx.power(f, -1)))
    M = Model("soliton_twistor", gens, st, [Scalar("r", dr, ("uniform", -2.0, 1.0))],
              [Constant("k1", 0.5, 2.0), Constant("k2", 0.5, 2.0)],
              notes="twistor space of flat R^4 times R; dZ = -2 Z^Z, dX = -2 X^X, dn = -(Z + X) n")
    heptad = ["dr", (f, "Z2"), (f, "Z3"), (g, "n1"), (g, "n2"), (sx.mul(-1, g), "n4"), (g, "n3")]
    n1, n2, n3, n4, Z2, Z3 = (_g(ix, x) for x in ["n1", "n2", "n3", "n4", "Z2", "Z3"])
    vol_f, omega_x = wedge(Z2, Z3), wedge(n1, n2) + wedge(n3, n4)
    gamma = wedge_all(Z3, n3, n1) + wedge_all(Z3, n2, n4) + wedge_all(Z2, n4, n1) + wedge_all(Z2, n3, n2)
    phi_ref = wedge(dr, vol_f * sx.mul(f, f) + omega_x * g2) + gamma * sx.mul(f, g2)
    G = attach_g2(M, heptad, phi_ref)

    fp, gp, vp = (sx.diff(e, "r") for e in (f, g, v))
    extras = [
        ExtraCheck("closed_condition", _ode_check([sx.add(gp, sx.mul(g, sx.add(fp, 2), sx.power(sx.mul(2, f), -1)))]),
                   1e-9),
        ExtraCheck("soliton_ode", _ode_check([
            sx.add(fp, sx.mul(f, v), 2),
            sx.add(vp, sx.mul(-2, v, sx.add(sx.mul(f, v), 2), sx.power(f, -1)))]), 1e-9),
        ExtraCheck("torsion_closed_form", _torsion_closed_form(sx.mul(2, sx.add(fp, 2), sx.power(f, -1)),
                                                       sx.mul(-1, sx.add(fp, 2), sx.power(f, -1))), 1e-9),
        ExtraCheck("lambert_identity", _relative_check(sx.mul(w, sx.exp(w)), arg), 1e-12),
        ExtraCheck("gradient_potential", _ode_check([sx.add(sx.diff(h, "r"), sx.mul(-1, v))]), 1e-9),
        ExtraCheck("volume_density", _ode_check([
            sx.add(sx.mul(f, f, g2, g2), sx.mul(-1, sx.power(sx.add(f, sx.mul(-1, k1)), 2),
                                                 sx.power(sx.mul(k1, k2), -2)))]), 1e-9),
    ]
    exp = Expected("soliton", torsion_type="negative", soliton=SolitonSpec([v, 0, 0, 0, 0, 0, 0], 0),
                   extras=extras, metadata={"f": sx.to_string(f), "g^2": sx.to_string(g2),
                                            "v": sx.to_string(v), "potential": sx.to_string(h)})
    grid = _r_grid(M, -2.0, 1.0, {"k1": 1.25, "k2": 0.75})
    return Built("soliton_twistor", M, G, exp, phi_ref, grid)


def _r_grid(M: Model, lo: float, hi: float, consts: dict[str, float]):
    def grid(n: int = GRID_POINTS) -> Samples:
        return M.grid({"r": np.linspace(lo, hi, n), **consts})
    return grid


# ---------------------------------------------------------------------------
# hyperkaehler family

def hk_inverse_function(f, k1, k2):
    """Left-hand side L(f) of the implicit equation for f on (0, k1)."""
    return sx.add(
        sx.mul(2, sx.power(k2, 2), sx.power(k1, -3), sx.add(sx.log(f), sx.mul(-1, sx.log(sx.add(k1, sx.mul(-1, f)))))),
        sx.mul(sx.power(k2, 2), sx.power(k1, -2),
               sx.add(sx.power(sx.add(k1, sx.mul(-1, f)), -1), sx.mul(-1, sx.power(f, -1)))))


HK_SIGN = -1  # f solves L(f) = HK_SIGN * r; the other sign contradicts the soliton ODE


def build_hk() -> Built:
    gens = ["dr", "p1", "p2", "n1", "n2", "n3", "n4", "X1", "X2", "X3"]
    ix = {g: i for i, g in enumerate(gens)}
    A = [[None, "X1", "-X2", "-X3"], ["-X1", None, "X3", "-X2"], ["X2", "-X3", None, "-X1"], ["X3", "X2", "X1", None]]
    st: dict[str, FieldForm] = {"dr": FieldForm(2)}
    n = [_g(ix, f"n{i}") for i in range(1, 5)]
    for i in range(4):
        acc = FieldForm(2)
        for j in range(4):
            if A[i][j] is not None:
                acc = acc - wedge(_g(ix, A[i][j]), n[j])
        st[f"n{i + 1}"] = acc
    omega_i = wedge(n[0], n[1]) + wedge(n[2], n[3])
    omega_j = wedge(n[0], n[2]) + wedge(n[3], n[1])
    omega_k = wedge(n[3], n[0]) + wedge(n[2], n[1])
    st["p1"] = omega_j
    st["p2"] = omega_k
    st.update(_su2(ix, ["X1", "X2", "X3"], -2))
    r, f, k1, k2 = sx.var("r"), sx.var("f"), sx.cname("k1"), sx.cname("k2")
    L = hk_inverse_function(f, k1, k2)
    Lp = sx.diff(L, "f")
    dr = FieldForm.gen(0)
    eps = Fraction(1, 10 ** 9)
    lo, hi = sx.mul(eps, k1), sx.mul(1 - eps, k1)
    fscalar = Scalar("f", dr * sx.mul(HK_SIGN, sx.power(Lp, -1)), ("implicit", sx.add(L, sx.mul(-HK_SIGN, r)), lo, hi))
    M = Model("soliton_hk", gens, st, [Scalar("r", dr, ("uniform", -2.0, 2.0)), fscalar],
              [Constant("k1", 1.0, 2.0), Constant("k2", 0.5, 1.0)],
              notes="flat hyperkaehler R^4 with a flat T^2 fibre: dp1 = Omega_J, dp2 = Omega_K; "
                    "f is the root of L(f) = -r on (0, k1)")
    g2 = sx.mul(sx.power(k2, 2), sx.power(sx.mul(f, sx.add(k1, sx.mul(-1, f))), -1))
    g = sx.sqrt(g2)
    v = sx.mul(-2, k1, sx.power(g2, -1))
    h = sx.mul(2, sx.log(sx.mul(f, sx.power(sx.add(k1, sx.mul(-1, f)), -1))))
    heptad = ["dr", (f, "p1"), (f, "p2"), (g, "n1"), (g, "n2"), (sx.mul(-1, g), "n4"), (g, "n3")]
    p1, p2 = _g(ix, "p1"), _g(ix, "p2")
    phi_ref = (wedge(dr, wedge(p1, p2) * sx.mul(f, f) + omega_i * g2)
               - wedge(p2, omega_j) * sx.mul(f, g2) + wedge(p1, omega_k) * sx.mul(f, g2))
    G = attach_g2(M, heptad, phi_ref)

    def deriv(e):
        # d/dr through the implicit scalar f
        return sx.add(sx.diff(e, "r"), sx.mul(sx.diff(e, "f"), HK_SIGN, sx.power(Lp, -1)))

    fp, gp, vp = deriv(f), deriv(g), deriv(v)
    # tau = (f' g^2 - f^2)(2 f/g^2 pi1 ^ pi2 - Omega_I/f)
    tq = sx.add(sx.mul(fp, g2), sx.mul(-1, f, f))
    extras = [
        ExtraCheck("closed_condition", _ode_check([
            sx.add(gp, sx.mul(sx.add(sx.mul(fp, g2), sx.mul(f, f)), sx.power(sx.mul(2, f, g), -1)))]), 1e-9),
        ExtraCheck("soliton_ode", _ode_check([
            sx.add(fp, sx.mul(-1, f, sx.add(sx.mul(g2, v), sx.mul(2, f)), sx.power(sx.mul(2, g2), -1))),
            sx.add(gp, sx.mul(sx.add(sx.mul(g2, v), sx.mul(4, f)), sx.power(sx.mul(4, g), -1))),
            sx.add(vp, sx.mul(-1, v, sx.add(sx.mul(g2, v), sx.mul(4, f)), sx.power(sx.mul(2, g2), -1)))]), 1e-9),
        ExtraCheck("torsion_closed_form", _torsion_closed_form(
            sx.mul(2, tq, sx.power(sx.mul(f, g2), -1)), sx.mul(-1, tq, sx.power(sx.mul(f, g2), -1))), 1e-9),
        ExtraCheck("implicit_inversion", _ode_check([sx.add(L, sx.mul(-HK_SIGN, r))]), 1e-12),
        ExtraCheck("gradient_potential", _ode_check([sx.add(deriv(h), sx.mul(-1, v))]), 1e-9),
        ExtraCheck("volume_density", _ode_check([
            sx.add(sx.mul(f, f, g2, g2), sx.mul(-1, sx.power(k2, 4), sx.power(sx.add(k1, sx.mul(-1, f)), -2)))]),
            1e-9),
    ]
    exp = Expected("soliton", torsion_type="negative", soliton=SolitonSpec([v, 0, 0, 0, 0, 0, 0], 0),
                   extras=extras, metadata={"L(f)": sx.to_string(L), "g^2": sx.to_string(g2),
                                            "v": sx.to_string(v), "potential": sx.to_string(h),
                                            "implicit_sign": HK_SIGN})
    grid = _r_grid(M, -2.0, 2.0, {"k1": 1.5, "k2": 0.75})
    return Built("soliton_hk", M, G, exp, phi_ref, grid)
