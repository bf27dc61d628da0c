"""The 1/3-quadratic example on R+ x (SL(2,R) x| R^4) / S^1."""
from __future__ import annotations

from fractions import Fraction

from .. import symexpr as sx
from ..coframe import FieldForm, Model, Scalar, substitute_generators, wedge
from ..g2ops import attach_g2
from .base import Built, Expected, matrix_wedge


def maurer_cartan(gens: list[FieldForm]) -> list[list[FieldForm | None]]:
    """5x5 Maurer-Cartan matrix of SL(2,R) x| Sym^3 R^2 in (nu0..nu3, a1..a3)."""
    n0, n1, n2, n3, a1, a2, a3 = gens
    return [
        [None, None, None, None, None],
        [n0, a1 * 3, a2, None, None],
        [n1, a3 * 3, a1, a2 * 2, None],
        [n2, None, a3 * 2, -a1, a2 * 3],
        [n3, None, None, a3, a1 * -3],
    ]


SIGN = -1


def build_third_quadratic() -> Built:
    gens = ["dr", "n0", "n1", "n2", "n3", "a1", "a2", "a3"]
    g = [FieldForm.gen(i) for i in range(8)]
    G = maurer_cartan(g[1:])
    GG = matrix_wedge(G, G, 1, 1, 8)
    # d Gamma = -Gamma ^ Gamma, read off at the independent entries
    where = {"n0": (1, 0), "n1": (2, 0), "n2": (3, 0), "n3": (4, 0), "a1": (1, 1), "a2": (1, 2), "a3": (2, 1)}
    scale = {"a1": Fraction(1, 3), "a3": Fraction(1, 3)}
    st = {"dr": FieldForm(2)}
    for name, (i, j) in where.items():
        st[name] = GG[i][j] * (SIGN * scale.get(name, 1))
    r = sx.var("r")
    M = Model("third_quadratic", gens, st, [Scalar("r", g[0], ("uniform", 0.5, 2.0))],
              notes="Maurer-Cartan form of SL(2,R) x| R^4 with d Gamma = -Gamma ^ Gamma; r on R+")
    n0, n1, n2, n3, a1, a2, a3 = g[1:]
    b2, b3 = n2 - n0, n1 - n3
    b4, b5 = a1 * 2, a2 + a3
    b6 = n1 * Fraction(-1, 15) + n3 * Fraction(-1, 5)
    b7 = n0 * Fraction(1, 5) + n2 * Fraction(1, 15)
    # e1 = c0 dr, (e2, e3) = t b, (e4, e5) = p b, (e6, e7) = q b
    c0 = sx.power(10, Fraction(1, 3))
    t = sx.sqrt(sx.mul(sx.power(r, -3), sx.power(c0, -1)))
    p = sx.sqrt(sx.mul(6, r, r, sx.power(c0, -1)))
    q = sx.sqrt(sx.mul(15, sx.power(r, -3), sx.power(c0, -1)))
    heptad = [g[0] * c0, b2 * t, b3 * t, b4 * p, b5 * p, b6 * q, b7 * q]
    dr = g[0]
    phi_ref = (wedge(dr, wedge(b2, b3) * sx.power(r, -3) + wedge(b4, b5) * sx.mul(6, r, r)
                     + wedge(b6, b7) * sx.mul(15, sx.power(r, -3)))
               + (wedge(wedge(b2, b4), b6) - wedge(wedge(b2, b5), b7) - wedge(wedge(b3, b5), b6)
                  - wedge(wedge(b3, b4), b7)) * sx.mul(3, sx.power(r, -2)))
    Gf = attach_g2(M, heptad)
    phi_new = substitute_generators(phi_ref, Gf.model.old_images)
    Gf.check_adapted(phi_new, Gf.model.sample(8, 0))
    exp = Expected("quadratic", Fraction(1, 3), "generic",
                   metadata={"kappa": "a2 - a3", "stabiliser": "T2"})
    return Built("third_quadratic", Gf.model, Gf, exp, phi_new)
