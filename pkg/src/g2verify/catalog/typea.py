"""Type A Weierstrass construction on R x Sigma x C^2 with g(z1) = z1^2/2."""
from __future__ import annotations

from fractions import Fraction

from .. import symexpr as sx
from ..coframe import Constant, FieldForm, Model, Scalar, reframe, substitute_generators
from ..g2ops import attach_g2
from .base import Built, CForm, Expected

GENS = ["dr", "dx1", "dy1", "dx2", "dy2", "dx3", "dy3"]
COORDS = ["r", "x1", "y1", "x2", "y2", "x3", "y3"]

# theta2 = conj(dz3 + 2k S1 (g' dz2 + S2 (z1 g' - g) conj(dz2))); fixed by closure
SIGNS = (1, -1)


def _cmul(a: tuple, b: tuple) -> tuple:
    return (sx.add(sx.mul(a[0], b[0]), sx.mul(-1, a[1], b[1])), sx.add(sx.mul(a[0], b[1]), sx.mul(a[1], b[0])))


def weierstrass_forms(signs: tuple = SIGNS):
    """(nu1, theta1, theta2, k, r) for g = z1^2/2, so g'' = 1 and h = 1."""
    g = [FieldForm.gen(i) for i in range(7)]
    x1, y1 = sx.var("x1"), sx.var("y1")
    k = sx.cname("k")
    z1 = (x1, y1)
    dz1, dz2, dz3 = CForm(g[1], g[2]), CForm(g[3], g[4]), CForm(g[5], g[6])
    s = sx.sqrt(sx.add(1, sx.mul(-1, x1, x1), sx.mul(-1, y1, y1)))
    theta1 = dz1 * s
    nu1 = (dz2 - dz2.conj() * z1) * (0, sx.power(s, -1))
    gp = z1
    w = _cmul(z1, z1)
    zgp_g = (sx.mul(Fraction(1, 2), w[0]), sx.mul(Fraction(1, 2), w[1]))
    s1, s2 = signs
    chibar = dz3 + (dz2 * gp + dz2.conj() * zgp_g * s2) * sx.mul(2 * s1, k)
    return nu1, theta1, chibar.conj(), k, sx.var("r")


def _coordinate_images(signs: tuple) -> list[FieldForm]:
    """dr, dx1, ..., dy3 in the heptad coframe (e1, nu, eta1, eta2 as complex pairs).

    dz1 = e^{kr} eta1/s, dz2 - z1 conj(dz2) = -i s e^{-2kr} nu and
    dz3 = conj(theta2) - 2k S1 (g' dz2 + S2 (z1 g' - g) conj(dz2))."""
    e = [FieldForm.gen(i) for i in range(7)]
    nu, eta1, eta2 = CForm(e[1], e[2]), CForm(e[3], e[4]), CForm(e[5], e[6])
    x1, y1, r, k = sx.var("x1"), sx.var("y1"), sx.var("r"), sx.cname("k")
    z1 = (x1, y1)
    q = sx.add(1, sx.mul(-1, x1, x1), sx.mul(-1, y1, y1))
    s = sx.sqrt(q)
    dz1 = eta1 * sx.mul(sx.exp(sx.mul(k, r)), sx.power(s, -1))
    a = nu * (0, sx.mul(-1, s, sx.exp(sx.mul(-2, k, r))))
    dz2 = (a + a.conj() * z1) * sx.power(q, -1)
    w = _cmul(z1, z1)
    zgp_g = (sx.mul(Fraction(1, 2), w[0]), sx.mul(Fraction(1, 2), w[1]))
    s1, s2 = signs
    dz3 = eta2.conj() * sx.exp(sx.mul(-1, k, r)) - (dz2 * z1 + dz2.conj() * zgp_g * s2) * sx.mul(2 * s1, k)
    return [e[0], dz1.re, dz1.im, dz2.re, dz2.im, dz3.re, dz3.im]


def build_typea(signs: tuple = SIGNS) -> Built:
    nu1, theta1, theta2, k, r = weierstrass_forms(signs)
    st = {name: FieldForm(2) for name in GENS}
    scalars = [Scalar("r", FieldForm.gen(0), ("uniform", -0.5, 0.5))]
    for i, name in enumerate(COORDS[1:], start=1):
        lo, hi = (-0.45, 0.45) if name in ("x1", "y1") else (-1.0, 1.0)
        scalars.append(Scalar(name, FieldForm.gen(i), ("uniform", lo, hi)))
    M = Model("weierstrass_typeA", GENS, st, scalars, [Constant("k", 0.5, 1.5)],
              notes="coordinates r, z1, z2, z3 on R x Sigma x C^2; g(z1) = z1^2/2 on |z1| < 0.64")
    e2k, emk, ek = sx.exp(sx.mul(2, k, r)), sx.exp(sx.mul(-1, k, r)), sx.exp(sx.mul(k, r))
    nu, eta1, eta2 = nu1 * e2k, theta1 * emk, theta2 * ek
    heptad = [FieldForm.gen(0), nu.re, nu.im, eta1.re, eta1.im, eta2.re, eta2.im]
    dr = CForm(FieldForm.gen(0))
    quad = (nu1 ^ nu1.conj()) * sx.exp(sx.mul(4, k, r)) + (theta1 ^ theta1.conj()) * sx.exp(sx.mul(-2, k, r)) \
        + (theta2 ^ theta2.conj()) * e2k
    cubic = (nu1 ^ theta1) ^ theta2
    phi_ref = ((dr ^ quad) * (0, Fraction(1, 2)) + (cubic + cubic.conj()) * sx.mul(Fraction(1, 2), e2k)).re
    names = [f"e{i}" for i in range(1, 8)]
    H = reframe(M, names, heptad, M.sample(8, 0), images=_coordinate_images(signs))
    G = attach_g2(H, names)
    phi_new = substitute_generators(phi_ref, H.old_images)
    G.check_adapted(phi_new, H.sample(8, 0))
    exp = Expected("quadratic", Fraction(1, 6), "positive", erp=True, metadata={"g": "z1^2/2", "signs": list(signs)})
    return Built("weierstrass_typeA", G.model, G, exp, phi_new)
