"""Catalog structure plus regression tests for the arbitrated reading of each example."""
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import lambertw

from g2verify import catalog
from g2verify import g2ops as g2
from g2verify import symexpr as sx
from g2verify.catalog import erp, negative, solitons, typea
from g2verify.coframe import FieldForm, Model, d_squared_residual

from conftest import NON_STRETCH

STRETCH = {"erp_M3_cohom1", "neg_m18_twistor", "neg_34_twistor"}


def test_list_entries():
    rows = catalog.list_entries()
    ids = [r["id"] for r in rows]
    assert len(ids) >= 13 and len(set(ids)) == len(ids)
    assert {r["id"] for r in rows if r["stretch"]} == STRETCH
    assert set(NON_STRETCH) | STRETCH == set(ids)


def test_unknown_entry():
    with pytest.raises(catalog.UnknownEntryError):
        catalog.build("no_such_entry")


def test_build_is_cached():
    assert catalog.build("flat") is catalog.build("flat")


@pytest.mark.parametrize("entry_id", NON_STRETCH)
def test_entry_passes_structure_and_adapted_frame_gates(entry_id):
    B = catalog.build(entry_id)
    S = B.model.sample(30, 17)
    assert d_squared_residual(B.model, S) <= 1e-9
    assert g2.closure_residual(B.g2, S) <= 1e-9
    if B.phi_ref is not None:
        assert B.g2.adapted_frame_residual(B.phi_ref, S) <= 1e-9


@pytest.mark.parametrize("entry_id,lam", [("lauret_GJ", 1 / 6), ("third_quadratic", 1 / 3), ("neg_m1_flat", -1.0),
                                          ("neg_m18_twistor", -1 / 8), ("neg_25_t2bundle", 0.4),
                                          ("weierstrass_typeA", 1 / 6)])
def test_lambda_examples(entry_id, lam):
    B = catalog.build(entry_id)
    fit = g2.fit_lambda(B.g2, B.model.sample(25, 2))
    assert abs(fit.lam - lam) <= 1e-8 and fit.spread <= 1e-8


# ---------------------------------------------------------------------------
# Lauret example: scale of the sigma block

def _lauret_model(r) -> Model:
    w = [FieldForm.gen(i) for i in range(7)]
    Z = FieldForm(1)
    q = sx.mul(sx.sqrt(2), r)
    w1, w2, w3 = w[:3]
    sig = [[w3 * sx.mul(-1, q), w2 * r, w1 * sx.mul(-1, q) - w3 * r],
           [w2 * sx.mul(-1, q), w1 * sx.mul(-1, q) + w3 * r, w2 * r]]
    st = erp._type_s_structure(w, sig, Z, Z, Z, Z)
    gens = [f"w{i}" for i in range(1, 8)]
    return Model("lauret", gens, dict(zip(gens, st)))


def test_lauret_half_scale_violates_jacobi():
    half = d_squared_residual(_lauret_model(Fraction(1, 2)), catalog.build("flat").model.sample(1, 0))
    good = d_squared_residual(_lauret_model(sx.power(2, Fraction(-1, 2))), catalog.build("flat").model.sample(1, 0))
    assert half > 0.2
    assert good < 1e-15


def test_psi31_sign_is_forced_by_d_squared(monkeypatch):
    monkeypatch.setattr(erp, "PSI31_SIGN", 1)
    M = erp.build_m3_cohom1().model
    assert d_squared_residual(M, M.sample(20, 0)) > 1.0
    monkeypatch.setattr(erp, "PSI31_SIGN", -1)
    M = erp.build_m3_cohom1().model
    assert d_squared_residual(M, M.sample(20, 0)) < 1e-12


def test_gj_roots_metadata():
    assert "tetrahedron" in catalog.build("lauret_GJ").expected.metadata["roots"]


# ---------------------------------------------------------------------------
# negative type

@pytest.mark.parametrize("lam", [Fraction(-1, 8), Fraction(3, 4)])
def test_curvature_solve_reproduces_frozen_terms(lam):
    curv, resid = negative.solve_curvature(lam)
    assert resid == 0.0
    assert curv == negative.FROZEN_CURVATURE[lam]


def test_coefficient_values():
    assert tuple(sx.evaluate(c, {}).real for c in negative.coefficients(Fraction(-1, 8))) == (0.0, -3.0)
    cw, ct = (sx.evaluate(c, {}).real for c in negative.coefficients(Fraction(3, 4)))
    assert math.isclose(cw, -4 / 3, rel_tol=1e-15) and math.isclose(ct, 5 / 3, rel_tol=1e-15)


def test_halved_theta_coefficient_does_not_close():
    lam = Fraction(-1, 8)
    curv, resid = negative.solve_curvature(lam, c_theta=Fraction(-3, 2))
    assert resid < 1e-12
    B = negative.build_negative("probe", lam, curv, c_theta=Fraction(-3, 2))
    assert g2.closure_residual(B.g2, B.model.sample(10, 0)) > 1.0


def test_lambda_three_quarters_is_closed_and_nearly_kaehler_but_not_quadratic():
    """Known failure of the stretch entry: closed and exactly nearly-Kaehler on the base,
    yet no 3/4-quadratic structure."""
    B = catalog.build("neg_34_twistor")
    S = B.model.sample(20, 0)
    assert d_squared_residual(B.model, S) < 1e-12
    assert g2.closure_residual(B.g2, S) < 1e-12
    assert negative.nearly_kaehler_residual(B, S) < 1e-12
    fit = g2.fit_lambda(B.g2, S)
    assert abs(fit.lam - 0.75) > 0.1 and fit.residual > 1.0


# ---------------------------------------------------------------------------
# solitons: independent numeric oracles

def _twistor_f(r, k1, branch_sign):
    """branch_sign = +1: W(exp(-2r/k1)/k1); -1: the other branch W(-exp(2r/k1)/k1)."""
    if branch_sign > 0:
        return k1 * (lambertw(math.exp(-2 * r / k1) / k1).real + 1)
    return k1 * (lambertw(-math.exp(2 * r / k1) / k1).real + 1)


def _deriv(fn, r, h=1e-5):
    return (fn(r + h) - fn(r - h)) / (2 * h)


def test_twistor_profile_solves_corrected_ode():
    k1 = 1.25
    for r in np.linspace(-2, 1, 7):
        f = lambda s: _twistor_f(s, k1, 1)
        v = -2 * k1 / f(r) ** 2
        assert abs(_deriv(f, r) + f(r) * v + 2) < 1e-8
        assert f(r) > k1


def test_alternative_twistor_ode_breaks_its_conservation_law():
    """The c = 0 system f' = v (f + 2), v' = v (f v + 2)/(6 f) does not conserve f^2 v."""
    rng = np.random.default_rng(0)
    for _ in range(10):
        f, v = rng.uniform(1, 3), rng.uniform(-2, -0.1)
        fp, vp = v * (f + 2), v * (f * v + 2) / (6 * f)
        assert abs(2 * f * fp * v + f * f * vp) > 1e-3
        # the engine-derived system conserves it
        fp, vp = -(f * v + 2), 2 * v * (f * v + 2) / f
        assert abs(2 * f * fp * v + f * f * vp) < 1e-12


def test_other_branch_twistor_profile_fails_the_ode():
    k1 = 1.25
    r = -3.0  # the argument -exp(2r/k1)/k1 needs to stay above -1/e
    f = lambda s: _twistor_f(s, k1, -1)
    v = -2 * k1 / f(r) ** 2
    assert abs(_deriv(f, r) + f(r) * v + 2) > 1e-2


def _hk_f(r, k1, k2, sign):
    L = lambda f: 2 * k2 ** 2 / k1 ** 3 * (math.log(f) - math.log(k1 - f)) + k2 ** 2 / k1 ** 2 * (1 / (k1 - f) - 1 / f)
    return brentq(lambda f: L(f) - sign * r, k1 * 1e-12, k1 * (1 - 1e-12), xtol=1e-15)


@pytest.mark.parametrize("sign,ok", [(-1, True), (1, False)])
def test_hk_implicit_sign_scan(sign, ok):
    k1, k2 = 1.5, 0.75
    worst = 0.0
    for r in np.linspace(-1.5, 1.5, 7):
        f = lambda s: _hk_f(s, k1, k2, sign)
        fr = f(r)
        g2v = k2 ** 2 / (fr * (k1 - fr))
        v = -2 * k1 / g2v
        worst = max(worst, abs(_deriv(f, r) - fr * (g2v * v + 2 * fr) / (2 * g2v)))
    assert (worst < 1e-6) == ok
    assert solitons.HK_SIGN == -1


@pytest.mark.parametrize("entry_id", ["soliton_twistor", "soliton_hk"])
def test_soliton_extras_on_grid(entry_id):
    B = catalog.build(entry_id)
    grid = B.grid(solitons.GRID_POINTS)
    assert grid.n == 50
    for ex in B.expected.extras:
        assert ex.fn(B, grid) <= ex.tol, ex.name
    assert g2.soliton_residual(B.g2, B.expected.soliton.V, B.expected.soliton.c, grid) <= 1e-7


def test_hk_volume_density_uses_fourth_power():
    """f^2 g^4 = k2^4/(k1 - f)^2; the k2^2 numerator fails away from k2 = 1."""
    k1, k2 = 1.5, 0.75
    f = _hk_f(0.3, k1, k2, -1)
    g2v = k2 ** 2 / (f * (k1 - f))
    assert abs(f * f * g2v * g2v - k2 ** 4 / (k1 - f) ** 2) < 1e-12
    assert abs(f * f * g2v * g2v - k2 ** 2 / (k1 - f) ** 2) > 1e-2


# ---------------------------------------------------------------------------
# type A Weierstrass data

@pytest.mark.parametrize("signs", [(1, 1), (-1, 1), (-1, -1)])
def test_type_a_other_signs_do_not_close(signs):
    B = typea.build_typea(signs)
    S = B.model.sample(10, 0)
    assert d_squared_residual(B.model, S) < 1e-12
    assert g2.closure_residual(B.g2, S) > 1.0


def test_type_a_domain_avoids_the_unit_circle():
    B = catalog.build("weierstrass_typeA")
    S = B.model.sample(200, 0)
    z = np.abs(S.values["x1"] + 1j * S.values["y1"])
    assert np.max(z) < 0.65
