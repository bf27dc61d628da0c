import numpy as np
import pytest
from hypothesis import given, strategies as st

from g2verify import catalog
from g2verify import g2ops as g2
from g2verify import multivec as mv
from g2verify import symexpr as sx
from g2verify.g2ops import G2Error, attach_g2
from g2verify.multivec import NumForm

from conftest import NON_STRETCH

xi_vectors = st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=7, max_size=7).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@given(xi_vectors)
def test_characteristic_kernel_is_trivial(xi):
    assert g2.characteristic_kernel(xi) == 0


@given(xi_vectors)
def test_annihilator_of_a_covector(xi):
    assert g2.annihilator_dimension(xi) == 6
    assert g2.annihilator_meets_14(xi) == 0


def test_characteristic_kernel_rejects_zero():
    with pytest.raises(ValueError):
        g2.characteristic_kernel(np.zeros(7))


def test_heptad_validation():
    M = catalog.build("flat").model
    with pytest.raises(G2Error):
        attach_g2(M, M.generators[:6])
    with pytest.raises(G2Error):
        attach_g2(M, [M.generators[0]] * 7)


def test_flat_entry_is_torsion_free():
    B = catalog.build("flat")
    S = B.model.sample(3, 0)
    td = g2.torsion(B.g2, S)
    assert np.max(np.abs(td.tau.coeffs)) == 0
    fit = g2.fit_lambda(B.g2, S)
    assert fit.indeterminate and fit.lam is None
    _, Ric = g2.ricci(B.g2, S)
    assert np.max(np.abs(Ric)) == 0
    assert g2.soliton_residual(B.g2, [0] * 7, 0, S) == 0


@pytest.mark.parametrize("entry_id", NON_STRETCH)
def test_torsion_lies_in_lambda2_14(entry_id):
    B = catalog.build(entry_id)
    S = B.model.sample(20, 11)
    td = g2.torsion(B.g2, S)
    assert max(td.p7_residual, td.vertical_residual, td.reconstruction_residual, td.membership_residual) < 1e-9
    assert td.g2_defect < 1e-9


@pytest.mark.parametrize("entry_id", NON_STRETCH)
def test_ricci_trace(entry_id):
    B = catalog.build(entry_id)
    S = B.model.sample(20, 5)
    td = g2.torsion(B.g2, S)
    scal, Ric = g2.ricci(B.g2, S)
    assert np.max(np.abs(np.trace(Ric, axis1=-2, axis2=-1) + 0.5 * td.normsq.real)) < 1e-9
    assert np.max(np.abs(Ric - np.swapaxes(Ric, -1, -2))) < 1e-9


def test_ricci_agrees_with_koszul_formula_on_lie_group():
    """Independent oracle: left-invariant Ricci from the structure constants."""
    B = catalog.build("lauret_GJ")
    S = B.model.sample(4, 0)
    _, Ric = g2.ricci(B.g2, S)
    ref = g2.lie_group_ricci(g2.structure_constants(B.g2))
    assert np.max(np.abs(Ric - ref)) < 1e-12
    assert np.max(np.abs(ref)) > 0.1


def test_koszul_ricci_of_heisenberg():
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = 1.0, -1.0
    Ric = g2.lie_group_ricci(c)
    assert np.allclose(Ric, np.diag([-0.5, -0.5, 0.5]), atol=1e-15)


@given(st.floats(min_value=0.2, max_value=5.0))
def test_lambda_is_scale_invariant(c):
    M = catalog.build("lauret_GJ").model
    G = attach_g2(M, [(c, g) for g in M.generators])
    S = M.sample(10, 1)
    assert g2.closure_residual(G, S) < 1e-12
    fit = g2.fit_lambda(G, S)
    assert abs(fit.lam - 1 / 6) < 1e-10 and fit.residual < 1e-9 * (1 + c ** -2)


def test_h_extraction_recovers_a_planted_tensor():
    rng = np.random.default_rng(2)
    B14 = mv.lambda2_14_basis()
    tau = NumForm(2, B14 @ rng.standard_normal(14))
    T = g2.torsion_matrix(tau)
    Hbasis = mv.traceless_sym_basis()
    H = np.einsum("a,aij->ij", rng.standard_normal(27), Hbasis)
    dtau = mv.sym_to_three_form(g2.H_COEFF * H + g2.T2_COEFF * (T @ T))
    out = g2.extract_H(T, dtau, None)
    assert np.max(np.abs(out.H - H)) < 1e-12 and out.fit_residual < 1e-12


def test_quadratic_fit_on_a_synthetic_quadratic_form():
    rng = np.random.default_rng(4)
    tau = NumForm(2, mv.lambda2_14_basis() @ rng.standard_normal(14))
    A, Bq = g2.quadratic_parts(tau)
    fit = g2.fit_lambda_numeric(tau, A + Bq.scale(0.3))
    assert abs(fit.lam - 0.3) < 1e-13 and fit.residual < 1e-13


def test_classification_labels():
    # e45 - e67 has |tau^3| = 0; 2 e23 - e45 - e67 saturates |tau^3|^2 = (2/3)|tau|^6
    tau_pos = NumForm.from_terms(2, [((3, 4), 1.0), ((5, 6), -1.0)])
    tau_neg = NumForm.from_terms(2, [((1, 2), 2.0), ((3, 4), -1.0), ((5, 6), -1.0)])
    assert g2.classify_torsion(tau_pos)[0] == ["positive"]
    assert g2.classify_torsion(tau_neg)[0] == ["negative"]
    rng = np.random.default_rng(9)
    tau_gen = NumForm(2, mv.lambda2_14_basis() @ rng.standard_normal(14))
    assert g2.classify_torsion(tau_gen)[0] == ["generic"]
    assert g2.classify_torsion(NumForm.zero(2))[0] == ["zero"]


@given(st.integers(0, 2 ** 32 - 1))
def test_type_margins_bound(seed):
    """(2/3)|tau|^6 is the maximum of |tau^3|^2 on Lambda^2_14."""
    tau = NumForm(2, mv.lambda2_14_basis() @ np.random.default_rng(seed).standard_normal(14))
    pos, _ = g2.type_margins(tau)
    assert -1e-12 <= pos <= 2 / 3 + 1e-12


def test_quadric_immersion_hyperboloid():
    x, t = sx.var("x"), sx.var("t")
    u = [sx.cosh(x), sx.mul(sx.sinh(x), sx.cos(t)), sx.mul(sx.sinh(x), sx.sin(t))]
    grid = dict(zip(["x", "t"], np.meshgrid(np.linspace(0.1, 2, 10), np.linspace(0, 6, 10), indexing="ij")))
    ok = g2.quadric_immersion_check(u, ["x", "t"], [-1, 1, 1], [[1, 0], [0, sx.power(sx.sinh(x), 2)]], grid)
    assert ok.norm_residual < 1e-12 and ok.metric_residual < 1e-12 and not ok.degenerate
    bad = g2.quadric_immersion_check(u, ["x", "t"], [-1, 1, 1], [[1, 0], [0, sx.power(sx.cosh(x), 2)]], grid)
    assert bad.metric_residual > 0.5
