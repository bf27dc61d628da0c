from math import comb

import numpy as np
from hypothesis import given, strategies as st

from g2verify import multivec as mv
from g2verify.multivec import NumForm

degrees = st.integers(min_value=0, max_value=7)
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def rand_form(rng, k, batch=()):
    return NumForm(k, rng.standard_normal(batch + (comb(7, k),)))


@given(degrees, degrees, seeds)
def test_graded_commutativity(p, q, seed):
    rng = np.random.default_rng(seed)
    a, b = rand_form(rng, p), rand_form(rng, q)
    if p + q > 7:
        return
    lhs = mv.wedge(a, b).coeffs
    rhs = (-1) ** (p * q) * mv.wedge(b, a).coeffs
    assert np.max(np.abs(lhs - rhs), initial=0) < 1e-12


@given(degrees, seeds)
def test_double_hodge_is_identity(k, seed):
    a = rand_form(np.random.default_rng(seed), k)
    assert np.max(np.abs(mv.hodge(mv.hodge(a)).coeffs - a.coeffs)) < 1e-12


@given(degrees, seeds)
def test_inner_product_via_hodge(k, seed):
    rng = np.random.default_rng(seed)
    a, b = rand_form(rng, k), rand_form(rng, k)
    top = mv.wedge(a, mv.hodge(b)).coeffs[0]
    assert abs(top - mv.form_inner(a, b)) < 1e-12 * (1 + abs(top))


def test_associativity_batched():
    rng = np.random.default_rng(3)
    a, b, c = rand_form(rng, 1, (5,)), rand_form(rng, 2, (5,)), rand_form(rng, 3, (5,))
    lhs = mv.wedge(mv.wedge(a, b), c).coeffs
    rhs = mv.wedge(a, mv.wedge(b, c)).coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_phi_and_psi_are_dual():
    assert np.max(np.abs(mv.hodge(mv.phi()).coeffs - mv.psi().coeffs)) == 0
    assert abs(mv.form_inner(mv.phi(), mv.phi()) - 7) < 1e-15
    assert abs(mv.wedge(mv.phi(), mv.psi()).coeffs[0] - 7) < 1e-15


def test_phi_operator_spectrum():
    w = np.sort(np.linalg.eigvalsh(mv.phi_operator()))
    want = np.array([-1.0] * 14 + [2.0] * 7)
    assert np.max(np.abs(w - want)) < 1e-12


def test_lambda2_projectors():
    P7, P14 = mv.lambda2_projectors()
    assert np.max(np.abs(P7 @ P7 - P7)) < 1e-12 and np.max(np.abs(P14 @ P14 - P14)) < 1e-12
    assert np.max(np.abs(P7 + P14 - np.eye(21))) < 1e-12
    assert round(np.trace(P7)) == 7 and round(np.trace(P14)) == 14


@given(seeds)
def test_lambda2_14_characterisations(seed):
    beta = NumForm(2, np.random.default_rng(seed).standard_normal(21))
    b7, b14 = mv.project_lambda2(beta)
    assert np.max(np.abs(mv.wedge(b14, mv.psi()).coeffs)) < 1e-12
    assert np.max(np.abs(mv.hodge(mv.wedge(b14, mv.phi())).coeffs + b14.coeffs)) < 1e-12
    assert np.max(np.abs(mv.g2_defect(mv.two_form_matrix(b14)))) < 1e-12
    if np.max(np.abs(b7.coeffs)) > 1e-6:
        assert np.max(np.abs(mv.g2_defect(mv.two_form_matrix(b7)))) > 1e-9


def test_lambda3_decomposition_dimensions():
    ranks = [round(np.trace(P)) for P in mv.lambda3_projectors()]
    assert ranks == [1, 7, 27]


def test_j_calibration():
    g = mv.j_map(mv.phi())
    assert np.max(np.abs(g - 6 * np.eye(7))) < 1e-10
    # j vanishes on Lambda^3_7 and is symmetric on Lambda^3_27
    rng = np.random.default_rng(0)
    gamma = NumForm(3, rng.standard_normal(35))
    _, g7, g27 = mv.decompose_lambda3(gamma)
    assert np.max(np.abs(mv.j_map(g7))) < 1e-10
    J = mv.j_map(g27)
    assert np.max(np.abs(J - J.T)) < 1e-10 and abs(np.trace(J)) < 1e-10


def test_symmetric_to_three_form_lands_in_27():
    B = mv.traceless_sym_basis()
    assert B.shape == (27, 7, 7)
    gram = np.einsum("aij,bij->ab", B, B)
    assert np.max(np.abs(gram - np.eye(27))) < 1e-12
    _, P7, P27 = mv.lambda3_projectors()
    for S in B[:5]:
        c = mv.sym_to_three_form(S).coeffs.real
        assert np.max(np.abs(P27 @ c - c)) < 1e-12
