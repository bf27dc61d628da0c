import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from g2verify import catalog
from g2verify import symexpr as sx
from g2verify.coframe import (Constant, FieldForm, Model, ModelError, Samples, SamplerError, Scalar,
                              d_squared_residual, define_model, evaluate_form, model_to_json, reframe,
                              sup_norm, wedge)

from conftest import NON_STRETCH


def heisenberg() -> Model:
    e = [FieldForm.gen(i) for i in range(3)]
    return Model("heis", ["e1", "e2", "e3"], {"e1": FieldForm(2), "e2": FieldForm(2), "e3": wedge(e[0], e[1])})


def test_wedge_antisymmetry_and_leibniz():
    M = heisenberg()
    e1, e2, e3 = (FieldForm.gen(i) for i in range(3))
    assert (wedge(e1, e1)).is_zero()
    assert sx.same(wedge(e1, e2).terms[(0, 1)], sx.ONE)
    assert sx.same(wedge(e2, e1).terms[(0, 1)], sx.const(-1))
    # d(e1 ^ e3) = -e1 ^ de3 = 0 and d(e3) ^ e3 = e1 ^ e2 ^ e3
    assert M.d(wedge(e1, e3)).is_zero()
    assert sx.same(M.d(wedge(e3, e3)).terms.get((0, 1, 2), sx.ZERO), sx.ZERO)


def test_jacobi_detector():
    assert d_squared_residual(heisenberg(), Samples({}, 1)) == 0.0
    # [e1, e2] = e3, [e1, e3] = e1: not a Lie algebra
    e = [FieldForm.gen(i) for i in range(3)]
    bad = Model("bad", ["e1", "e2", "e3"], {"e1": -wedge(e[0], e[2]), "e2": FieldForm(2), "e3": -wedge(e[0], e[1])})
    assert d_squared_residual(bad, Samples({}, 1)) > 0.5


@given(st.lists(st.integers(-3, 3), min_size=9, max_size=9))
def test_jacobi_matches_bracket_identity(c):
    """d^2 = 0 on a 3-dimensional algebra iff the bracket satisfies Jacobi."""
    c = np.array(c, dtype=float).reshape(3, 3)  # [e_i, e_j] for (i, j) in (12, 13, 23) has components c[row]
    pairs = [(0, 1), (0, 2), (1, 2)]
    C = np.zeros((3, 3, 3))
    for row, (i, j) in enumerate(pairs):
        C[i, j], C[j, i] = c[row], -c[row]
    st_ = {}
    for kk in range(3):
        terms = {(i, j): -C[i, j, kk] for (i, j) in pairs if C[i, j, kk] != 0}
        st_[f"e{kk + 1}"] = FieldForm(2, {I: sx.const(float(v)) for I, v in terms.items()})
    M = Model("alg", ["e1", "e2", "e3"], st_)
    jac = (np.einsum("bcm,amk->abck", C, C) + np.einsum("cam,bmk->abck", C, C) + np.einsum("abm,cmk->abck", C, C))
    assert (d_squared_residual(M, Samples({}, 1)) == 0) == bool(np.all(jac == 0))


def test_model_validation():
    e = FieldForm.gen(0)
    with pytest.raises(ModelError):
        Model("m", ["a", "a"], {"a": FieldForm(2)})
    with pytest.raises(ModelError):
        Model("m", ["a", "b"], {"a": FieldForm(2)})
    with pytest.raises(ModelError):
        Model("m", ["a"], {"a": FieldForm(2), "z": FieldForm(2)})
    with pytest.raises(ModelError):
        Model("m", ["a", "b"], {"a": FieldForm(2, {(0, 1): sx.var("q")}), "b": FieldForm(2)})
    with pytest.raises(ModelError):
        Model("m", ["a"], {"a": FieldForm(2)}, [Scalar("x", e, ("normal", 0, 1))])


def test_sampling_is_deterministic_and_respects_ranges():
    x = sx.var("x")
    M = Model("m", ["a"], {"a": FieldForm(2)}, [Scalar("x", FieldForm.gen(0), ("uniform", 1.0, 2.0))],
              [Constant("c", -1.0, 0.0)])
    s1, s2 = M.sample(50, 7), M.sample(50, 7)
    assert np.array_equal(s1.values["x"], s2.values["x"]) and np.array_equal(s1.values["c"], s2.values["c"])
    assert np.all((s1.values["x"].real >= 1) & (s1.values["x"].real <= 2))
    assert not np.array_equal(M.sample(50, 8).values["x"], s1.values["x"])
    assert sup_norm(FieldForm(1, {(0,): x}), s1) <= 2.0


def test_implicit_scalar_sampling():
    x, y = sx.var("x"), sx.var("y")
    M = Model("m", ["a"], {"a": FieldForm(2)},
              [Scalar("x", FieldForm.gen(0), ("uniform", 0.0, 3.0)),
               Scalar("y", FieldForm.gen(0), ("implicit", sx.add(sx.power(y, 3), y, sx.mul(-1, x)), -5, 5))])
    S = M.sample(30, 1)
    yv, xv = S.values["y"].real, S.values["x"].real
    assert np.max(np.abs(yv ** 3 + yv - xv)) < 1e-13


def test_grid_requires_all_inputs():
    M = Model("m", ["a"], {"a": FieldForm(2)}, [Scalar("x", FieldForm.gen(0), ("uniform", 0.0, 1.0))],
              [Constant("c", 0.0, 1.0)])
    with pytest.raises(SamplerError):
        M.grid({"x": [0.1, 0.2]})
    assert M.grid({"x": [0.1, 0.2], "c": 0.5}).n == 2


@pytest.mark.parametrize("entry_id", NON_STRETCH + ["erp_M3_cohom1"])
def test_json_roundtrip(entry_id):
    M = catalog.build(entry_id).model
    spec = json.loads(json.dumps(model_to_json(M)))
    M2 = define_model(spec)
    assert M2.generators == M.generators
    S = M.sample(5, 3)
    for a, b in zip(M.structure, M2.structure):
        ea, eb = evaluate_form(a, S), evaluate_form(b, S)
        assert set(ea) == set(eb)
        for I in ea:
            assert np.max(np.abs(ea[I] - eb[I])) < 1e-12
    assert d_squared_residual(M2, S) < 1e-9


def test_define_model_rejects_bad_specs():
    with pytest.raises(ModelError):
        define_model({"format": "other/9", "name": "x", "generators": [], "structure": {}})
    with pytest.raises(ModelError):
        define_model({"name": "x", "generators": ["a"], "structure": {"a": [[["a", "zz"], "1"]]}})
    with pytest.raises(ModelError):
        define_model({"name": "x", "generators": ["a"], "structure": {}})


def test_reframe_symbolic_and_explicit_agree():
    x = sx.var("x")
    g = [FieldForm.gen(i) for i in range(3)]
    M = Model("m", ["dx", "a", "b"], {"dx": FieldForm(2), "a": wedge(g[0], g[1]), "b": wedge(g[0], g[2]) * 2},
              [Scalar("x", g[0], ("uniform", 0.5, 1.5))])
    assert d_squared_residual(M, M.sample(5, 0)) == 0
    forms = [g[0], g[1] * sx.exp(x), g[2] * x + g[1]]
    probe = M.sample(4, 0)
    H1 = reframe(M, ["u", "v", "w"], forms, probe)
    inv = [g[0], g[1] * sx.exp(sx.mul(-1, x)), (g[2] - g[1] * sx.exp(sx.mul(-1, x))) * sx.power(x, -1)]
    H2 = reframe(M, ["u", "v", "w"], forms, probe, images=inv)
    S = M.sample(10, 2)
    for a, b in zip(H1.structure, H2.structure):
        assert sup_norm(a - b, S) < 1e-12
    assert d_squared_residual(H1, S) < 1e-12
    with pytest.raises(ModelError):
        reframe(M, ["u", "v", "w"], forms, probe, images=[g[0], g[1], g[2]])
