"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import sys
import time
from math import comb
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from g2verify import catalog  # noqa: E402
from g2verify import g2ops as g2  # noqa: E402
from g2verify import multivec as mv  # noqa: E402
from g2verify import symexpr as sx  # noqa: E402
from g2verify.catalog import solitons  # noqa: E402
from g2verify.coframe import FieldForm, Model, d_squared_residual  # noqa: E402
from g2verify.g2ops import attach_g2  # noqa: E402

from conftest import NON_STRETCH  # noqa: E402

SEED = 42
SAMPLES = 100

SIXTH = [("bryant_erp", 1 / 6), ("lauret_GJ", 1 / 6), ("erp_M2", 1 / 6), ("erp_M3_homog", 1 / 6),
         ("weierstrass_typeA", 1 / 6)]
NEGATIVE = [("neg_m1_flat", -1.0), ("neg_m18_twistor", -1 / 8), ("neg_25_t2bundle", 0.4), ("neg_34_twistor", 0.75)]
QUADRATIC = SIXTH + [("erp_M3_cohom1", 1 / 6), ("third_quadratic", 1 / 3)] + NEGATIVE
ERP = ["bryant_erp", "lauret_GJ", "erp_M2", "erp_M3_homog", "erp_M3_cohom1", "weierstrass_typeA"]
# Closed, negative type, but not 3/4-quadratic: an unattainable target kept visible as a strict xfail.
UNATTAINABLE = {"neg_34_twistor"}

LINES: list[str] = []


def emit(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}: {detail}"
    LINES.append(line)
    print(line)


def samples(entry_id: str):
    return catalog.build(entry_id).model.sample(SAMPLES, SEED)


def test_criterion_01_algebra_kernel():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        p, q = rng.integers(0, 8, 2)
        a = mv.NumForm(int(p), rng.standard_normal(comb(7, int(p))))
        b = mv.NumForm(int(q), rng.standard_normal(comb(7, int(q))))
        c = mv.NumForm(int(p), rng.standard_normal(comb(7, int(p))))
        if p + q <= 7:
            worst = max(worst, np.max(np.abs(mv.wedge(a, b).coeffs - (-1) ** (p * q) * mv.wedge(b, a).coeffs)))
        worst = max(worst, np.max(np.abs(mv.hodge(mv.hodge(a)).coeffs - a.coeffs)))
        worst = max(worst, abs(mv.wedge(a, mv.hodge(c)).coeffs[0] - mv.form_inner(a, c)))
    ev = np.sort(np.linalg.eigvalsh(mv.phi_operator()))
    spec = np.max(np.abs(ev - np.array([-1.0] * 14 + [2.0] * 7)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and spec <= 1e-12 and elapsed < 5
    emit(1, "algebra kernel", ok, f"identities {worst:.1e}, spectrum {spec:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_structure_equation_consistency():
    t0 = time.perf_counter()
    res = {e: d_squared_residual(catalog.build(e).model, samples(e)) for e in NON_STRETCH}
    elapsed = time.perf_counter() - t0
    worst = max(res, key=res.get)
    ok = res[worst] <= 1e-9 and elapsed < 60
    emit(2, "d^2 on non-stretch entries", ok, f"max {res[worst]:.1e} ({worst}), {elapsed:.2f} s")
    assert ok


def _lambda_errors(entries):
    out = {}
    for e, lam in entries:
        fit = g2.fit_lambda(catalog.build(e).g2, samples(e))
        out[e] = (abs(fit.lam - lam), fit.spread, fit.lam)
    return out


def test_criterion_03_lambda_recovery():
    errs = _lambda_errors([x for x in QUADRATIC if x[0] not in UNATTAINABLE])
    worst = max(errs, key=lambda e: max(errs[e][:2]))
    ok = all(a <= 1e-8 and s <= 1e-8 for a, s, _ in errs.values())
    emit(3, "lambda recovery", ok, f"{len(errs)} entries, worst {max(errs[worst][:2]):.1e} ({worst})")
    assert ok


@pytest.mark.xfail(strict=True, reason="closed structure is not 3/4-quadratic; see the decisions ledger")
def test_criterion_03_lambda_three_quarters():
    (a, s, lam), = _lambda_errors([x for x in QUADRATIC if x[0] in UNATTAINABLE]).values()
    ok = a <= 1e-8 and s <= 1e-8
    emit(3, "lambda recovery, neg_34_twistor (stretch)", ok, f"lambda_hat {lam:.6f}, error {a:.1e}")
    assert ok


def test_criterion_04_torsion_types():
    detail = []
    ok = True
    for e in ERP:
        pos, _ = g2.type_margins(g2.torsion(catalog.build(e).g2, samples(e)).tau)
        ok &= float(np.max(pos)) <= 1e-9
    detail.append(f"positive x{len(ERP)}")
    for e, _ in NEGATIVE:
        _, neg = g2.type_margins(g2.torsion(catalog.build(e).g2, samples(e)).tau)
        ok &= float(np.max(neg)) <= 1e-8
    detail.append(f"negative x{len(NEGATIVE)}")
    pos, neg = g2.type_margins(g2.torsion(catalog.build("third_quadratic").g2, samples("third_quadratic")).tau)
    margin = float(min(np.min(pos), np.min(neg)))
    ok &= margin >= 1e-3
    detail.append(f"generic margin {margin:.2e}")
    emit(4, "torsion types", bool(ok), ", ".join(detail))
    assert ok


def test_criterion_05_erp_suite():
    worst_erp, worst_flow = 0.0, 0.0
    for e in ERP:
        B = catalog.build(e)
        S = samples(e)
        worst_erp = max([worst_erp, *g2.erp_residuals(B.g2, S).values(), *g2.bryant_identity_residuals(B.g2, S, 1 / 6)])
        if B.expected.flow is not None:
            worst_flow = max(worst_flow, g2.flow_family_residual(B.g2, S, B.expected.flow.k, B.expected.flow.nu_block))
    ok = worst_erp <= 1e-8 and worst_flow <= 1e-9
    emit(5, "ERP consequences and flow family", ok, f"identities {worst_erp:.1e}, flow {worst_flow:.1e}")
    assert ok


def _h_residuals(entries):
    out = {}
    for e, lam in entries:
        B = catalog.build(e)
        S = samples(e)
        td = g2.torsion(B.g2, S)
        H = g2.extract_H(td.T, B.g2.dtau_num(S), lam)
        out[e] = max(H.fit_residual, H.quadratic_residual)
    return out


def test_criterion_06_h_tensor():
    res = _h_residuals([x for x in QUADRATIC if x[0] not in UNATTAINABLE])
    worst = max(res, key=res.get)
    ok = res[worst] <= 1e-8
    emit(6, "H-tensor equivalence", ok, f"{len(res)} entries, worst {res[worst]:.1e} ({worst})")
    assert ok


@pytest.mark.xfail(strict=True, reason="closed structure is not 3/4-quadratic; see the decisions ledger")
def test_criterion_06_h_tensor_three_quarters():
    (r,) = _h_residuals([x for x in QUADRATIC if x[0] in UNATTAINABLE]).values()
    emit(6, "H-tensor equivalence, neg_34_twistor (stretch)", r <= 1e-8, f"residual {r:.1e}")
    assert r <= 1e-8


def test_criterion_07_ricci():
    cal = float(np.max(np.abs(mv.j_map(mv.phi()) - 6 * np.eye(7))))
    trace = 0.0
    for e in (x.id for x in catalog.ENTRIES):
        B = catalog.build(e)
        S = samples(e)
        _, Ric = g2.ricci(B.g2, S)
        n2 = g2.torsion(B.g2, S).normsq.real
        trace = max(trace, float(np.max(np.abs(np.trace(Ric, axis1=-2, axis2=-1) + 0.5 * n2))))
    _, Ric = g2.ricci(catalog.build("flat").g2, samples("flat"))
    flat = float(np.max(np.abs(Ric)))
    ok = cal <= 1e-10 and trace <= 1e-9 and flat == 0.0
    emit(7, "Ricci consistency", ok, f"j(phi) {cal:.1e}, trace {trace:.1e}, flat {flat:.1e}")
    assert ok


def test_criterion_08_solitons():
    sol, ode, lam_w, inv, grad = 0.0, 0.0, 0.0, 0.0, 0.0
    for e in ("soliton_twistor", "soliton_hk"):
        B = catalog.build(e)
        grid = B.grid(solitons.GRID_POINTS)
        assert grid.n == 50
        sol = max(sol, g2.soliton_residual(B.g2, B.expected.soliton.V, B.expected.soliton.c, grid))
        ex = {x.name: x.fn(B, grid) for x in B.expected.extras}
        ode = max(ode, ex["closed_condition"], ex["soliton_ode"])
        grad = max(grad, ex["gradient_potential"])
        lam_w = max(lam_w, ex.get("lambert_identity", 0.0))
        inv = max(inv, ex.get("implicit_inversion", 0.0))
    ok = sol <= 1e-7 and ode <= 1e-9 and lam_w <= 1e-12 and inv <= 1e-12 and grad <= 1e-9
    emit(8, "soliton suite", ok,
         f"soliton {sol:.1e}, ODE {ode:.1e}, Lambert {lam_w:.1e}, inversion {inv:.1e}, gradient {grad:.1e}")
    assert ok


def test_criterion_09_characteristic_variety():
    rng = np.random.default_rng(SEED)
    dims = [g2.characteristic_kernel(xi) for xi in rng.standard_normal((100, 7))]
    ok = all(d == 0 for d in dims)
    emit(9, "characteristic variety", ok, f"kernel dimensions {sorted(set(dims))} over 100 covectors")
    assert ok


def test_criterion_10_quadric_immersions():
    norm, metric, degenerate = 0.0, 0.0, False
    labels = []
    for e in ("lauret_GJ", "erp_M2", "erp_M3_homog"):
        for im in catalog.build(e).expected.immersions:
            r = g2.quadric_immersion_check(im.u, im.coords, im.signature, im.claimed, im.grid)
            norm, metric = max(norm, r.norm_residual), max(metric, r.metric_residual)
            degenerate |= r.degenerate
            labels.append(im.label)
    ok = labels == ["GJ", "M2", "M3"] and norm <= 1e-12 and metric <= 1e-9 and not degenerate
    emit(10, "quadric immersions", ok, f"{'/'.join(labels)}: <u,u>+1 {norm:.1e}, metric {metric:.1e}")
    assert ok


def test_criterion_11_mutation_sensitivity():
    M = catalog.build("lauret_GJ").model
    S = M.sample(10, SEED)
    weakest = np.inf
    for k, I in itertools.product(range(7), itertools.combinations(range(7), 2)):
        st = list(M.structure)
        terms = dict(st[k].terms)
        terms[I] = sx.add(terms.get(I, 0), 1e-3)
        st[k] = FieldForm(2, terms)
        mutant = Model("mutant", M.generators, dict(zip(M.generators, st)))
        G = attach_g2(mutant, list(M.generators))
        weakest = min(weakest, max(d_squared_residual(mutant, S), g2.closure_residual(G, S)))
    ok = weakest > 1e-5
    emit(11, "mutation sensitivity", ok, f"147 single-constant mutations, weakest detection {weakest:.1e}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
