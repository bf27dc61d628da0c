"""Batch verification of catalog entries and report emission."""
from __future__ import annotations

import io
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import catalog
from . import g2ops as g2
from .catalog.solitons import GRID_POINTS
from .coframe import Samples, constraint_residual, d_squared_residual

REPORT_SCHEMA = "g2verify.report/1"
DEFAULT_SAMPLES = 100
DEFAULT_SEED = 0
DEFAULT_TOL = 1e-9
BASE_TOL = 1e-9

# Multipliers on --tol for each family of checks.
QUADRATIC_FACTOR = 10.0
SOLITON_FACTOR = 100.0
IMMERSION_NORM_FACTOR = 1e-3
GENERIC_MARGIN = 1e-3


@dataclass
class Check:
    name: str
    value: float | None
    tol: float
    passed: bool
    error: str | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "value": _num(self.value), "tol": self.tol, "passed": self.passed}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class EntryResult:
    id: str
    stretch: bool
    checks: list[Check] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    error: str | None = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "stretch": self.stretch,
            "passed": self.passed,
            "error": self.error,
            "summary": self.summary,
            "checks": [c.to_json() for c in self.checks],
        }


@dataclass
class VerificationReport:
    seed: int
    samples: int
    tol: float
    include_stretch: bool
    entries: list[EntryResult]

    @property
    def passed(self) -> bool:
        """True iff every non-stretch entry passed."""
        return all(e.passed for e in self.entries if not e.stretch)

    def failures(self) -> list[str]:
        out = []
        for e in self.entries:
            if e.error is not None:
                out.append(f"{e.id}:build")
            out.extend(f"{e.id}:{c.name}" for c in e.checks if not c.passed)
        return out

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "include_stretch": self.include_stretch,
            "passed": self.passed,
            "failures": self.failures(),
            "entries": [e.to_json() for e in self.entries],
        }


def _num(v) -> float | None:
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _sup(x) -> float:
    a = np.abs(np.asarray(x))
    return float(a.max()) if a.size else 0.0


class _Runner:
    """Collects checks for one entry; a raising check is recorded as failed."""

    def __init__(self, result: EntryResult):
        self.result = result

    def check(self, name: str, tol: float, fn: Callable[[], float], lower: bool = False) -> float | None:
        try:
            value = float(fn())
        except Exception as exc:  # recorded, never propagated
            self.result.checks.append(Check(name, None, tol, False, f"{type(exc).__name__}: {exc}"))
            return None
        ok = math.isfinite(value) and (value >= tol if lower else value <= tol)
        self.result.checks.append(Check(name, value, tol, ok))
        return value

    def flag(self, name: str, ok: bool, detail: str | None = None) -> None:
        self.result.checks.append(Check(name, None, 0.0, bool(ok), None if ok else detail))


def _torsion_checks(run: _Runner, E, td: g2.TorsionData, tol: float) -> str:
    run.check("torsion_consistency", QUADRATIC_FACTOR * tol,
              lambda: max(td.p7_residual, td.vertical_residual, td.reconstruction_residual, td.membership_residual))
    labels, n2, _ = g2.classify_torsion(td.tau, rel_tol=QUADRATIC_FACTOR * tol, zero_tol=tol)
    kinds = sorted(set(labels))
    observed = kinds[0] if len(kinds) == 1 else "mixed"
    want = E.torsion_type
    if want == "zero":
        run.check("torsion_zero", tol, lambda: _sup(n2))
    else:
        pos, neg = g2.type_margins(td.tau)
        if want == "positive":
            run.check("torsion_type_positive", tol, lambda: _sup(pos))
        elif want == "negative":
            run.check("torsion_type_negative", QUADRATIC_FACTOR * tol, lambda: _sup(neg))
        elif want == "generic":
            run.check("torsion_type_generic", GENERIC_MARGIN, lambda: min(np.min(pos), np.min(neg)), lower=True)
        run.check("torsion_nonzero", tol, lambda: float(np.min(n2)), lower=True)
    return observed


def _quadratic_checks(run: _Runner, G, S: Samples, E, td: g2.TorsionData, tol: float, summary: dict) -> None:
    qt = QUADRATIC_FACTOR * tol
    lam = float(E.lam)
    fit = g2.fit_lambda(G, S)
    summary["lambda_hat"] = _num(fit.lam)
    summary["lambda_residual"] = _num(fit.residual)
    summary["lambda_spread"] = _num(fit.spread)
    if fit.indeterminate:
        run.flag("lambda_fit", False, "lambda coefficient form vanishes")
    else:
        run.check("lambda_value", qt, lambda: abs(fit.lam - lam))
        run.check("lambda_spread", qt, lambda: fit.spread)
        run.check("lambda_residual", qt, lambda: fit.residual)
    dtau = G.dtau_num(S)
    run.check("h_tensor", qt, lambda: (lambda H: max(H.fit_residual, H.quadratic_residual))(g2.extract_H(td.T, dtau, lam)))
    bry = _memo(lambda: g2.bryant_identity_residuals(G, S, lam))
    run.check("bryant_d_tau3", qt, lambda: bry()[0])
    run.check("bryant_d_normsq", qt, lambda: bry()[1])


def _memo(fn):
    """Thunk evaluating fn once; several checks share one computation."""
    box: dict = {}

    def get():
        if "v" not in box:
            box["v"] = fn()
        return box["v"]

    return get


def _safe(fn) -> bool:
    try:
        return bool(fn())
    except Exception:
        return False


def verify_entry(entry_id: str, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                 tol: float = DEFAULT_TOL) -> EntryResult:
    t0 = time.perf_counter()
    meta = catalog.entry(entry_id)
    result = EntryResult(entry_id, meta.stretch)
    try:
        B = catalog.build(entry_id)
        M, G, E = B.model, B.g2, B.expected
        S = M.sample(samples, seed)
    except Exception as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        result.summary["traceback_tail"] = traceback.format_exc().strip().splitlines()[-1]
        result.wall_time = time.perf_counter() - t0
        return result
    run = _Runner(result)
    summary = result.summary
    summary["expected"] = {"kind": E.kind, "lambda": None if E.lam is None else str(E.lam),
                           "torsion_type": E.torsion_type}
    summary["metadata"] = _jsonable(E.metadata)

    run.check("d_squared", tol, lambda: d_squared_residual(M, S))
    if M.constraints:
        run.check("constraints", tol, lambda: constraint_residual(M, S))
    if B.phi_ref is not None:
        run.check("adapted_frame", tol, lambda: G.adapted_frame_residual(B.phi_ref, S))
    run.check("closure", tol, lambda: g2.closure_residual(G, S))

    try:
        td = g2.torsion(G, S)
    except Exception as exc:
        run.flag("torsion", False, f"{type(exc).__name__}: {exc}")
        result.wall_time = time.perf_counter() - t0
        return result
    summary["torsion_type"] = _torsion_checks(run, E, td, tol)
    n2 = np.asarray(td.normsq).real
    summary["normsq"] = {"min": _num(n2.min()), "max": _num(n2.max()), "mean": _num(n2.mean())}

    if E.kind == "quadratic":
        _quadratic_checks(run, G, S, E, td, tol, summary)

    scal, Ric = g2.ricci(G, S)
    run.check("ricci_trace", tol, lambda: _sup(np.trace(Ric, axis1=-2, axis2=-1) + 0.5 * n2))
    if E.kind == "torsion-free":
        run.check("ricci_flat", tol, lambda: _sup(Ric))
    if E.lie_group:
        run.check("ricci_lie_group", QUADRATIC_FACTOR * tol,
                  lambda: _sup(Ric - g2.lie_group_ricci(g2.structure_constants(G))))

    if E.erp:
        erp = _memo(lambda: g2.erp_residuals(G, S))
        for key in ("d_normsq", "d_tau2", "d_star_tau2"):
            run.check(f"erp_{key}", QUADRATIC_FACTOR * tol, lambda key=key: erp()[key])
    if E.flow is not None:
        run.check("flow_family", tol, lambda: g2.flow_family_residual(G, S, E.flow.k, E.flow.nu_block))

    grid = B.grid(GRID_POINTS) if B.grid is not None else None
    if E.soliton is not None:
        st = SOLITON_FACTOR * tol
        run.check("soliton", st, lambda: g2.soliton_residual(G, E.soliton.V, E.soliton.c, S))
        if grid is not None:
            run.check("soliton_grid", st, lambda: g2.soliton_residual(G, E.soliton.V, E.soliton.c, grid))

    scale = tol / BASE_TOL
    for ex in E.extras:
        run.check(ex.name, ex.tol * scale,
                  lambda ex=ex: max([ex.fn(B, S)] + ([ex.fn(B, grid)] if grid is not None else [])))

    for im in E.immersions:
        res = _memo(lambda im=im: g2.quadric_immersion_check(im.u, im.coords, im.signature, im.claimed, im.grid))
        run.check(f"immersion_{im.label}_norm", tol * IMMERSION_NORM_FACTOR, lambda res=res: res().norm_residual)
        run.check(f"immersion_{im.label}_metric", tol, lambda res=res: res().metric_residual)
        run.flag(f"immersion_{im.label}_nondegenerate", _safe(lambda res=res: not res().degenerate),
                 "induced metric degenerate on the grid")
    result.wall_time = time.perf_counter() - t0
    return result


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, float):
        return _num(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return str(x)


def resolve_entries(ids: Iterable[str] | None, include_stretch: bool) -> list[str]:
    """Expand 'all' (or nothing) to the catalog, keeping catalog order."""
    ids = list(ids or [])
    if not ids or ids == ["all"] or "all" in ids:
        return [e.id for e in catalog.ENTRIES if include_stretch or not e.stretch]
    for i in ids:
        catalog.entry(i)
    order = {e.id: k for k, e in enumerate(catalog.ENTRIES)}
    return sorted(dict.fromkeys(ids), key=order.__getitem__)


def _job(args):
    return verify_entry(*args)


def run_verify(entries: Sequence[str] | None = None, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
               tol: float = DEFAULT_TOL, include_stretch: bool = False, jobs: int = 1) -> VerificationReport:
    """Verify the given entries; explicit ids run even when flagged stretch."""
    if samples < 1:
        raise ValueError("samples must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    ids = resolve_entries(entries, include_stretch)
    args = [(i, samples, seed, tol) for i in ids]
    if jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, args))
    else:
        results = [_job(a) for a in args]
    return VerificationReport(seed, samples, tol, include_stretch, results)


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.2e}"


def _worst(e: EntryResult, names: Sequence[str]) -> float | None:
    vals = [c.value for c in e.checks if c.name in names and c.value is not None]
    return max(vals) if vals else None


def _table(r: VerificationReport) -> str:
    out = io.StringIO()
    out.write(f"g2verify report  seed={r.seed} samples={r.samples} tol={r.tol:g}\n")
    head = f"{'entry':<20} {'status':<6} {'d2':>9} {'closure':>9} {'lambda':>12} {'lam res':>9} {'type':<9} " \
           f"{'bryant':>9} {'checks':>7} {'time s':>7}"
    out.write(head + "\n" + "-" * len(head) + "\n")
    for e in r.entries:
        status = "PASS" if e.passed else "FAIL"
        if e.stretch:
            status = status.lower()
        lam = e.summary.get("lambda_hat")
        n_ok = sum(c.passed for c in e.checks)
        out.write(f"{e.id:<20} {status:<6} {_fmt(_worst(e, ['d_squared'])):>9} {_fmt(_worst(e, ['closure'])):>9} "
                  f"{('-' if lam is None else f'{lam:.9f}'):>12} {_fmt(e.summary.get('lambda_residual')):>9} "
                  f"{e.summary.get('torsion_type', '-'):<9} "
                  f"{_fmt(_worst(e, ['bryant_d_tau3', 'bryant_d_normsq'])):>9} "
                  f"{n_ok:>3}/{len(e.checks):<3} {e.wall_time:>7.2f}\n")
    fails = r.failures()
    if fails:
        out.write("\nfailed checks:\n")
        for e in r.entries:
            if e.error is not None:
                out.write(f"  {e.id}: build error: {e.error}\n")
            for c in e.checks:
                if not c.passed:
                    detail = c.error if c.error else f"value {_fmt(c.value)} vs tol {c.tol:g}"
                    tag = " (stretch)" if e.stretch else ""
                    out.write(f"  {e.id}{tag}: {c.name}: {detail}\n")
    out.write(f"\noverall: {'PASS' if r.passed else 'FAIL'}\n")
    return out.getvalue()


def emit_report(r: VerificationReport, format: str = "json") -> bytes:
    if format == "json":
        return (json.dumps(r.to_json(), indent=2, sort_keys=False, allow_nan=False) + "\n").encode()
    if format == "table":
        return _table(r).encode()
    raise ValueError(f"unknown format {format!r}")
