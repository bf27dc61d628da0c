"""Registry of the explicit closed G2-structures shipped with the engine."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from ..coframe import FieldForm, Model
from ..g2ops import attach_g2
from . import erp, negative, quadratic, solitons, typea
from .base import Built, Expected, ExtraCheck, FlowSpec, ImmersionSpec, SolitonSpec


class UnknownEntryError(KeyError):
    pass


def build_flat() -> Built:
    gens = [f"w{i}" for i in range(1, 8)]
    M = Model("flat", gens, {g: FieldForm(2) for g in gens}, notes="abelian R^7")
    return Built("flat", M, attach_g2(M, gens), Expected("torsion-free", lie_group=True))


@dataclass(frozen=True)
class Entry:
    id: str
    builder: Callable[[], Built]
    stretch: bool
    summary: str


ENTRIES: tuple[Entry, ...] = (
    Entry("flat", build_flat, False, "abelian R^7, torsion-free"),
    Entry("bryant_erp", erp.build_bryant, False, "U(2)+ bundle of Bryant's ERP example"),
    Entry("lauret_GJ", erp.build_lauret, False, "type S Lie group GJ, roots on a regular tetrahedron"),
    Entry("erp_M2", erp.build_m2, False, "type S M2: triple root and an antipodal single root"),
    Entry("erp_M3_homog", erp.build_m3_homog, False, "type S M3: antipodal double roots, homogeneous"),
    Entry("erp_M3_cohom1", erp.build_m3_cohom1, True, "type S M3: complete cohomogeneity-one example"),
    Entry("third_quadratic", quadratic.build_third_quadratic, False, "1/3-quadratic on R+ x (SL(2,R) x| R^4)/S^1"),
    Entry("neg_m1_flat", negative.build_m1_flat, False, "negative type, lambda = -1, flat base"),
    Entry("neg_m18_twistor", negative.build_m18, True, "negative type, lambda = -1/8, twistor space of flat X"),
    Entry("neg_25_t2bundle", negative.build_25, False, "negative type, lambda = 2/5, T^2-bundle over flat X"),
    Entry("neg_34_twistor", negative.build_34, True, "negative type, lambda = 3/4, twistor space of ASD Einstein X"),
    Entry("soliton_twistor", solitons.build_twistor, False, "steady gradient soliton, Lambert W profile"),
    Entry("soliton_hk", solitons.build_hk, False, "steady gradient soliton, implicit profile"),
    Entry("weierstrass_typeA", typea.build_typea, False, "type A Weierstrass data g(z1) = z1^2/2"),
)

_BY_ID = {e.id: e for e in ENTRIES}


def entry(entry_id: str) -> Entry:
    try:
        return _BY_ID[entry_id]
    except KeyError:
        raise UnknownEntryError(f"unknown catalog entry {entry_id!r}") from None


def list_entries() -> list[dict]:
    """One metadata row per entry, in catalog order."""
    rows = []
    for e in ENTRIES:
        rows.append({"id": e.id, "stretch": e.stretch, "summary": e.summary})
    return rows


@lru_cache(maxsize=None)
def build(entry_id: str) -> Built:
    return entry(entry_id).builder()


__all__ = ["Built", "ENTRIES", "Entry", "Expected", "ExtraCheck", "FlowSpec", "ImmersionSpec", "SolitonSpec",
           "UnknownEntryError", "build", "entry", "list_entries"]
