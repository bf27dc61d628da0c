"""Pointwise exterior algebra on R^7 in an orthonormal adapted coframe.

A form of degree k is stored as a dense complex vector of length C(7,k),
indexed by strictly increasing multi-indices in lexicographic order.  Arrays
may carry leading batch axes (one row per sample point); every operation here
broadcasts over them.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations, permutations
from math import comb

import numpy as np

DIM = 7

# generators are 0-based internally; e^{123} is (0, 1, 2)
PHI_TERMS = (
    ((0, 1, 2), 1), ((0, 3, 4), 1), ((0, 5, 6), 1), ((1, 3, 5), 1),
    ((1, 4, 6), -1), ((2, 3, 6), -1), ((2, 4, 5), -1),
)
PSI_TERMS = (
    ((3, 4, 5, 6), 1), ((1, 2, 5, 6), 1), ((1, 2, 3, 4), 1), ((0, 2, 4, 6), 1),
    ((0, 2, 3, 5), -1), ((0, 1, 4, 5), -1), ((0, 1, 3, 6), -1),
)


@lru_cache(maxsize=None)
def basis(k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(DIM), k))


@lru_cache(maxsize=None)
def position(k: int) -> dict[tuple[int, ...], int]:
    return {I: n for n, I in enumerate(basis(k))}


def sort_sign(idx) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``idx`` (0 if an index repeats)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class NumForm:
    """A k-form on R^7 (optionally batched)."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if not 0 <= degree <= DIM:
            raise ValueError(f"degree {degree} out of range")
        if coeffs.shape[-1:] != (comb(DIM, degree),):
            raise ValueError(f"a {degree}-form needs {comb(DIM, degree)} coefficients")
        self.degree = degree
        self.coeffs = coeffs

    @classmethod
    def zero(cls, degree: int, batch: tuple = ()) -> "NumForm":
        return cls(degree, np.zeros(batch + (comb(DIM, degree),), dtype=complex))

    @classmethod
    def from_terms(cls, degree: int, terms) -> "NumForm":
        """Build from (index tuple, coefficient) pairs; indices may be unsorted."""
        c = np.zeros(comb(DIM, degree), dtype=complex)
        pos = position(degree)
        for idx, v in terms:
            s, I = sort_sign(idx)
            if s:
                c[pos[I]] += s * v
        return cls(degree, c)

    @classmethod
    def basis_form(cls, idx) -> "NumForm":
        return cls.from_terms(len(idx), [(idx, 1.0)])

    @property
    def batch(self) -> tuple:
        return self.coeffs.shape[:-1]

    def __add__(self, other: "NumForm") -> "NumForm":
        _same_degree(self, other)
        return NumForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "NumForm") -> "NumForm":
        _same_degree(self, other)
        return NumForm(self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "NumForm":
        return NumForm(self.degree, -self.coeffs)

    def scale(self, s) -> "NumForm":
        """Multiply by a scalar or by a per-sample array of scalars."""
        s = np.asarray(s, dtype=complex)
        return NumForm(self.degree, self.coeffs * s[..., None])

    __rmul__ = scale
    __mul__ = scale

    def __xor__(self, other: "NumForm") -> "NumForm":
        return wedge(self, other)

    def norm(self) -> np.ndarray:
        """Sup-norm of the coefficients, per batch element."""
        return np.max(np.abs(self.coeffs), axis=-1) if self.coeffs.shape[-1] else np.zeros(self.batch)

    def terms(self) -> list[tuple[tuple[int, ...], complex]]:
        if self.batch:
            raise ValueError("terms() needs an unbatched form")
        return [(I, complex(v)) for I, v in zip(basis(self.degree), self.coeffs) if v != 0]

    def __repr__(self) -> str:
        if self.batch:
            return f"NumForm(degree={self.degree}, batch={self.batch})"
        body = " + ".join(f"{_fmt(v)}*e{''.join(str(i + 1) for i in I)}" for I, v in self.terms())
        return f"NumForm({body or '0'})"


def _fmt(v: complex) -> str:
    return f"{v.real:.6g}" if v.imag == 0 else f"({v:.6g})"


def _same_degree(a: NumForm, b: NumForm) -> None:
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")


# ---------------------------------------------------------------------------
# multiplication tables

@lru_cache(maxsize=None)
def wedge_table(p: int, q: int) -> np.ndarray:
    """Tensor W with (a ^ b)_K = sum_{I,J} W[I,J,K] a_I b_J."""
    W = np.zeros((comb(DIM, p), comb(DIM, q), comb(DIM, p + q)))
    pos = position(p + q)
    for i, I in enumerate(basis(p)):
        for j, J in enumerate(basis(q)):
            s, K = sort_sign(I + J)
            if s:
                W[i, j, pos[K]] = s
    W.setflags(write=False)
    return W


@lru_cache(maxsize=None)
def hodge_table(k: int) -> tuple[np.ndarray, np.ndarray]:
    """(target positions, signs) with *e_I = sign e_{I^c}."""
    target = np.zeros(comb(DIM, k), dtype=int)
    signs = np.zeros(comb(DIM, k))
    pos = position(DIM - k)
    for i, I in enumerate(basis(k)):
        Ic = tuple(j for j in range(DIM) if j not in I)
        s, _ = sort_sign(I + Ic)
        target[i] = pos[Ic]
        signs[i] = s
    return target, signs


@lru_cache(maxsize=None)
def interior_table(k: int) -> np.ndarray:
    """Tensor N with (v _| a)_J = sum_{m,I} N[m,I,J] v_m a_I."""
    N = np.zeros((DIM, comb(DIM, k), comb(DIM, k - 1)))
    pos = position(k - 1)
    for i, I in enumerate(basis(k)):
        for slot, m in enumerate(I):
            J = I[:slot] + I[slot + 1:]
            N[m, i, pos[J]] = (-1) ** slot
    N.setflags(write=False)
    return N


# ---------------------------------------------------------------------------
# operations

def wedge(a: NumForm, b: NumForm) -> NumForm:
    p, q = a.degree, b.degree
    if p + q > DIM:
        raise ValueError(f"degree overflow: {p} + {q} > {DIM}")
    W = wedge_table(p, q)
    return NumForm(p + q, np.einsum("...i,...j,ijk->...k", a.coeffs, b.coeffs, W))


def hodge(a: NumForm) -> NumForm:
    target, signs = hodge_table(a.degree)
    out = np.zeros(a.batch + (comb(DIM, DIM - a.degree),), dtype=complex)
    out[..., target] = a.coeffs * signs
    return NumForm(DIM - a.degree, out)


def interior(v, a: NumForm) -> NumForm:
    if a.degree < 1:
        raise ValueError("interior product needs degree >= 1")
    v = np.asarray(v, dtype=complex)
    N = interior_table(a.degree)
    return NumForm(a.degree - 1, np.einsum("...m,...i,mij->...j", v, a.coeffs, N))


def form_inner(a: NumForm, b: NumForm) -> np.ndarray:
    """Bilinear inner product with orthonormal basis forms."""
    _same_degree(a, b)
    r = np.sum(a.coeffs * b.coeffs, axis=-1)
    return r


def volume() -> NumForm:
    return NumForm(DIM, np.ones(1))


def phi() -> NumForm:
    return NumForm.from_terms(3, PHI_TERMS)


def psi() -> NumForm:
    """The 4-form *phi as a fixed list of terms."""
    return NumForm.from_terms(4, PSI_TERMS)


def unit(i: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[i] = 1.0
    return v


# ---------------------------------------------------------------------------
# epsilon symbols

@lru_cache(maxsize=None)
def _eps(k: int) -> np.ndarray:
    src = phi() if k == 3 else psi()
    pos = position(k)
    E = np.zeros((DIM,) * k)
    for idx in permutations(range(DIM), k):
        s, I = sort_sign(idx)
        E[idx] = s * src.coeffs[pos[I]].real
    E.setflags(write=False)
    return E


def eps3() -> np.ndarray:
    """eps_{ijk} with phi = (1/6) eps_{ijk} e^{ijk}."""
    return _eps(3)


def eps4() -> np.ndarray:
    """eps_{ijkl} with *phi = (1/24) eps_{ijkl} e^{ijkl}."""
    return _eps(4)


def from_full_tensor(T: np.ndarray) -> NumForm:
    """Form sum_{i..} T_{i..} e^{i..} from a full (not necessarily skew) tensor."""
    k = T.ndim
    c = np.zeros(comb(DIM, k), dtype=complex)
    for n, I in enumerate(basis(k)):
        for perm in permutations(range(k)):
            idx = tuple(I[p] for p in perm)
            s, _ = sort_sign(idx)
            c[n] += s * T[idx]
    return NumForm(k, c)


def two_form_matrix(a: NumForm) -> np.ndarray:
    """Skew matrix A with a = sum_{i<j} A_ij e^{ij}."""
    A = np.zeros(a.batch + (DIM, DIM), dtype=complex)
    for n, (i, j) in enumerate(basis(2)):
        A[..., i, j] = a.coeffs[..., n]
        A[..., j, i] = -a.coeffs[..., n]
    return A


def matrix_two_form(A: np.ndarray) -> NumForm:
    """Inverse of ``two_form_matrix`` (skew part of A only)."""
    A = np.asarray(A)
    c = np.stack([(A[..., i, j] - A[..., j, i]) / 2 for i, j in basis(2)], axis=-1)
    return NumForm(2, c)


# ---------------------------------------------------------------------------
# type decompositions

@lru_cache(maxsize=None)
def phi_operator() -> np.ndarray:
    """Matrix of beta -> *(beta ^ phi) on 2-forms."""
    L = np.zeros((21, 21))
    ph = phi()
    for n, I in enumerate(basis(2)):
        L[:, n] = hodge(wedge(NumForm.basis_form(I), ph)).coeffs.real
    L.setflags(write=False)
    return L


@lru_cache(maxsize=None)
def lambda2_projectors() -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the eigenvalue 2 (Lambda^2_7) and -1 (Lambda^2_14)
    eigenspaces of beta -> *(beta ^ phi)."""
    L = phi_operator()
    eye = np.eye(21)
    P7 = (L + eye) / 3.0
    P14 = (2 * eye - L) / 3.0
    P7.setflags(write=False)
    P14.setflags(write=False)
    return P7, P14


@lru_cache(maxsize=None)
def lambda2_14_basis() -> np.ndarray:
    """Orthonormal basis (21 x 14) of Lambda^2_14."""
    w, V = np.linalg.eigh(phi_operator())
    B = V[:, np.abs(w + 1) < 1e-8]
    B.setflags(write=False)
    return B


def project_lambda2(a: NumForm) -> tuple[NumForm, NumForm]:
    if a.degree != 2:
        raise ValueError("project_lambda2 needs a 2-form")
    P7, P14 = lambda2_projectors()
    return NumForm(2, a.coeffs @ P7.T), NumForm(2, a.coeffs @ P14.T)


@lru_cache(maxsize=None)
def lambda3_projectors() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ph = phi().coeffs.real
    P1 = np.outer(ph, ph) / 7.0
    A = np.stack([hodge(wedge(NumForm(1, unit(i)), phi())).coeffs.real for i in range(DIM)], axis=1)
    P7 = A @ np.linalg.solve(A.T @ A, A.T)
    P27 = np.eye(35) - P1 - P7
    for P in (P1, P7, P27):
        P.setflags(write=False)
    return P1, P7, P27


def decompose_lambda3(a: NumForm) -> tuple[NumForm, NumForm, NumForm]:
    if a.degree != 3:
        raise ValueError("decompose_lambda3 needs a 3-form")
    return tuple(NumForm(3, a.coeffs @ P.T) for P in lambda3_projectors())


# ---------------------------------------------------------------------------
# j map and symmetric tensors

@lru_cache(maxsize=None)
def j_raw_table() -> np.ndarray:
    """J[a, b, I] = *((e_a _| phi) ^ (e_b _| phi) ^ e^I) for 3-forms e^I."""
    ph = phi()
    contr = [interior(unit(a), ph) for a in range(DIM)]
    J = np.zeros((DIM, DIM, 35))
    for a in range(DIM):
        for b in range(DIM):
            four = wedge(contr[a], contr[b])
            # *(four ^ e^I) equals the wedge coefficient against vol
            J[a, b, :] = wedge_table(4, 3)[:, :, 0].T @ four.coeffs.real
    J.setflags(write=False)
    return J


@lru_cache(maxsize=None)
def j_calibration() -> float:
    """Constant c with c * J(phi) = 6 g; aborts if J(phi) is not a multiple of g."""
    raw = np.einsum("abI,I->ab", j_raw_table(), phi().coeffs.real)
    scale = raw[0, 0]
    if np.max(np.abs(raw - scale * np.eye(DIM))) > 1e-10 or abs(scale) < 1e-10:
        raise RuntimeError("j(phi) is not proportional to the metric")
    c = 6.0 / scale
    if np.max(np.abs(c * raw - 6 * np.eye(DIM))) > 1e-10:
        raise RuntimeError("j calibration failed")
    return c


def j_map(gamma: NumForm) -> np.ndarray:
    """Symmetric bilinear form j(gamma), normalised so j(phi) = 6 g."""
    if gamma.degree != 3:
        raise ValueError("j needs a 3-form")
    return j_calibration() * np.einsum("abI,...I->...ab", j_raw_table(), gamma.coeffs)


@lru_cache(maxsize=None)
def eps_sym_table() -> np.ndarray:
    """A[i, j, K]: coefficient on e^K of eps_{ikl} S_{ij} e^j ^ e^k ^ e^l
    for the unit matrix S = E_{ij}."""
    E = eps3()
    A = np.zeros((DIM, DIM, 35))
    pos = position(3)
    for i in range(DIM):
        for j in range(DIM):
            for k in range(DIM):
                for l in range(DIM):
                    if E[i, k, l] == 0:
                        continue
                    s, K = sort_sign((j, k, l))
                    if s:
                        A[i, j, pos[K]] += E[i, k, l] * s
    A.setflags(write=False)
    return A


def sym_to_three_form(S: np.ndarray) -> NumForm:
    """The 3-form eps_{ikl} S_{ij} e^{jkl}."""
    return NumForm(3, np.einsum("...ij,ijK->...K", S, eps_sym_table()))


@lru_cache(maxsize=None)
def traceless_sym_basis() -> np.ndarray:
    """Orthonormal basis (27 x 7 x 7) of symmetric traceless matrices."""
    mats = []
    for i in range(DIM):
        for j in range(i + 1, DIM):
            M = np.zeros((DIM, DIM))
            M[i, j] = M[j, i] = 1 / np.sqrt(2)
            mats.append(M)
    for i in range(DIM - 1):
        d = np.zeros(DIM)
        d[: i + 1] = 1.0
        d[i + 1] = -(i + 1)
        mats.append(np.diag(d / np.linalg.norm(d)))
    B = np.array(mats)
    B.setflags(write=False)
    return B


def g2_defect(T: np.ndarray) -> np.ndarray:
    """Vector eps_{ijk} T_{jk}; vanishes iff the skew matrix T lies in g2."""
    return np.einsum("ijk,...jk->...i", eps3(), T)
