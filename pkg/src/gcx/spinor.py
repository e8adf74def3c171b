"""Spinor engine: Clifford action of V + V* on complex differential forms.

A form is a coefficient vector over the 2^d monomials ``e^I``; bit ``k`` of
the index mask selects ``e^(k+1)`` and monomials are ordered increasingly.
The action is ``(X + a) . phi = i_X phi + a ^ phi``, which squares to the
pairing: ``v . (v . phi) = <v, v> phi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.linalg as sla

from .genlin import (RANK_RTOL, ComplexSubspace, GeneralizedStructure, StructureError,
                     i_eigenspace)

COEFF_TOL = 1e-12


def _popcount(x: int) -> int:
    return bin(x).count("1")


@lru_cache(maxsize=None)
def _wedge_table(d: int) -> np.ndarray:
    """sign[a, b] such that e^a ^ e^b = sign * e^(a|b) (0 on overlap)."""
    n = 1 << d
    masks = np.arange(n)
    sign = np.zeros((n, n), dtype=np.int8)
    for a in range(n):
        overlap = (masks & a) != 0
        # number of transpositions: pairs (i in a, j in b) with j < i
        swaps = np.zeros(n, dtype=int)
        for i in range(d):
            if a >> i & 1:
                swaps += np.array([_popcount(b & ((1 << i) - 1)) for b in range(n)])
        s = np.where(swaps % 2, -1, 1)
        s[overlap] = 0
        sign[a] = s
    sign.setflags(write=False)
    return sign


@lru_cache(maxsize=None)
def _generator_matrices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of e^k ^ (.) and i_{e_k} on the 2^d-dimensional form space."""
    n = 1 << d
    ext = np.zeros((d, n, n))
    inn = np.zeros((d, n, n))
    for k in range(d):
        bit = 1 << k
        for m in range(n):
            sgn = -1.0 if _popcount(m & (bit - 1)) % 2 else 1.0
            if m & bit:
                inn[k, m ^ bit, m] = sgn
            else:
                ext[k, m | bit, m] = sgn
    ext.setflags(write=False)
    inn.setflags(write=False)
    return ext, inn


@dataclass(frozen=True, eq=False)
class MultiForm:
    """Complex inhomogeneous form on a d-dimensional space."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        if c.shape[0] != 1 << self.dim:
            raise ValueError(f"expected {1 << self.dim} coefficients, got {c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, d: int) -> "MultiForm":
        return cls(d, np.zeros(1 << d))

    @classmethod
    def scalar(cls, d: int, value: complex = 1.0) -> "MultiForm":
        c = np.zeros(1 << d, dtype=complex)
        c[0] = value
        return cls(d, c)

    @classmethod
    def monomial(cls, d: int, indices, value: complex = 1.0) -> "MultiForm":
        """``value * e^{i1} ^ e^{i2} ^ ...`` with 1-based, possibly unsorted indices."""
        out = cls.scalar(d, value)
        for i in reversed(list(indices)):
            out = one_form(d, np.eye(d)[i - 1]).wedge(out)
        return out

    def __add__(self, other: "MultiForm") -> "MultiForm":
        return MultiForm(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: "MultiForm") -> "MultiForm":
        return MultiForm(self.dim, self.coeffs - other.coeffs)

    def __mul__(self, lam: complex) -> "MultiForm":
        return MultiForm(self.dim, lam * self.coeffs)

    __rmul__ = __mul__

    def conj(self) -> "MultiForm":
        return MultiForm(self.dim, self.coeffs.conj())

    def wedge(self, other: "MultiForm") -> "MultiForm":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        sign = _wedge_table(self.dim)
        out = np.zeros(1 << self.dim, dtype=complex)
        nz_a = np.flatnonzero(self.coeffs)
        nz_b = np.flatnonzero(other.coeffs)
        for a in nz_a:
            s = sign[a, nz_b]
            keep = s != 0
            np.add.at(out, a | nz_b[keep], s[keep] * self.coeffs[a] * other.coeffs[nz_b[keep]])
        return MultiForm(self.dim, out)

    def degree_part(self, k: int) -> "MultiForm":
        mask = np.array([_popcount(m) == k for m in range(1 << self.dim)])
        return MultiForm(self.dim, np.where(mask, self.coeffs, 0))

    def degrees(self, tol: float = COEFF_TOL) -> list[int]:
        scale = max(np.abs(self.coeffs).max(), 1e-300)
        return sorted({_popcount(m) for m in np.flatnonzero(np.abs(self.coeffs) > tol * scale)})

    def top(self) -> complex:
        """Coefficient of e^1 ^ ... ^ e^d."""
        return complex(self.coeffs[-1])

    def is_zero(self, tol: float = COEFF_TOL) -> bool:
        return bool(np.abs(self.coeffs).max() <= tol)

    def normalized(self) -> "MultiForm":
        """Scale so the largest-magnitude coefficient (first on ties) equals 1."""
        mags = np.abs(self.coeffs)
        k = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-9))[0])
        return MultiForm(self.dim, self.coeffs / self.coeffs[k])

    def to_triples(self, tol: float = COEFF_TOL) -> list[tuple[int, float, float]]:
        return [(int(m), float(self.coeffs[m].real), float(self.coeffs[m].imag))
                for m in np.flatnonzero(np.abs(self.coeffs) > tol)]


def one_form(d: int, a) -> MultiForm:
    c = np.zeros(1 << d, dtype=complex)
    c[[1 << k for k in range(d)]] = np.asarray(a, dtype=complex)
    return MultiForm(d, c)


def two_form(F) -> MultiForm:
    """The form sum_{i<j} F[i, j] e^i ^ e^j of a (complex) skew component matrix."""
    F = np.asarray(F, dtype=complex)
    d = F.shape[0]
    c = np.zeros(1 << d, dtype=complex)
    for i in range(d):
        for j in range(i + 1, d):
            c[(1 << i) | (1 << j)] = F[i, j]
    return MultiForm(d, c)


def wedge_all(forms) -> MultiForm:
    forms = list(forms)
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out


def form_exp(F) -> MultiForm:
    """exp of a 2-form given by its skew component matrix (finite sum)."""
    F2 = two_form(F)
    d = F2.dim
    out = MultiForm.scalar(d)
    power = MultiForm.scalar(d)
    for k in range(1, d // 2 + 1):
        power = power.wedge(F2)
        out = out + power * (1.0 / factorial(k))
    return out


def clifford_matrix(v) -> np.ndarray:
    """Matrix of phi -> v . phi for v in (V + V*) (x) C."""
    v = np.asarray(v, dtype=complex)
    d = v.shape[0] // 2
    ext, inn = _generator_matrices(d)
    return np.tensordot(v[:d], inn, axes=1) + np.tensordot(v[d:], ext, axes=1)


def clifford_act(v, phi: MultiForm) -> MultiForm:
    v = np.asarray(v)
    if v.shape[0] != 2 * phi.dim:
        raise ValueError(f"vector of length {v.shape[0]} cannot act on forms in dimension {phi.dim}")
    return MultiForm(phi.dim, clifford_matrix(v) @ phi.coeffs)


def _action_on(phi: MultiForm) -> np.ndarray:
    """Matrix of v -> v . phi (columns indexed by the 2d basis vectors)."""
    d = phi.dim
    ext, inn = _generator_matrices(d)
    cols = [inn[k] @ phi.coeffs for k in range(d)] + [ext[k] @ phi.coeffs for k in range(d)]
    return np.stack(cols, axis=1)


def annihilator(phi: MultiForm) -> ComplexSubspace:
    if phi.is_zero():
        raise StructureError("the zero form has no annihilator")
    K = _action_on(phi)
    scale = np.linalg.norm(phi.coeffs)
    _, s, vh = np.linalg.svd(K)
    s_full = np.zeros(K.shape[1])
    s_full[:s.shape[0]] = s
    null = s_full <= RANK_RTOL * max(scale, s_full.max())
    return ComplexSubspace(vh.conj().T[:, null])


@dataclass(frozen=True)
class SpinorReport:
    is_pure: bool
    ann_dim: int
    type_k: int
    nondegenerate: bool
    isotropy_residual: float
    real_rank: int


def purity_report(phi: MultiForm) -> SpinorReport:
    L = annihilator(phi)
    d = phi.dim
    pure = L.dim == d
    rank = L.real_rank()
    return SpinorReport(
        is_pure=pure,
        ann_dim=L.dim,
        type_k=phi.degrees()[0],
        nondegenerate=pure and rank == 2 * d,
        isotropy_residual=L.isotropy_residual(),
        real_rank=rank,
    )


def spinor_exp(B, omega, Omega: MultiForm | None = None) -> MultiForm:
    """e^{B + i omega} ^ Omega."""
    B = np.asarray(B, dtype=float)
    omega = np.asarray(omega, dtype=float)
    e = form_exp(B + 1j * omega)
    return e if Omega is None else e.wedge(Omega)


def structure_from_spinor(phi: MultiForm) -> GeneralizedStructure:
    rep = purity_report(phi)
    if not rep.nondegenerate:
        raise StructureError(f"spinor is not a nondegenerate pure spinor: {rep}")
    L = annihilator(phi).basis
    basis = np.hstack([L, L.conj()])
    d = phi.dim
    eig = np.diag(np.r_[np.full(d, 1j), np.full(d, -1j)])
    S = basis @ eig @ np.linalg.inv(basis)
    if np.abs(S.imag).max() > 1e-8:
        raise np.linalg.LinAlgError("structure from spinor is not real")
    return GeneralizedStructure(S.real)


def spinor_of_structure(S: GeneralizedStructure) -> MultiForm:
    """Generator of the canonical line of S (largest coefficient normalized to 1)."""
    d = S.dim
    L = i_eigenspace(S).basis
    K = np.vstack([clifford_matrix(L[:, j]) for j in range(d)])
    _, s, vh = np.linalg.svd(K)
    # the kernel must be exactly one-dimensional
    if s[-1] > 1e-8 * s[0] or s[-2] <= 1e-6 * s[0]:
        raise np.linalg.LinAlgError(
            f"canonical line kernel is not 1-dimensional; smallest singular values {s[-3:]}")
    return MultiForm(d, vh[-1].conj()).normalized()


def top_degree_pairing(omega, Omega: MultiForm, exponent: int) -> complex:
    """Top coefficient of omega^exponent ^ Omega ^ conj(Omega) (0 if the degree is wrong)."""
    w = two_form(np.asarray(omega, dtype=float))
    d = Omega.dim
    power = MultiForm.scalar(d)
    for _ in range(exponent):
        power = power.wedge(w)
    return power.wedge(Omega).wedge(Omega.conj()).top()


def nondegeneracy_crosscheck(B, omega, Omega: MultiForm) -> dict:
    """Compare the rank test with the top-degree test at both candidate exponents.

    For ``phi = e^{B + i omega} ^ Omega`` of type k in dimension 2n the
    form-level condition pairs omega with Omega ^ conj(Omega); only one
    exponent reaches the top degree.
    """
    phi = spinor_exp(B, omega, Omega)
    rep = purity_report(phi)
    n = Omega.dim // 2
    k = Omega.degrees()[0]
    scale = max(1.0, np.abs(np.asarray(omega)).max()) ** max(n - k, 0)
    out = {"rank_test": rep.nondegenerate, "type": k}
    for label, p in (("n-k", n - k), ("2(n-k)", 2 * (n - k))):
        val = top_degree_pairing(omega, Omega, p)
        out[label] = abs(val) > 1e-9 * scale * max(1.0, np.linalg.norm(Omega.coeffs)) ** 2
    return out
