"""Pointwise linear algebra of generalized complex structures.

Everything here acts on a single fibre V + V* with ``dim V = d`` (even).
Vectors are stored as length-2d arrays, vector part first, covector part
second.  The split-signature pairing is

    <X + a, Y + b> = (b(X) + a(Y)) / 2,

i.e. the block matrix ``[[0, I/2], [I/2, 0]]``.

Skew matrices passed in as 2-forms (``omega``, ``B``, the quadruple's
``b``) are *component* matrices, ``omega[i, j] = omega(e_i, e_j)``.  The
musical map ``X -> i_X omega`` then has matrix ``omega.T``; the block
formulas below use that map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

AXIOM_TOL = 1e-10
RANK_RTOL = 1e-8


class StructureError(ValueError):
    """Input does not satisfy the algebraic preconditions of an operation."""


def pairing_matrix(d: int) -> np.ndarray:
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, eye / 2], [eye / 2, zero]])


def pair(u: np.ndarray, v: np.ndarray) -> complex:
    """Complex-bilinear (not Hermitian) extension of the natural pairing."""
    d = u.shape[0] // 2
    return 0.5 * (u[:d] @ v[d:] + u[d:] @ v[:d])


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _check_square(a, name):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructureError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def _check_skew(a, name, tol=AXIOM_TOL):
    a = _check_square(np.asarray(a, dtype=float), name)
    if np.linalg.norm(a + a.T) > tol * max(1.0, np.linalg.norm(a)):
        raise StructureError(f"{name} must be skew-symmetric")
    return a


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureDiagnostic:
    square_residual: float
    orthogonality_residual: float
    tolerance: float
    passed: bool


@dataclass(frozen=True, eq=False)
class GeneralizedStructure:
    """A generalized almost complex structure at a point, as a real matrix."""

    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 4:
            raise StructureError(
                f"structure matrix must be (2d x 2d) with d even, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0] // 2

    def diagnostic(self, tol: float = AXIOM_TOL) -> StructureDiagnostic:
        return validate_structure(self.mat, tol)

    def allclose(self, other: "GeneralizedStructure", atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.mat, other.mat, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class ComplexSubspace:
    """Complex subspace of (V + V*) (x) C given by an orthonormal column basis."""

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    def isotropy_residual(self) -> float:
        if self.dim == 0:
            return 0.0
        eta = pairing_matrix(self.ambient_dim // 2)
        return float(np.max(np.abs(self.basis.T @ eta @ self.basis)))

    def real_rank(self) -> int:
        """Rank of the stacked basis of the subspace and its conjugate."""
        return numerical_rank(np.hstack([self.basis, self.basis.conj()]))

    def transverse_to_conjugate(self) -> bool:
        return self.real_rank() == 2 * self.dim

    def contains(self, v: np.ndarray, tol: float = 1e-8) -> bool:
        return self.distance(v) <= tol * max(1.0, np.linalg.norm(v))

    def distance(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=complex)
        proj = self.basis @ (self.basis.conj().T @ v)
        return float(np.linalg.norm(v - proj))

    def same_as(self, other: "ComplexSubspace", tol: float = 1e-9) -> bool:
        if self.dim != other.dim:
            return False
        # principal angles via the singular values of the overlap
        s = np.linalg.svd(self.basis.conj().T @ other.basis, compute_uv=False)
        return bool(np.all(np.abs(s - 1.0) < tol))


@dataclass(frozen=True, eq=False)
class Quadruple:
    """Bihermitian data (g, b, J+, J-); ``b`` is a 2-form component matrix."""

    g: np.ndarray
    b: np.ndarray
    jp: np.ndarray
    jm: np.ndarray
    tol: float = field(default=1e-8, compare=False)

    def __post_init__(self):
        for name in ("g", "b", "jp", "jm"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        errs = self.violations(self.tol)
        if errs:
            raise StructureError("invalid quadruple: " + "; ".join(errs))

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def omega_p(self) -> np.ndarray:
        """Map X -> g(J+ X, .) as a matrix (vector -> covector)."""
        return self.g @ self.jp

    @property
    def omega_m(self) -> np.ndarray:
        return self.g @ self.jm

    def violations(self, tol: float) -> list[str]:
        g, b, jp, jm = self.g, self.b, self.jp, self.jm
        d = g.shape[0]
        eye = np.eye(d)
        out = []
        if np.linalg.norm(g - g.T) > tol:
            out.append("g not symmetric")
        elif np.linalg.eigvalsh(g).min() <= 0:
            out.append("g not positive definite")
        if np.linalg.norm(b + b.T) > tol:
            out.append("b not skew")
        for name, j in (("J+", jp), ("J-", jm)):
            if np.linalg.norm(j @ j + eye) > tol:
                out.append(f"{name}^2 != -1")
            if np.linalg.norm(j.T @ g @ j - g) > tol * max(1.0, np.linalg.norm(g)):
                out.append(f"{name} not g-orthogonal")
        return out


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def from_complex_structure(J, tol: float = AXIOM_TOL) -> GeneralizedStructure:
    J = _check_square(np.asarray(J, dtype=float), "J")
    d = J.shape[0]
    if np.linalg.norm(J @ J + np.eye(d)) > tol * max(1.0, np.linalg.norm(J)):
        raise StructureError("J^2 != -1: not a complex structure")
    zero = np.zeros((d, d))
    return GeneralizedStructure(np.block([[J, zero], [zero, -J.T]]))


def from_symplectic(omega, tol: float = AXIOM_TOL) -> GeneralizedStructure:
    omega = _check_skew(omega, "omega", tol)
    d = omega.shape[0]
    flat = omega.T
    if d % 2 or numerical_rank(flat) < d:
        raise StructureError("omega is degenerate")
    zero = np.zeros((d, d))
    return GeneralizedStructure(np.block([[zero, -np.linalg.inv(flat)], [flat, zero]]))


def b_shear(B) -> np.ndarray:
    """The orthogonal map X + a -> X + a + i_X B."""
    d = B.shape[0]
    eye = np.eye(d)
    return np.block([[eye, np.zeros((d, d))], [B.T, eye]])


def b_field_shift(S: GeneralizedStructure, B, tol: float = AXIOM_TOL) -> GeneralizedStructure:
    B = _check_skew(B, "B", tol)
    if B.shape[0] != S.dim:
        raise StructureError("B has wrong dimension")
    return GeneralizedStructure(b_shear(B) @ S.mat @ b_shear(-B))


def direct_sum(S1: GeneralizedStructure, S2: GeneralizedStructure) -> GeneralizedStructure:
    """Product structure on (V1 + V2) + (V1* + V2*)."""
    d1, d2 = S1.dim, S2.dim
    d = d1 + d2
    idx1 = np.r_[0:d1, d:d + d1]
    idx2 = np.r_[d1:d, d + d1:2 * d]
    mat = np.zeros((2 * d, 2 * d))
    mat[np.ix_(idx1, idx1)] = S1.mat
    mat[np.ix_(idx2, idx2)] = S2.mat
    return GeneralizedStructure(mat)


# ---------------------------------------------------------------------------
# Diagnostics and derived data
# ---------------------------------------------------------------------------


def validate_structure(M, tol: float = AXIOM_TOL) -> StructureDiagnostic:
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or n != M.shape[1] or n % 2:
        return StructureDiagnostic(np.inf, np.inf, tol, False)
    eta = pairing_matrix(n // 2)
    sq = float(np.linalg.norm(M @ M + np.eye(n)))
    orth = float(np.linalg.norm(M.T @ eta @ M - eta))
    return StructureDiagnostic(sq, orth, tol, sq < tol and orth < tol)


def eigen_projector(S: GeneralizedStructure) -> np.ndarray:
    """Projector onto the +i eigenspace along the -i eigenspace."""
    return 0.5 * (np.eye(2 * S.dim) - 1j * S.mat)


def i_eigenspace(S: GeneralizedStructure) -> ComplexSubspace:
    P = eigen_projector(S)
    d = S.dim
    Q, R, _ = sla.qr(P, pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[d - 1] <= RANK_RTOL * diag[0]:
        raise np.linalg.LinAlgError(
            f"+i eigenspace rank deficient; |R| diagonal = {diag[:d + 1]}")
    basis = Q[:, :d]
    resid = np.linalg.norm(S.mat @ basis - 1j * basis)
    if resid > 1e-6:
        raise np.linalg.LinAlgError(f"eigenspace residual {resid:.3g}")
    return ComplexSubspace(basis)


def eigenframe_columns(S: GeneralizedStructure) -> np.ndarray:
    """Column indices selecting a frame of L from the projector (pivoted QR)."""
    _, _, piv = sla.qr(eigen_projector(S), pivoting=True)
    return np.sort(piv[:S.dim])


def type_of(S: GeneralizedStructure) -> int:
    L = i_eigenspace(S)
    d = S.dim
    rank = numerical_rank(L.basis[:d, :])
    return int(min(max(d - rank, 0), d))


def induced_subspace(S: GeneralizedStructure, tangent) -> tuple[ComplexSubspace, dict]:
    """Pointwise L_S for a subspace spanned by the columns of ``tangent``.

    Returns the subspace of (T + T*) (x) C in the coordinates of the given
    tangent basis, with flags for maximal isotropy and L_S & conj(L_S) = 0.
    """
    U = np.asarray(tangent, dtype=float)
    d = S.dim
    s = U.shape[1]
    L = i_eigenspace(S).basis
    X = L[:d, :]
    A = X - U @ np.linalg.pinv(U) @ X
    coeffs = sla.null_space(A, rcond=RANK_RTOL) if A.size else np.eye(L.shape[1])
    if coeffs.shape[1] == 0:
        return ComplexSubspace(np.zeros((2 * s, 0), dtype=complex)), {
            "dim": 0, "maximal_isotropic": s == 0, "transverse": True}
    vecs = L @ coeffs
    restricted = np.vstack([np.linalg.pinv(U) @ vecs[:d], U.T @ vecs[d:]])
    q, r = np.linalg.qr(restricted)
    rank = numerical_rank(restricted)
    sub = ComplexSubspace(sla.orth(restricted, rcond=RANK_RTOL) if rank else q[:, :0])
    info = {
        "dim": sub.dim,
        "maximal_isotropic": sub.dim == s and sub.isotropy_residual() < 1e-8,
        "transverse": sub.transverse_to_conjugate(),
    }
    return sub, info


# ---------------------------------------------------------------------------
# Compatible structures and generalized Kaehler quadruples
# ---------------------------------------------------------------------------


def _check_spd(g, tol=AXIOM_TOL):
    g = _check_square(np.asarray(g, dtype=float), "g")
    if np.linalg.norm(g - g.T) > tol * max(1.0, np.linalg.norm(g)):
        raise StructureError("g must be symmetric")
    if np.linalg.eigvalsh(g).min() <= 0:
        raise StructureError("g must be positive definite")
    return g


def metric_form(S1: GeneralizedStructure, S2: GeneralizedStructure) -> np.ndarray:
    """Symmetrized bilinear form <-S1 S2 v, v> as a matrix."""
    eta = pairing_matrix(S1.dim)
    G = -S1.mat @ S2.mat
    F = eta @ G
    return 0.5 * (F + F.T)


def compatible_polar(S: GeneralizedStructure, g) -> GeneralizedStructure:
    """A structure commuting with S whose product with S is a positive metric.

    Polar decomposition of ``A = G~^{-1} S`` with respect to the positive
    metric ``G~ = [[0, g^-1], [g, 0]]``.
    """
    g = _check_spd(g)
    d = S.dim
    if g.shape[0] != d:
        raise StructureError("metric has wrong dimension")
    gi = np.linalg.inv(g)
    zero = np.zeros((d, d))
    Gt = np.block([[zero, gi], [g, zero]])
    A = np.linalg.solve(Gt, S.mat)
    # bilinear form of G~ with respect to the pairing
    M = pairing_matrix(d) @ Gt
    M = 0.5 * (M + M.T)
    C = np.linalg.cholesky(M)
    # A in an M-orthonormal basis: the adjoint becomes the transpose
    Ah = C.T @ A @ np.linalg.inv(C.T)
    # (A A*)^(-1/2) A is the orthogonal polar factor; SVD avoids squaring
    # the condition number of A
    U, sig, Vt = np.linalg.svd(Ah)
    if sig.min() <= RANK_RTOL * sig.max():
        raise np.linalg.LinAlgError(f"A A* not positive; spectrum {sig ** 2}")
    Jh = U @ Vt
    return GeneralizedStructure(np.linalg.inv(C.T) @ Jh @ C.T)


def quadruple_extract(S1: GeneralizedStructure, S2: GeneralizedStructure,
                      tol: float = 1e-8) -> Quadruple:
    d = S1.dim
    comm = np.linalg.norm(S1.mat @ S2.mat - S2.mat @ S1.mat)
    if comm > tol * max(1.0, np.linalg.norm(S1.mat) * np.linalg.norm(S2.mat)):
        raise StructureError(f"structures do not commute (residual {comm:.3g})")
    mf = metric_form(S1, S2)
    lam = np.linalg.eigvalsh(mf)
    if lam.min() <= 0:
        raise StructureError(f"-S1 S2 not positive definite (min eigenvalue {lam.min():.3g})")
    G = -S1.mat @ S2.mat
    g = np.linalg.inv(G[:d, d:])
    g = 0.5 * (g + g.T)
    b_map = G[d:, d:] @ g
    b_map = 0.5 * (b_map - b_map.T)
    eye = np.eye(d)

    def recover(sign):
        graph = np.vstack([eye, b_map + sign * g])
        return (S1.mat @ graph)[:d, :]

    return Quadruple(g=g, b=b_map.T, jp=recover(+1), jm=recover(-1), tol=max(tol, 1e-8))


def assemble_from_quadruple(q: Quadruple) -> tuple[GeneralizedStructure, GeneralizedStructure]:
    g, jp, jm = q.g, q.jp, q.jm
    wp_inv = np.linalg.inv(q.omega_p)
    wm_inv = np.linalg.inv(q.omega_m)
    shear = b_shear(q.b)
    unshear = b_shear(-q.b)
    out = []
    for s in (+1, -1):
        core = 0.5 * np.block([
            [jp + s * jm, -(wp_inv - s * wm_inv)],
            [q.omega_p - s * q.omega_m, -(jp.T + s * jm.T)],
        ])
        out.append(GeneralizedStructure(shear @ core @ unshear))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Random generators (property tests and CLI trials)
# ---------------------------------------------------------------------------


def standard_complex(d: int) -> np.ndarray:
    """Block-diagonal J with J e_{2k} = e_{2k+1}."""
    J = np.zeros((d, d))
    for k in range(0, d, 2):
        J[k + 1, k] = 1.0
        J[k, k + 1] = -1.0
    return J


def standard_symplectic(d: int) -> np.ndarray:
    """Components of sum_k e^{2k} ^ e^{2k+1}."""
    return -standard_complex(d)


def random_skew(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(scale=scale, size=(d, d))
    return a - a.T


def random_spd(d: int, rng: np.random.Generator) -> np.ndarray:
    a = random_gl(d, rng)
    return a @ a.T


def random_gl(d: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Well-conditioned random invertible matrix (singular values in e^[-s, s])."""
    q1, _ = np.linalg.qr(rng.normal(size=(d, d)))
    q2, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q1 @ np.diag(np.exp(rng.uniform(-spread, spread, d))) @ q2


def random_orthogonal_dd(d: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random element of O(d, d): a GL(d) action, a beta-transform and a B-shear."""
    a = random_gl(d, rng)
    zero = np.zeros((d, d))
    act = np.block([[a, zero], [zero, np.linalg.inv(a).T]])
    beta = np.block([[np.eye(d), random_skew(d, rng, scale)], [zero, np.eye(d)]])
    return b_shear(random_skew(d, rng, scale)) @ beta @ act


def random_complex_structure(d: int, rng: np.random.Generator) -> np.ndarray:
    a = random_gl(d, rng)
    return a @ standard_complex(d) @ np.linalg.inv(a)


def random_g_orthogonal_complex(g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = g.shape[0]
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    J0 = Q @ standard_complex(d) @ Q.T
    w, V = np.linalg.eigh(g)
    root = V @ np.diag(np.sqrt(w)) @ V.T
    return np.linalg.solve(root, J0 @ root)


def random_structure(d: int, rng: np.random.Generator, kind: str = "any") -> GeneralizedStructure:
    """Random structure: a standard model of random type conjugated in O(d, d)."""
    if kind == "any":
        kind = rng.choice(["symplectic", "complex", "mixed"])
    if kind == "symplectic":
        a = random_gl(d, rng)
        base = from_symplectic(a.T @ standard_symplectic(d) @ a)
    elif kind == "complex":
        base = from_complex_structure(random_complex_structure(d, rng))
    elif kind == "mixed":
        if d < 4:
            return random_structure(d, rng, "symplectic")
        k = 2 * rng.integers(1, d // 2) if d > 4 else 2
        base = direct_sum(from_complex_structure(standard_complex(k)),
                          from_symplectic(standard_symplectic(d - k)))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    O = random_orthogonal_dd(d, rng)
    return GeneralizedStructure(O @ base.mat @ np.linalg.inv(O))


def random_quadruple(d: int, rng: np.random.Generator) -> Quadruple:
    g = random_spd(d, rng)
    return Quadruple(g=g, b=random_skew(d, rng, 0.5),
                     jp=random_g_orthogonal_complex(g, rng),
                     jm=random_g_orthogonal_complex(g, rng))
