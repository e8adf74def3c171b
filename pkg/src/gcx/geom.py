"""Chart models, the twisted Courant bracket and integrability residuals.

Points on a model are pairs ``(x, chart)`` of chart coordinates and a chart
index; flat models have a single chart 0.  Derivatives default to central
finite differences with step ``h = 1e-5 * (1 + |x|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .genlin import (GeneralizedStructure, Quadruple, compatible_polar, eigen_projector,
                     eigenframe_columns, pair, quadruple_extract)

FD_REL_STEP = 1e-5


def fd_step(x) -> float:
    return FD_REL_STEP * (1.0 + float(np.linalg.norm(x)))


def fd_jacobian(f: Callable, x, h: float | None = None) -> np.ndarray:
    """Central differences; result has shape ``f(x).shape + (len(x),)``."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x) if h is None else h
    cols = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def fd_hessian(f: Callable, x, h: float | None = None) -> np.ndarray:
    """Central second differences of a scalar function (symmetrized)."""
    x = np.asarray(x, dtype=float)
    h = 1e-4 * (1.0 + float(np.linalg.norm(x))) if h is None else h
    d = x.shape[0]
    Hs = np.zeros((d, d))
    f0 = f(x)
    eye = np.eye(d) * h
    for i in range(d):
        Hs[i, i] = (f(x + eye[i]) - 2 * f0 + f(x - eye[i])) / h ** 2
        for j in range(i + 1, d):
            v = (f(x + eye[i] + eye[j]) - f(x + eye[i] - eye[j])
                 - f(x - eye[i] + eye[j]) + f(x - eye[i] - eye[j])) / (4 * h ** 2)
            Hs[i, j] = Hs[j, i] = v
    return Hs


def zero_three_form(d: int) -> np.ndarray:
    return np.zeros((d, d, d))


def antisymmetrize3(T: np.ndarray) -> np.ndarray:
    """Fully antisymmetric part of a 3-tensor."""
    return (T - T.transpose(1, 0, 2) - T.transpose(0, 2, 1) - T.transpose(2, 1, 0)
            + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)) / 6.0


def exterior_derivative_2form(B: Callable, x, h: float | None = None) -> np.ndarray:
    """Components (dB)_{ijk} of the exterior derivative of a 2-form field."""
    D = fd_jacobian(B, x, h)              # D[j, k, i] = d_i B_jk
    T = D.transpose(2, 0, 1)              # T[i, j, k] = d_i B_jk
    return T + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)


def exterior_derivative_3form(H: Callable, x, h: float | None = None) -> np.ndarray:
    D = fd_jacobian(H, x, h)              # D[b, c, e, a] = d_a H_bce
    T = D.transpose(3, 0, 1, 2)
    return (T - T.transpose(1, 0, 2, 3) + T.transpose(1, 2, 0, 3)
            - T.transpose(1, 2, 3, 0))


# ---------------------------------------------------------------------------
# Chart models
# ---------------------------------------------------------------------------


class ChartModel:
    """A manifold presented by charts, carrying a structure field and a 3-form.

    Subclasses implement :meth:`structure_mat`; everything else has usable
    defaults for a single flat chart.
    """

    name = "chart"
    n_charts = 1

    def __init__(self, d: int, params: dict | None = None):
        self.d = d
        self.params = dict(params or {})

    # -- fields ---------------------------------------------------------
    def structure_mat(self, x, chart: int = 0) -> np.ndarray:
        raise NotImplementedError

    def structure(self, x, chart: int = 0) -> GeneralizedStructure:
        return GeneralizedStructure(self.structure_mat(x, chart))

    def H(self, x, chart: int = 0) -> np.ndarray:
        return zero_three_form(self.d)

    def metric(self, x, chart: int = 0) -> np.ndarray:
        """Riemannian metric used to build a compatible structure."""
        return np.eye(self.d)

    def quadruple(self, x, chart: int = 0) -> Quadruple:
        S = self.structure(x, chart)
        return quadruple_extract(S, compatible_polar(S, self.metric(x, chart)))

    # -- charts ---------------------------------------------------------
    def embed(self, x, chart: int = 0) -> np.ndarray:
        """Chart-independent coordinates used for distances between points."""
        return np.asarray(x, dtype=float)

    def rechart(self, x, chart: int = 0) -> tuple[np.ndarray, int]:
        return np.asarray(x, dtype=float), chart

    def to_chart(self, x, chart: int, target: int) -> np.ndarray:
        if target != chart:
            raise ValueError("single-chart model")
        return np.asarray(x, dtype=float)

    def in_domain(self, x, chart: int = 0) -> bool:
        return True

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """n points as (coordinates, chart indices)."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "d": self.d, "params": self.params}


class BoxModel(ChartModel):
    """Single chart on an axis-aligned box, sampled quasi-uniformly."""

    def __init__(self, d: int, lo, hi, params: dict | None = None):
        super().__init__(d, params)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,)).copy()

    def in_domain(self, x, chart: int = 0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lo - 1e-12) and np.all(x <= self.hi + 1e-12))

    def sample(self, n, rng):
        from .sampling import halton
        u = halton(n, self.d, rng)
        return self.lo + u * (self.hi - self.lo), np.zeros(n, dtype=int)


class ConstantModel(BoxModel):
    """A constant structure on a box."""

    name = "constant"

    def __init__(self, S: GeneralizedStructure, lo=-1.0, hi=1.0, name: str | None = None,
                 params: dict | None = None):
        super().__init__(S.dim, lo, hi, params)
        self._mat = S.mat
        if name:
            self.name = name

    def structure_mat(self, x, chart=0):
        return self._mat


class FieldModel(BoxModel):
    """Structure and 3-form given by callables on a box (used for fixtures)."""

    def __init__(self, d, structure_fn, H_fn=None, lo=-1.0, hi=1.0, name="field",
                 params=None):
        super().__init__(d, lo, hi, params)
        self._S = structure_fn
        self._H = H_fn
        self.name = name

    def structure_mat(self, x, chart=0):
        S = self._S(np.asarray(x, dtype=float))
        return S.mat if isinstance(S, GeneralizedStructure) else np.asarray(S)

    def H(self, x, chart=0):
        if self._H is None:
            return zero_three_form(self.d)
        return np.asarray(self._H(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# Sections and the bracket
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SectionField:
    """A section x -> X + a of (T + T*) (x) C with a derivative evaluator."""

    value: Callable
    jacobian: Callable | None = field(default=None)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=complex)

    def jac(self, x, h: float | None = None) -> np.ndarray:
        """Matrix D with D[a, i] = d_i s_a."""
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=complex)
        return fd_jacobian(self, x, h)


def bracket_from_jets(s1, D1, s2, D2, Hx) -> np.ndarray:
    """Twisted Courant bracket from values and first derivatives at a point."""
    d = Hx.shape[0]
    X, a = s1[:d], s1[d:]
    Y, b = s2[:d], s2[d:]
    DX, Da = D1[:d], D1[d:]
    DY, Db = D2[:d], D2[d:]
    vec = DY @ X - DX @ Y
    lie_X_b = Db @ X + DX.T @ b
    lie_Y_a = Da @ Y + DY.T @ a
    d_bX = Db.T @ X + DX.T @ b
    d_aY = Da.T @ Y + DY.T @ a
    twist = np.einsum("ijk,i,j->k", Hx, X, Y)
    cov = lie_X_b - lie_Y_a - 0.5 * (d_bX - d_aY) + twist
    return np.concatenate([vec, cov])


def courant_bracket(s1: SectionField, s2: SectionField, H, p, h: float | None = None) -> np.ndarray:
    """[s1, s2]_H at p; ``H`` is a 3-form component array or a callable."""
    p = np.asarray(p, dtype=float)
    Hx = H(p) if callable(H) else np.asarray(H, dtype=float)
    return bracket_from_jets(s1(p), s1.jac(p, h), s2(p), s2.jac(p, h), Hx)


class FrameDiscontinuity(RuntimeError):
    """The fixed-pivot frame degenerates inside the finite-difference stencil."""


def structure_frame(model: ChartModel, x, chart: int = 0, h: float | None = None):
    """Smooth frame of L near x: fixed projector columns and their derivatives.

    Returns (piv, values, derivs) with values of shape (2d, d) and derivs of
    shape (2d, d, d) where derivs[:, k, i] = d_i l_k.
    """
    x = np.asarray(x, dtype=float)
    h = fd_step(x) if h is None else h
    S0 = model.structure(x, chart)
    piv = eigenframe_columns(S0)
    P0 = eigen_projector(S0)[:, piv]
    DS = fd_jacobian(lambda y: model.structure_mat(y, chart), x, h)   # (2d, 2d, d)
    DP = -0.5j * DS[:, piv, :]
    # frame must stay independent across the stencil
    s = np.linalg.svd(P0, compute_uv=False)
    if s[-1] < 1e-6 * s[0]:
        raise FrameDiscontinuity(f"frame singular values {s}")
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        for sgn in (1, -1):
            Pi = eigen_projector(model.structure(x + sgn * e, chart))[:, piv]
            si = np.linalg.svd(Pi, compute_uv=False)
            if si[-1] < 1e-6 * si[0]:
                raise FrameDiscontinuity(f"frame degenerates along axis {i}")
    return piv, P0, DP


def integrability_residual(model: ChartModel, x, chart: int = 0, h: float | None = None) -> float:
    """max |<[l_i, l_j]_H, l_k>| over a local frame of the +i eigenbundle."""
    x = np.asarray(x, dtype=float)
    _, L, DL = structure_frame(model, x, chart, h)
    Hx = model.H(x, chart)
    d = model.d
    worst = 0.0
    for i in range(d):
        for j in range(i + 1, d):
            br = bracket_from_jets(L[:, i], DL[:, i, :], L[:, j], DL[:, j, :], Hx)
            for k in range(d):
                worst = max(worst, abs(pair(br, L[:, k])))
    return float(worst)


def dH_residual(model: ChartModel, x, chart: int = 0, h: float | None = None) -> float:
    dH = exterior_derivative_3form(lambda y: model.H(y, chart), x, h)
    return float(np.abs(dH).max())


def make_builtin(name: str, **params):
    """Look up a built-in model by name (see :mod:`gcx.builtins`)."""
    from .builtins import make_builtin as _make
    return _make(name, **params)
