"""Built-in chart models and their torus actions."""

from __future__ import annotations

import numpy as np

from .genlin import (direct_sum, from_complex_structure, from_symplectic, standard_complex,
                     standard_symplectic)
from .geom import BoxModel, ChartModel, ConstantModel
from .hamilton import MomentSystem
from .sampling import halton

BUILTINS = ("r2n_symplectic", "r2_rotation", "cp2_fs", "c_counterexample", "product_family")


def _rotation_fields(d: int):
    """Generator k rotates the (x_k, y_k) plane by (y, -x)."""
    def fields(x, chart=0):
        F = np.zeros((d, d // 2))
        for k in range(d // 2):
            F[2 * k, k] = x[2 * k + 1]
            F[2 * k + 1, k] = -x[2 * k]
        return F
    return fields


def _half_norms(d: int):
    def mu(x, chart=0):
        return 0.5 * (x[0::2] ** 2 + x[1::2] ** 2)

    def dmu(x, chart=0):
        D = np.zeros((d // 2, d))
        for k in range(d // 2):
            D[k, 2 * k:2 * k + 2] = x[2 * k:2 * k + 2]
        return D
    return mu, dmu


def r2n_symplectic(d: int = 2, radius: float = 2.0) -> MomentSystem:
    if d < 2 or d % 2:
        raise ValueError("d must be a positive even integer")
    model = ConstantModel(from_symplectic(standard_symplectic(d)), -radius, radius,
                          name="r2n_symplectic", params={"d": d})
    mu, dmu = _half_norms(d)
    return MomentSystem(model, d // 2, _rotation_fields(d), mu, dmu=dmu)


class DiskModel(ConstantModel):
    """Constant structure on the closed disk of a given radius in R^2."""

    def __init__(self, S, radius: float, name: str, params=None):
        super().__init__(S, -radius, radius, name=name, params=params)
        self.radius = radius

    def in_domain(self, x, chart=0):
        return bool(np.linalg.norm(x) <= self.radius + 1e-12)

    def sample(self, n, rng):
        u = halton(n, 2, rng)
        r = self.radius * np.sqrt(u[:, 0])
        t = 2 * np.pi * u[:, 1]
        return np.c_[r * np.cos(t), r * np.sin(t)], np.zeros(n, dtype=int)


def r2_rotation(radius: float = 2.0) -> MomentSystem:
    model = DiskModel(from_symplectic(standard_symplectic(2)), radius, "r2_rotation",
                      {"radius": radius})
    mu, dmu = _half_norms(2)
    return MomentSystem(model, 1, _rotation_fields(2), mu, dmu=dmu)


def c_counterexample(half_width: float = 2.0) -> MomentSystem:
    """C with its complex structure, a trivial T^3 action and mu = Im h, h = (iz, z, z^2)."""
    model = ConstantModel(from_complex_structure(standard_complex(2)), -half_width, half_width,
                          name="c_counterexample", params={"half_width": half_width})

    def fields(x, chart=0):
        return np.zeros((2, 3))

    def mu(x, chart=0):
        return np.array([x[0], x[1], 2 * x[0] * x[1]])

    def dmu(x, chart=0):
        return np.array([[1.0, 0.0], [0.0, 1.0], [2 * x[1], 2 * x[0]]])

    def alpha(x, chart=0):
        return np.array([[0.0, -1.0], [1.0, 0.0], [2 * x[0], -2 * x[1]]])

    return MomentSystem(model, 3, fields, mu, alpha=alpha, dmu=dmu)


# ---------------------------------------------------------------------------
# The projective plane with a deformed Fubini-Study form
# ---------------------------------------------------------------------------


def _check_w(w):
    w = np.asarray(w, dtype=complex).reshape(-1)
    if w.shape != (2,) or np.any(np.abs(w) == 0):
        raise ValueError(f"w must have two nonzero components, got {w}")
    return w


class CP2Charts:
    """Affine charts Z_k = 1 of CP^2 with real coordinates (Re u, Im u) of the
    two remaining homogeneous coordinates, in increasing index order."""

    OTHERS = ((1, 2), (0, 2), (0, 1))
    E = np.array([[1, 1j, 0, 0], [0, 0, 1, 1j]])

    @classmethod
    def homog(cls, x, chart):
        Z = np.empty(3, dtype=complex)
        Z[chart] = 1.0
        a, b = cls.OTHERS[chart]
        Z[a] = x[0] + 1j * x[1]
        Z[b] = x[2] + 1j * x[3]
        return Z

    @classmethod
    def coords(cls, Z, chart):
        a, b = cls.OTHERS[chart]
        u = Z[[a, b]] / Z[chart]
        return np.array([u[0].real, u[0].imag, u[1].real, u[1].imag])

    @classmethod
    def best_chart(cls, Z):
        return int(np.argmax(np.abs(Z)))

    @classmethod
    def kaehler_blocks(cls, x, chart, c):
        """Form components and metric of (i/2) dd^c-type form of log sum c_j |Z_j|^2."""
        Z = cls.homog(x, chart)
        S = float(np.sum(c * np.abs(Z) ** 2))
        idx = list(cls.OTHERS[chart])
        ca = c[idx]
        Za = Z[idx]
        h = np.diag(ca) / S - np.outer(ca * Za.conj(), ca * Za) / S ** 2
        A = cls.E.T @ h @ cls.E.conj()
        return -A.imag, A.real

    @classmethod
    def fields(cls, x, chart):
        """Columns: the two circle generators acting on Z_1 and Z_2."""
        F = np.zeros((4, 2))
        for slot, j in enumerate(cls.OTHERS[chart]):
            u_re, u_im = x[2 * slot], x[2 * slot + 1]
            for g in (1, 2):
                rate = float(j == g) - float(chart == g)
                F[2 * slot, g - 1] = -rate * u_im
                F[2 * slot + 1, g - 1] = rate * u_re
        return F

    @classmethod
    def embed(cls, x, chart):
        Z = cls.homog(x, chart)
        Pr = np.outer(Z, Z.conj()) / np.sum(np.abs(Z) ** 2)
        return np.concatenate([Pr.real.ravel(), Pr.imag.ravel()])

    @classmethod
    def sample_homog(cls, u):
        """Map points of [0,1)^4 to unit vectors in C^3 (uniform on CP^2).

        The squared moduli are uniform on the simplex; the square-root
        triangle map keeps the low-discrepancy structure of the first two
        coordinates.
        """
        r = np.sqrt(u[:, 0])
        t = np.c_[1 - r, r * (1 - u[:, 1]), r * u[:, 1]]
        ph = np.exp(2j * np.pi * u[:, 2:4])
        return np.c_[np.sqrt(t[:, 0]), np.sqrt(t[:, 1]) * ph[:, 0], np.sqrt(t[:, 2]) * ph[:, 1]]


def weighted_moment_differential(x, chart, w_abs):
    """Chart differential of :func:`weighted_moment` (2 x 4)."""
    Z = CP2Charts.homog(x, chart)
    n2 = np.abs(Z) ** 2
    N = n2.sum()
    dn2 = np.zeros((3, 4))
    for slot, j in enumerate(CP2Charts.OTHERS[chart]):
        dn2[j, 2 * slot:2 * slot + 2] = 2 * x[2 * slot:2 * slot + 2]
    dN = dn2.sum(axis=0)
    out = np.empty((2, 4))
    for row, j in enumerate((1, 2)):
        out[row] = -0.5 * w_abs[row] * (dn2[j] * N - n2[j] * dN) / N ** 2
    return out


def weighted_moment(Z, w_abs):
    """mu_w([Z]) = -(|w1| |Z1|^2, |w2| |Z2|^2) / (2 |Z|^2)."""
    Z = np.asarray(Z)
    n2 = np.abs(Z) ** 2
    return -0.5 * np.array([w_abs[0] * n2[..., 1], w_abs[1] * n2[..., 2]]) / n2.sum(-1)


class CP2Model(ChartModel):
    """CP^2 with the symplectic structure of T_w^* of the Fubini-Study form."""

    name = "cp2_fs"
    n_charts = 3

    def __init__(self, w=(1.0, 1.0)):
        w = _check_w(w)
        super().__init__(4, {"w": [float(abs(v)) for v in w]})
        self.w = w
        self.w_abs = np.abs(w)
        self.c = np.array([1.0, self.w_abs[0] ** 2, self.w_abs[1] ** 2])

    def form(self, x, chart=0):
        return CP2Charts.kaehler_blocks(x, chart, self.c)[0]

    def structure_mat(self, x, chart=0):
        return from_symplectic(self.form(x, chart)).mat

    def metric(self, x, chart=0):
        return CP2Charts.kaehler_blocks(x, chart, self.c)[1]

    def homog(self, x, chart=0):
        return CP2Charts.homog(x, chart)

    def embed(self, x, chart=0):
        return CP2Charts.embed(x, chart)

    def rechart(self, x, chart=0):
        Z = CP2Charts.homog(x, chart)
        k = CP2Charts.best_chart(Z)
        return CP2Charts.coords(Z, k), k

    def to_chart(self, x, chart, target):
        Z = CP2Charts.homog(x, chart)
        if abs(Z[target]) < 1e-12:
            raise ValueError("point outside target chart")
        return CP2Charts.coords(Z, target)

    def in_domain(self, x, chart=0):
        return bool(np.all(np.isfinite(x)))

    def sample(self, n, rng):
        Z = CP2Charts.sample_homog(halton(n, 4, rng))
        charts = np.argmax(np.abs(Z), axis=1)
        X = np.array([CP2Charts.coords(z, k) for z, k in zip(Z, charts)]).reshape(n, 4)
        return X, charts

    def fixed_points(self):
        """The three coordinate points, each at the origin of its own chart."""
        return [(np.zeros(4), k) for k in range(3)]


def cp2_fs(w=(1.0, 1.0)) -> MomentSystem:
    model = CP2Model(w)

    def mu(x, chart=0):
        return weighted_moment(CP2Charts.homog(x, chart), model.w_abs)

    def dmu(x, chart=0):
        return weighted_moment_differential(x, chart, model.w_abs)

    return MomentSystem(model, 2, CP2Charts.fields, mu, dmu=dmu, name="cp2_fs")


class ProductFamilyModel(ChartModel):
    """(C^*)^2 x CP^2 with the spinor dw1 ^ dw2 ^ exp(i T_w^* omega_FS).

    Coordinates are (Re w1, Im w1, Re w2, Im w2) followed by a CP^2 chart;
    samples lie on the slice through the base value of w.
    """

    name = "product_family"
    n_charts = 3
    direction_blocks = {"w": [0, 1, 2, 3], "fiber": [4, 5, 6, 7]}

    def __init__(self, w=(1.0, 1.0)):
        w = _check_w(w)
        super().__init__(8, {"w": [[float(v.real), float(v.imag)] for v in w]})
        self.w0 = np.array([w[0].real, w[0].imag, w[1].real, w[1].imag])
        self._wpart = from_complex_structure(-standard_complex(4))

    @staticmethod
    def weights(x):
        a1 = x[0] ** 2 + x[1] ** 2
        a2 = x[2] ** 2 + x[3] ** 2
        return np.array([1.0, a1, a2])

    def fiber_form(self, x, chart=0):
        return CP2Charts.kaehler_blocks(x[4:], chart, self.weights(x))[0]

    def structure_mat(self, x, chart=0):
        return direct_sum(self._wpart, from_symplectic(self.fiber_form(x, chart))).mat

    def spinor(self, x, chart=0):
        from .spinor import one_form, spinor_exp
        Om = np.zeros((8, 8))
        Om[4:, 4:] = self.fiber_form(x, chart)
        dw1 = one_form(8, [1, 1j, 0, 0, 0, 0, 0, 0])
        dw2 = one_form(8, [0, 0, 1, 1j, 0, 0, 0, 0])
        return spinor_exp(np.zeros((8, 8)), Om, dw1.wedge(dw2))

    def metric(self, x, chart=0):
        g = np.eye(8)
        g[4:, 4:] = CP2Charts.kaehler_blocks(x[4:], chart, self.weights(x))[1]
        return g

    def embed(self, x, chart=0):
        return np.concatenate([x[:4], CP2Charts.embed(x[4:], chart)])

    def rechart(self, x, chart=0):
        Z = CP2Charts.homog(x[4:], chart)
        k = CP2Charts.best_chart(Z)
        return np.concatenate([x[:4], CP2Charts.coords(Z, k)]), k

    def to_chart(self, x, chart, target):
        Z = CP2Charts.homog(x[4:], chart)
        return np.concatenate([x[:4], CP2Charts.coords(Z, target)])

    def in_domain(self, x, chart=0):
        return bool(np.all(self.weights(x)[1:] > 0))

    def sample(self, n, rng):
        Z = CP2Charts.sample_homog(halton(n, 4, rng))
        charts = np.argmax(np.abs(Z), axis=1)
        X = np.array([np.concatenate([self.w0, CP2Charts.coords(z, k)])
                      for z, k in zip(Z, charts)]).reshape(n, 8)
        return X, charts


def product_family(w=(1.0, 1.0)) -> MomentSystem:
    model = ProductFamilyModel(w)

    def fields(x, chart=0):
        F = np.zeros((8, 2))
        F[4:] = CP2Charts.fields(x[4:], chart)
        return F

    def mu(x, chart=0):
        w_abs = np.sqrt(ProductFamilyModel.weights(x)[1:])
        return weighted_moment(CP2Charts.homog(x[4:], chart), w_abs)

    return MomentSystem(model, 2, fields, mu, name="product_family")


def make_builtin(name: str, **params) -> MomentSystem:
    """Construct a built-in system; its chart model is ``system.model``."""
    makers = {
        "r2n_symplectic": r2n_symplectic,
        "r2_rotation": r2_rotation,
        "cp2_fs": cp2_fs,
        "c_counterexample": c_counterexample,
        "product_family": product_family,
    }
    if name not in makers:
        raise KeyError(f"unknown built-in {name!r}; choose from {', '.join(BUILTINS)}")
    return makers[name](**params)
