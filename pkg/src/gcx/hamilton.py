"""Hamiltonian torus actions on chart models and their verification.

A :class:`MomentSystem` bundles the generator vector fields, the moment map
``mu`` and the moment one form ``alpha`` of a torus action on a chart model.
The checks here test the defining conditions pointwise, locate fixed and
critical sets numerically and analyse Hessians at critical points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geom import ChartModel, exterior_derivative_2form, fd_hessian, fd_jacobian, fd_step
from .sampling import default_linking_scale


class MomentSystem:
    """Torus action data on a chart model.

    ``fields(x, chart)`` returns the d x m matrix whose columns are the
    vector fields of the generators, ``mu`` returns the m moment components
    and ``alpha`` the m x d matrix of moment one forms (zero if omitted).
    """

    def __init__(self, model: ChartModel, m: int, fields: Callable, mu: Callable,
                 alpha: Callable | None = None, dmu: Callable | None = None,
                 name: str | None = None):
        self.model = model
        self.m = m
        self._fields = fields
        self._mu = mu
        self._alpha = alpha
        self._dmu = dmu
        self.name = name or model.name

    @property
    def d(self) -> int:
        return self.model.d

    def fields(self, x, chart: int = 0) -> np.ndarray:
        return np.asarray(self._fields(np.asarray(x, dtype=float), chart), dtype=float)

    def mu(self, x, chart: int = 0) -> np.ndarray:
        return np.asarray(self._mu(np.asarray(x, dtype=float), chart), dtype=float)

    def dmu(self, x, chart: int = 0, h: float | None = None) -> np.ndarray:
        """m x d matrix of differentials of the moment components.

        Uses the analytic differential when one was supplied and no explicit
        finite-difference step is requested.
        """
        if self._dmu is not None and h is None:
            return np.asarray(self._dmu(np.asarray(x, dtype=float), chart), dtype=float)
        return fd_jacobian(lambda y: self.mu(y, chart), x, h)

    def alpha(self, x, chart: int = 0) -> np.ndarray:
        if self._alpha is None:
            return np.zeros((self.m, self.d))
        return np.asarray(self._alpha(np.asarray(x, dtype=float), chart), dtype=float)

    # contractions with a Lie algebra element
    def xi_M(self, xi, x, chart: int = 0) -> np.ndarray:
        return self.fields(x, chart) @ np.asarray(xi, dtype=float)

    def mu_xi(self, xi, x, chart: int = 0) -> float:
        return float(self.mu(x, chart) @ np.asarray(xi, dtype=float))

    def dmu_xi(self, xi, x, chart: int = 0, h: float | None = None) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.dmu(x, chart, h)

    def alpha_xi(self, xi, x, chart: int = 0) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.alpha(x, chart)

    def generic_xi(self) -> np.ndarray:
        """A generator with rationally independent components."""
        return np.array([1.0, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(5.0)][:self.m])

    def describe(self) -> dict:
        return {"system": self.name, "m": self.m, **self.model.describe()}


def constant_moment_system(model: ChartModel, value, m: int | None = None) -> MomentSystem:
    """Trivial action of T^m with a constant moment map."""
    value = np.atleast_1d(np.asarray(value, dtype=float))
    m = value.shape[0] if m is None else m
    d = model.d
    return MomentSystem(model, m, lambda x, c=0: np.zeros((d, m)), lambda x, c=0: value.copy(),
                        dmu=lambda x, c=0: np.zeros((m, d)), name=f"{model.name}_constant")


# ---------------------------------------------------------------------------
# The defining conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianResidual:
    condition1: float
    condition2: float
    isotropy_dmu: float
    isotropy_alpha: float
    blocks: dict = field(default_factory=dict)

    def max(self) -> float:
        return max(self.condition1, self.condition2, self.isotropy_dmu, self.isotropy_alpha)


def moment_vector(sys: MomentSystem, xi, x, chart: int = 0, h: float | None = None) -> np.ndarray:
    """xi_M - i (d mu^xi + i alpha^xi) as an element of (T + T*) (x) C."""
    cov = sys.alpha_xi(xi, x, chart) - 1j * sys.dmu_xi(xi, x, chart, h)
    return np.concatenate([sys.xi_M(xi, x, chart).astype(complex), cov])


def hamiltonian_residual(sys: MomentSystem, xi, x, chart: int = 0,
                         h: float | None = None) -> HamiltonianResidual:
    model = sys.model
    d = model.d
    x = np.asarray(x, dtype=float)
    v = moment_vector(sys, xi, x, chart, h)
    S = model.structure_mat(x, chart)
    r = S @ v - 1j * v
    Hx = model.H(x, chart)
    iH = np.einsum("ijk,i->jk", Hx, sys.xi_M(xi, x, chart))
    dalpha = exterior_derivative_2form_of_1form(lambda y: sys.alpha_xi(xi, y, chart), x, h)
    blocks = {}
    for name, idx in getattr(model, "direction_blocks", {}).items():
        idx = np.asarray(idx)
        blocks[name] = float(np.linalg.norm(r[np.r_[idx, idx + d]]))
    xm = sys.xi_M(xi, x, chart)
    return HamiltonianResidual(
        condition1=float(np.linalg.norm(r)),
        condition2=float(np.abs(iH - dalpha).max()),
        isotropy_dmu=float(abs(sys.dmu_xi(xi, x, chart, h) @ xm)),
        isotropy_alpha=float(abs(sys.alpha_xi(xi, x, chart) @ xm)),
        blocks=blocks,
    )


def exterior_derivative_2form_of_1form(a: Callable, x, h: float | None = None) -> np.ndarray:
    """(da)_{ij} = d_i a_j - d_j a_i."""
    D = fd_jacobian(a, x, h)          # D[j, i] = d_i a_j
    return D.T - D


# ---------------------------------------------------------------------------
# Zero sets
# ---------------------------------------------------------------------------


@dataclass
class CriticalComponent:
    """A cluster of numerically located zeros, optionally with Hessian data."""

    points: np.ndarray
    charts: np.ndarray
    tangent_dim: int
    value: float | None = None
    value_spread: float = 0.0
    index: int | None = None
    coindex: int | None = None
    nullity: int | None = None
    eigenvalues: np.ndarray | None = None
    even_eigenspaces: bool | None = None
    nullity_matches: bool | None = None

    @property
    def representative(self) -> tuple[np.ndarray, int]:
        return self.points[0], int(self.charts[0])

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass
class ZeroSearch:
    components: list
    n_start: int
    n_converged: int
    n_failed: int


def _gauss_newton(field, model, x, chart, tol, max_iter, rechart=True, jac_h=1e-6):
    fx = field(x, chart)
    nf = np.linalg.norm(fx)
    history = []
    for _ in range(max_iter):
        if nf < tol:
            return x, chart, True
        history.append(nf)
        # give up on starts that stall far from a zero
        if len(history) > 8 and nf > 0.5 * history[-9]:
            return x, chart, False
        J = fd_jacobian(lambda y: field(y, chart), x, jac_h)
        # the cutoff sits above finite-difference noise so that flat directions
        # of a degenerate zero set are not inverted into long tangential steps
        step = np.linalg.lstsq(J, -fx, rcond=1e-7)[0]
        ns = np.linalg.norm(step)
        if ns > 0.5:
            step *= 0.5 / ns
        t = 1.0
        for _ in range(30):
            y = x + t * step
            if model.in_domain(y, chart):
                fy = field(y, chart)
                nfy = np.linalg.norm(fy)
                if nfy < nf:
                    break
            t *= 0.5
        else:
            return x, chart, False
        x, fx, nf = y, fy, nfy
        if rechart:
            x, chart = model.rechart(x, chart)
            fx = field(x, chart)
            nf = np.linalg.norm(fx)
    return x, chart, bool(nf < tol)


def _local_dimension(field, model, x, chart, tol, rng, delta=1e-3, max_iter=50):
    """Tangent dimension of the zero set at x from perturbed re-solves.

    Each perturbed start is pulled back by chord iterations with the
    truncated pseudo-inverse of the Jacobian at x, which move only along
    its row space; the spread of the returned points spans the tangent space.
    """
    d = model.d
    k = 2 * d + 2
    J = fd_jacobian(lambda y: field(y, chart), x)
    Jp = np.linalg.pinv(J, rcond=1e-6)
    disp = []
    for _ in range(k):
        u = rng.normal(size=d)
        y = x + delta * u / np.linalg.norm(u)
        for _ in range(max_iter):
            fy = field(y, chart)
            if np.linalg.norm(fy) < tol:
                disp.append(y - x)
                break
            y = y - Jp @ fy
            if np.linalg.norm(y - x) > 10 * delta or not model.in_domain(y, chart):
                break
    if len(disp) < d:
        return 0
    s = np.linalg.svd(np.array(disp), compute_uv=False)
    return int(np.sum(s > 0.2 * delta * np.sqrt(len(disp) / d)))


def _tangent_walk(field, model, x, chart, tol, rng, n_steps=8, step=0.1):
    """Points of the zero set met by a short random walk from x.

    Each step moves along the null space of the Jacobian and is pulled back
    to the zero set by Gauss-Newton; a step that fails after halving three
    times ends the walk.
    """
    out = []
    for _ in range(n_steps):
        J = fd_jacobian(lambda y: field(y, chart), x)
        U, s, Vt = np.linalg.svd(J)
        null = Vt[np.sum(s > 1e-6 * max(s.max(), 1e-300)):]
        if not len(null):
            break
        u = rng.normal(size=len(null)) @ null
        u /= np.linalg.norm(u)
        for h in step * 0.5 ** np.arange(4):
            y, k, ok = _gauss_newton(field, model, x + h * u, chart, tol, 30)
            if ok:
                break
        else:
            break
        x, chart = y, k
        out.append((x, chart))
    return out


def _link_manifold_clusters(field, model, clusters, dims, value_fn, tol, rng, rounds=4):
    """Labels joining clusters of zeros that lie on one connected manifold.

    Newton endpoints crowd around attractors, so each cluster is grown by
    tangent walks and the union is linked at its connectivity scale, only
    across equal values.  Clusters of equal value and dimension that stay
    apart get longer walks, for a few rounds.
    """
    value = (lambda y, k: value_fn(y, k)) if value_fn is not None else (lambda y, k: 0.0)
    cloud, owner, heads = [], [], []
    for j, cl in enumerate(clusters):
        for p, c in cl:
            cloud.append((p, int(c)))
            owner.append(j)
            heads.append((len(cloud) - 1, j))
    base_vals = np.array([value(*cl[0]) for cl in clusters])
    classes = {}
    for j, v in enumerate(base_vals):
        key = next((k for k in classes if abs(k[0] - v) <= 1e-6 * (1 + abs(v)) and k[1] == dims[j]),
                   (v, dims[j]))
        classes.setdefault(key, []).append(j)
    lab = np.arange(len(clusters))
    for _ in range(rounds):
        new_heads = []
        for i, j in heads:
            walk = _tangent_walk(field, model, *cloud[i], tol, rng)
            for y, k in walk:
                cloud.append((y, k))
                owner.append(j)
            if walk:
                new_heads.append((len(cloud) - 1, j))
        heads = new_heads
        own = np.array(owner)
        emb = np.array([model.embed(y, k) for y, k in cloud])
        vals = np.array([value(y, k) for y, k in cloud])
        tree = cKDTree(emb)
        nn = tree.query(emb, k=2)[0][:, 1]
        scale = default_linking_scale(nn, max(dims))
        pairs = np.array(sorted(tree.query_pairs(scale)), dtype=int).reshape(-1, 2)
        same = np.abs(vals[pairs[:, 0]] - vals[pairs[:, 1]]) <= 1e-6 * (1 + np.abs(vals[pairs[:, 0]]))
        a, b = own[pairs[same, 0]], own[pairs[same, 1]]
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(len(clusters),) * 2)
        _, lab = connected_components(adj, directed=False)
        if all(len(set(lab[m])) == 1 for m in classes.values()) or not heads:
            break
    return lab


def find_zero_set(field: Callable, sys: MomentSystem, n_start: int = 200,
                  rng: np.random.Generator | None = None, tol: float = 1e-8,
                  r_cluster: float = 1e-4, value_fn: Callable | None = None,
                  max_iter: int = 60) -> ZeroSearch:
    """Zeros of ``field(x, chart)`` by multistart damped Gauss-Newton.

    Converged points are grouped by single linkage at ``r_cluster`` in the
    model's embedding; clusters whose points move freely under small
    perturbations are positive-dimensional and are joined through a
    walk-densified sample of the manifold.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    model = sys.model
    X, C = model.sample(n_start, rng)
    pts, charts = [], []
    failed = 0
    for x, c in zip(X, C):
        y, k, ok = _gauss_newton(field, model, x, int(c), tol, max_iter)
        if ok:
            pts.append(y)
            charts.append(k)
        else:
            failed += 1
    if not pts:
        return ZeroSearch([], n_start, 0, failed)
    pts = np.array(pts)
    charts = np.array(charts)
    emb = np.array([model.embed(p, c) for p, c in zip(pts, charts)])
    if len(pts) == 1:
        labels = np.array([1])
    else:
        labels = fcluster(linkage(emb, method="single"), r_cluster, criterion="distance")
    groups = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    dims = [_local_dimension(field, model, pts[g[0]], charts[g[0]], tol, rng) for g in groups]

    # a full-dimensional zero component is open and closed, so on a
    # connected model all such clusters are one component
    full = [i for i, t in enumerate(dims) if t == model.d]
    if len(full) > 1:
        merged = np.concatenate([groups[i] for i in full])
        groups = [g for i, g in enumerate(groups) if i not in full] + [merged]
        dims = [t for i, t in enumerate(dims) if i not in full] + [model.d]
    pos = [i for i, t in enumerate(dims) if 0 < t < model.d]
    if len(pos) > 1:
        lab = _link_manifold_clusters(field, model, [list(zip(pts[groups[i]], charts[groups[i]]))
                                                     for i in pos],
                                      [dims[i] for i in pos], value_fn, tol, rng)
        new_groups = [g for i, g in enumerate(groups) if dims[i] == 0]
        new_dims = [0] * len(new_groups)
        for L in np.unique(lab):
            members = [pos[j] for j in np.flatnonzero(lab == L)]
            new_groups.append(np.concatenate([groups[i] for i in members]))
            new_dims.append(max(dims[i] for i in members))
        groups, dims = new_groups, new_dims

    comps = []
    for g, t in zip(groups, dims):
        comp = CriticalComponent(points=pts[g], charts=charts[g], tangent_dim=t)
        if value_fn is not None:
            vals = np.array([value_fn(p, c) for p, c in zip(pts[g], charts[g])])
            comp.value = float(np.mean(vals))
            comp.value_spread = float(np.ptp(vals))
        comps.append(comp)
    comps.sort(key=lambda c: (-(c.value if c.value is not None else 0.0), -c.size))
    return ZeroSearch(comps, n_start, len(pts), failed)


def critical_set(sys: MomentSystem, xi, n_start: int = 200, rng=None, **kw) -> ZeroSearch:
    return find_zero_set(lambda x, c: sys.dmu_xi(xi, x, c), sys, n_start, rng,
                         value_fn=lambda x, c: sys.mu_xi(xi, x, c), **kw)


def fixed_set(sys: MomentSystem, xi, n_start: int = 200, rng=None, **kw) -> ZeroSearch:
    return find_zero_set(lambda x, c: sys.xi_M(xi, x, c), sys, n_start, rng,
                         value_fn=lambda x, c: sys.mu_xi(xi, x, c), **kw)


# ---------------------------------------------------------------------------
# Weak nondegeneracy
# ---------------------------------------------------------------------------


def _directed_hausdorff(A, B):
    from scipy.spatial import cKDTree
    return float(cKDTree(B).query(A)[0].max())


def weak_nondegeneracy_report(sys: MomentSystem, xi, n_start: int = 200, rng=None,
                              n_rank: int = 20, tol: float = 1e-6) -> dict:
    """Compare Crit(mu^xi) with Fix(T^xi) and test the rank identity.

    The sets are compared by cross-membership of the located zeros and by
    the Hausdorff distance between the two zero clouds.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    seed = int(rng.integers(2 ** 63))
    crit = critical_set(sys, xi, n_start, np.random.default_rng(seed))
    fix = fixed_set(sys, xi, n_start, np.random.default_rng(seed))

    def cloud(search):
        return [(p, c) for comp in search.components for p, c in zip(comp.points, comp.charts)]

    crit_pts, fix_pts = cloud(crit), cloud(fix)
    crit_in_fix = all(np.linalg.norm(sys.xi_M(xi, p, c)) < tol for p, c in crit_pts)
    fix_in_crit = all(np.linalg.norm(sys.dmu_xi(xi, p, c)) < tol for p, c in fix_pts)
    emb = sys.model.embed
    if crit_pts and fix_pts:
        A = np.array([emb(p, c) for p, c in crit_pts])
        B = np.array([emb(p, c) for p, c in fix_pts])
        haus = max(_directed_hausdorff(A, B), _directed_hausdorff(B, A))
    else:
        haus = 0.0 if not crit_pts and not fix_pts else float("inf")
    equal = bool(crit_in_fix and fix_in_crit and (bool(crit_pts) == bool(fix_pts)))

    # rank(d mu_p) against the rank of xi -> (xi_M)_p
    X, C = sys.model.sample(n_rank, rng)
    rank_rows = []
    for x, c in zip(X, C):
        D = sys.dmu(x, c)
        F = sys.fields(x, c)
        rank_rows.append((_rank(D), _rank(F)))
    rank_ok = all(a == b for a, b in rank_rows)
    return {
        "verdict": "equal" if equal else "unequal",
        "crit_components": len(crit.components),
        "fix_components": len(fix.components),
        "crit_dims": [c.tangent_dim for c in crit.components],
        "fix_dims": [c.tangent_dim for c in fix.components],
        "crit_points": len(crit_pts),
        "fix_points": len(fix_pts),
        "crit_in_fix": crit_in_fix,
        "fix_in_crit": fix_in_crit,
        "hausdorff": haus,
        "rank_dmu": [a for a, _ in rank_rows],
        "rank_action": [b for _, b in rank_rows],
        "rank_identity": rank_ok,
    }


def _rank(A, rtol=1e-8):
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > rtol * max(s[0], 1e-300))) if s[0] > 1e-12 else 0


# ---------------------------------------------------------------------------
# Hessians
# ---------------------------------------------------------------------------



def _eigen_clusters(vals, rtol=1e-6):
    """Sizes of groups of nearly equal eigenvalues (sorted input)."""
    scale = max(np.abs(vals).max(), 1e-300)
    sizes, cur = [], [vals[0]]
    for v in vals[1:]:
        if abs(v - cur[-1]) <= rtol * scale * 10 + 1e-9 * scale:
            cur.append(v)
        else:
            sizes.append(cur)
            cur = [v]
    sizes.append(cur)
    return sizes


def signature(Hs: np.ndarray, g: np.ndarray, zero_rtol: float = 1e-6):
    """(index, coindex, nullity, eigenvalues of g^-1 Hess)."""
    import scipy.linalg as sla
    vals = sla.eigh(0.5 * (Hs + Hs.T), g, eigvals_only=True)
    scale = np.abs(vals).max()
    if scale == 0.0:
        return 0, 0, len(vals), vals
    zero = np.abs(vals) <= zero_rtol * scale
    return int(np.sum(vals < 0) - np.sum(zero & (vals < 0))), \
        int(np.sum(vals > 0) - np.sum(zero & (vals > 0))), int(np.sum(zero)), vals


def hessian_report(sys: MomentSystem, xi, component: CriticalComponent,
                   h: float | None = None, zero_rtol: float = 1e-6,
                   cluster_rtol: float = 1e-6) -> CriticalComponent:
    """Index, coindex and nullity of mu^xi at a critical component."""
    p, c = component.representative
    Hs = fd_hessian(lambda y: sys.mu_xi(xi, y, c), p, h)
    g = sys.model.metric(p, c)
    idx, coidx, null, vals = signature(Hs, g, zero_rtol)
    component.index, component.coindex, component.nullity = idx, coidx, null
    component.eigenvalues = vals
    component.nullity_matches = null == component.tangent_dim
    scale = np.abs(vals).max() if vals.size else 0.0
    nonzero = vals[np.abs(vals) > zero_rtol * scale] if scale > 0 else vals[:0]
    if nonzero.size:
        component.even_eigenspaces = all(len(cl) % 2 == 0
                                         for cl in _eigen_clusters(np.sort(nonzero), cluster_rtol))
    else:
        component.even_eigenspaces = True
    return component


def restricted_critical_set(sys: MomentSystem, level_idx, a, target: int,
                            n_start: int = 200, rng=None, tol: float = 1e-8) -> ZeroSearch:
    """Critical points of mu_target on Q = {mu_i = a_i, i in level_idx}."""
    level_idx = list(level_idx)
    a = np.asarray(a, dtype=float)

    def field(x, c):
        D = sys.dmu(x, c)
        W = D[level_idx]
        g = D[target]
        coef = np.linalg.lstsq(W.T, g, rcond=None)[0]
        return np.concatenate([sys.mu(x, c)[level_idx] - a, g - W.T @ coef])

    return find_zero_set(field, sys, n_start, rng, tol=tol,
                         value_fn=lambda x, c: float(sys.mu(x, c)[target]))


def restricted_hessian_report(sys: MomentSystem, level_idx, target: int,
                              component: CriticalComponent, h: float | None = None,
                              zero_rtol: float = 1e-6) -> CriticalComponent:
    """Hessian of mu_target on the level set Q via the Lagrangian on T_pQ.

    Q's own dimension counts are relative to T_pQ, so the nullity is
    compared with the component's tangent dimension inside Q.
    """
    import scipy.linalg as sla
    level_idx = list(level_idx)
    p, c = component.representative
    D = sys.dmu(p, c)
    W = D[level_idx]
    lam = np.linalg.lstsq(W.T, D[target], rcond=None)[0]

    def lagr(y):
        mu = sys.mu(y, c)
        return float(mu[target] - lam @ mu[level_idx])

    Hs = fd_hessian(lagr, p, h)
    T = sla.null_space(W)
    g = sys.model.metric(p, c)
    idx, coidx, null, vals = signature(T.T @ Hs @ T, T.T @ g @ T, zero_rtol)
    component.index, component.coindex, component.nullity = idx, coidx, null
    component.eigenvalues = vals
    component.nullity_matches = null == component.tangent_dim
    component.even_eigenspaces = idx % 2 == 0 and coidx % 2 == 0
    return component


# ---------------------------------------------------------------------------
# Structural identities
# ---------------------------------------------------------------------------


def structural_identity_residuals(sys: MomentSystem, xi, x, chart: int = 0, q=None,
                                  h: float | None = None, critical: bool | None = None) -> dict:
    """Residuals of the identities linking xi_M, d mu^xi and the quadruple.

    * ``eq3``: xi_M - (omega_+^-1 - omega_-^-1)(d mu^xi) / 2
    * ``lie_hessian``: (L_xi)_p - (J_+ - J_-) Hess / 2 at a critical point,
      where (L_xi)_p = -D(xi_M) and Hess is the endomorphism g^-1 d^2 mu^xi;
      ``lie_hessian_opposite`` is the same with the opposite sign
    * ``commutation``: [g^-1 d^2 mu^xi, J_+ - J_-]
    """
    x = np.asarray(x, dtype=float)
    q = sys.model.quadruple(x, chart) if q is None else q
    dmu = sys.dmu_xi(xi, x, chart, h)
    xm = sys.xi_M(xi, x, chart)
    pred = 0.5 * (np.linalg.solve(q.omega_p, dmu) - np.linalg.solve(q.omega_m, dmu))
    out = {"eq3": float(np.abs(xm - pred).max())}
    if critical is None:
        critical = bool(np.linalg.norm(dmu) < 1e-6)
    if critical:
        Lxi = -fd_jacobian(lambda y: sys.xi_M(xi, y, chart), x, h)
        hess = np.linalg.solve(q.g, fd_hessian(lambda y: sys.mu_xi(xi, y, chart), x, h))
        K = q.jp - q.jm
        out["lie_hessian"] = float(np.abs(Lxi - 0.5 * K @ hess).max())
        out["lie_hessian_opposite"] = float(np.abs(Lxi + 0.5 * K @ hess).max())
        out["commutation"] = float(np.abs(hess @ K - K @ hess).max())
    return out
