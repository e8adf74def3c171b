"""Image-level checks: hulls, convexity, level connectivity and cuts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, cKDTree

from .hamilton import MomentSystem, fixed_set
from .sampling import default_linking_scale

EDGE_TOL = 1e-10
FACE_TOL = 1e-9


def sample_points(sys: MomentSystem, n: int, rng: np.random.Generator):
    """Chart samples of the model (coordinates, charts)."""
    return sys.model.sample(n, rng)


def sample_image(sys: MomentSystem, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one sample")
    X, C = sys.model.sample(n, rng)
    return np.array([sys.mu(x, c) for x, c in zip(X, C)]).reshape(n, sys.m)


# ---------------------------------------------------------------------------
# Hulls
# ---------------------------------------------------------------------------


@dataclass
class HullReport:
    n_input: int
    dim: int                      # affine dimension of the hull
    vertices: np.ndarray          # counterclockwise for planar hulls
    normals: np.ndarray           # outward unit facet normals
    degenerate: bool
    integer_normals: list = field(default_factory=list)
    hausdorff: float | None = None

    def to_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "dim": self.dim,
            "degenerate": self.degenerate,
            "vertices": self.vertices.tolist(),
            "normals": self.normals.tolist(),
            "integer_normals": [list(map(int, v)) for v in self.integer_normals],
            "hausdorff": self.hausdorff,
        }


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points: np.ndarray, tol: float = EDGE_TOL) -> np.ndarray:
    """Counterclockwise hull vertices; points within tol of an edge are dropped."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                # signed distance of p from the line through a, b
                cr = _cross(a, b, p)
                if cr <= tol * np.linalg.norm(b - a):
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _affine_frame(points, tol):
    c = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - c, full_matrices=False)
    scale = max(s[0], 1.0) if s.size else 1.0
    rank = int(np.sum(s > tol * scale * np.sqrt(len(points))))
    return c, vt[:rank], rank


def convex_hull(points, tol: float = EDGE_TOL) -> HullReport:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, m = P.shape
    if m > 3:
        raise ValueError("hulls are supported for m <= 3 only")
    c, frame, rank = _affine_frame(P, tol)
    if rank == 0:
        return HullReport(n, 0, P[:1].copy(), np.zeros((0, m)), degenerate=m > 0)
    if rank == 1:
        t = (P - c) @ frame[0]
        verts = np.array([P[np.argmin(t)], P[np.argmax(t)]])
        normals = np.array([-frame[0], frame[0]]) if m == 1 else np.zeros((0, m))
        return HullReport(n, 1, verts, normals, degenerate=m > 1)
    if rank == 2:
        if m == 2:
            # full-dimensional input: keep the original coordinates exactly
            verts = monotone_chain(P, tol)
        else:
            verts = c + monotone_chain((P - c) @ frame.T, tol) @ frame
        normals = np.zeros((0, m))
        if m == 2:
            # map back may flip orientation; reorder to counterclockwise
            if _signed_area(verts) < 0:
                verts = verts[::-1]
            normals = polygon_normals(verts)
        return HullReport(n, 2, verts, normals, degenerate=m > 2)
    hull = ConvexHull(P)
    verts = P[hull.vertices]
    eq = np.unique(np.round(hull.equations, 12), axis=0)
    return HullReport(n, 3, verts, eq[:, :3], degenerate=False)


def _signed_area(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_normals(V: np.ndarray) -> np.ndarray:
    """Outward unit normals of a counterclockwise polygon's edges."""
    E = np.roll(V, -1, axis=0) - V
    N = np.c_[E[:, 1], -E[:, 0]]
    return N / np.linalg.norm(N, axis=1, keepdims=True)


def point_polygon_distance(p, V: np.ndarray) -> float:
    """Distance from p to a convex counterclockwise polygon (0 inside)."""
    p = np.asarray(p, dtype=float)
    if len(V) == 1:
        return float(np.linalg.norm(p - V[0]))
    A = V
    B = np.roll(V, -1, axis=0)
    if len(V) > 2:
        inside = all(_cross(a, b, p) >= -1e-15 for a, b in zip(A, B))
        if inside:
            return 0.0
    AB = B - A
    t = np.clip(np.einsum("ij,ij->i", p - A, AB) / np.maximum(np.einsum("ij,ij->i", AB, AB), 1e-300), 0, 1)
    return float(np.min(np.linalg.norm(A + t[:, None] * AB - p, axis=1)))


def hausdorff_convex(V1, V2) -> float:
    """Hausdorff distance between two convex polygons (or segments/points) in the plane.

    For convex sets the maximum is attained at a vertex of one of them.
    """
    V1 = _ccw(np.atleast_2d(V1))
    V2 = _ccw(np.atleast_2d(V2))
    if V1.shape[1] == 1:
        a, b = (V1.min(), V1.max()), (V2.min(), V2.max())
        return float(max(abs(a[0] - b[0]), abs(a[1] - b[1])))
    d12 = max(point_polygon_distance(v, V2) for v in V1)
    d21 = max(point_polygon_distance(v, V1) for v in V2)
    return max(d12, d21)


def _ccw(V):
    V = np.asarray(V, dtype=float)
    if V.shape[1] == 2 and len(V) > 2:
        H = monotone_chain(V)
        return H
    return V


# ---------------------------------------------------------------------------
# Theorem-level reports
# ---------------------------------------------------------------------------


def fixed_point_values(sys: MomentSystem, xi=None, n_start: int = 200, rng=None):
    """Moment values at the fixed components of a generic circle (= the torus fixed set)."""
    xi = sys.generic_xi() if xi is None else np.asarray(xi, dtype=float)
    search = fixed_set(sys, xi, n_start, rng)
    vals = []
    for comp in search.components:
        p, c = comp.representative
        vals.append(sys.mu(p, c))
    return np.array(vals).reshape(-1, sys.m), search


def theorem_a_report(sys: MomentSystem, n: int, rng: np.random.Generator, xi=None,
                     n_start: int = 200) -> dict:
    """Hull of the sampled image against the hull of the fixed-point values."""
    image = sample_image(sys, n, rng)
    img_hull = convex_hull(image)
    fvals, search = fixed_point_values(sys, xi, n_start, rng)
    if len(fvals) == 0:
        raise RuntimeError("no fixed points found")
    fix_hull = convex_hull(fvals)
    if sys.m <= 2:
        dist = hausdorff_convex(img_hull.vertices, fix_hull.vertices)
    else:
        dist = _vertex_hausdorff(img_hull.vertices, fix_hull.vertices)
    img_hull.hausdorff = dist
    match = [float(np.min(np.linalg.norm(img_hull.vertices - v, axis=1))) for v in fix_hull.vertices]
    return {
        "image_hull": img_hull,
        "fixed_hull": fix_hull,
        "fixed_values": fvals,
        "fixed_dims": [c.tangent_dim for c in search.components],
        "hausdorff": dist,
        "vertex_match": match,
    }


def _vertex_hausdorff(A, B):
    return max(float(cKDTree(B).query(A)[0].max()), float(cKDTree(A).query(B)[0].max()))


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------


def count_components(points: np.ndarray, delta: float) -> int:
    if len(points) == 0:
        return 0
    pairs = cKDTree(points).query_pairs(delta, output_type="ndarray")
    n = len(points)
    G = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    return int(connected_components(G, directed=False)[0])


def level_connectivity_from_samples(emb: np.ndarray, values: np.ndarray, a, eps: float,
                                    delta: float | None = None, min_samples: int = 10,
                                    level_dim: int = 2) -> dict:
    a = np.asarray(a, dtype=float)
    sel = np.linalg.norm(values - a, axis=1) < eps
    pts = emb[sel]
    out = {"n_level": int(sel.sum()), "delta": delta}
    if len(pts) == 0:
        out.update(components=0, verdict="empty", nn_min=None, nn_median=None)
        return out
    if len(pts) < min_samples:
        out.update(components=None, verdict="inconclusive", nn_min=None, nn_median=None)
        return out
    nn = cKDTree(pts).query(pts, k=2)[0][:, 1]
    if delta is None:
        delta = default_linking_scale(nn, level_dim)
    k = count_components(pts, delta)
    out.update(components=k, verdict="connected" if k == 1 else "disconnected",
               delta=delta, nn_min=float(nn.min()), nn_median=float(np.median(nn)))
    return out


def level_connectivity(sys: MomentSystem, a, eps: float, delta: float | None = None,
                       n: int = 20000, rng=None, samples=None) -> dict:
    """Connected components of the sampled slab {|mu - a| < eps}.

    ``samples`` may carry a precomputed (embedding, values) pair so several
    levels can share one sample.
    """
    if samples is None:
        samples = embedded_samples(sys, n, np.random.default_rng(0) if rng is None else rng)
    emb, vals = samples
    return level_connectivity_from_samples(emb, vals, a, eps, delta,
                                           level_dim=max(sys.d - sys.m, 1))


def embedded_samples(sys: MomentSystem, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    X, C = sys.model.sample(n, rng)
    emb = np.array([sys.model.embed(x, c) for x, c in zip(X, C)])
    vals = np.array([sys.mu(x, c) for x, c in zip(X, C)]).reshape(n, sys.m)
    return emb, vals


def convexity_defect(points, m_probe: int = 1000, rng=None) -> float:
    """Largest distance from a random pair's midpoint to the nearest sample."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(P) < 2:
        return 0.0
    rng = np.random.default_rng(0) if rng is None else rng
    i = rng.integers(len(P), size=m_probe)
    j = rng.integers(len(P), size=m_probe)
    mid = 0.5 * (P[i] + P[j])
    return float(cKDTree(P).query(mid)[0].max())


# ---------------------------------------------------------------------------
# Polyhedral sets and cuts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyhedralSet:
    """P = {x : <x, v_j> >= b_j} with integer v_j."""

    normals: tuple
    offsets: tuple

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.normals))
        if np.any(np.all(V == 0, axis=1)):
            raise ValueError("normals must be nonzero")
        if not np.all(np.asarray(V) == np.round(V)):
            raise ValueError("normals must be integer vectors")

    @classmethod
    def from_lists(cls, normals, offsets) -> "PolyhedralSet":
        return cls(tuple(tuple(int(a) for a in v) for v in normals),
                   tuple(float(b) for b in offsets))

    @property
    def V(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.normals, dtype=float))

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    @property
    def m(self) -> int:
        return self.V.shape[1]

    def slack(self, x) -> np.ndarray:
        return np.atleast_2d(x) @ self.V.T - self.b

    def contains(self, x, tol: float = FACE_TOL) -> np.ndarray:
        return np.all(self.slack(x) >= -tol, axis=1)

    def active(self, x, tol: float = FACE_TOL) -> tuple:
        """Active constraints; ties go to the boundary face."""
        s = self.slack(x)[0]
        return tuple(int(j) for j in np.flatnonzero(np.abs(s) <= tol))

    def faces(self) -> list[tuple]:
        """Active sets of the nonempty open faces, interior first."""
        V, b = self.V, self.b
        k = len(b)
        out = []
        for r in range(0, min(k, self.m) + 1):
            for A in itertools.combinations(range(k), r):
                if r and np.linalg.matrix_rank(V[list(A)]) < r:
                    continue
                if self._relint_nonempty(A):
                    out.append(A)
        return out

    def _relint_nonempty(self, A) -> bool:
        V, b = self.V, self.b
        k, m = V.shape
        rest = [j for j in range(k) if j not in A]
        # maximize t subject to <x, v_j> - b_j = 0 on A and >= t elsewhere
        c = np.r_[np.zeros(m), -1.0]
        A_ub = np.c_[-V[rest], np.ones(len(rest))] if rest else None
        b_ub = -b[rest] if rest else None
        A_eq = np.c_[V[list(A)], np.zeros(len(A))] if A else None
        b_eq = b[list(A)] if A else None
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=[(None, None)] * m + [(None, 1.0)])
        if res.status != 0:
            return False
        return not rest or -res.fun > 1e-12

    def subtorus(self, A) -> list[list[int]]:
        """Integer generators of the subtorus perpendicular to the face A."""
        return [list(map(int, self.normals[j])) for j in A]


def _project_to_face(sys, P, A, x, chart, tol=1e-12, max_iter=30):
    """Newton projection of a point onto {<mu, v_j> = b_j, j in A}."""
    V = P.V[list(A)]
    b = P.b[list(A)]
    model = sys.model
    for _ in range(max_iter):
        r = V @ sys.mu(x, chart) - b
        if np.linalg.norm(r) < tol:
            return x, chart, True
        J = V @ sys.dmu(x, chart)
        x = x - np.linalg.lstsq(J, r, rcond=None)[0]
        if not model.in_domain(x, chart):
            return x, chart, False
        x, chart = model.rechart(x, chart)
    return x, chart, bool(np.linalg.norm(V @ sys.mu(x, chart) - b) < tol)


@dataclass
class CutReport:
    faces: list
    counts: dict
    subtori: dict
    n_in_P: int
    partition_ok: bool
    connectivity: dict
    bounded: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "faces": [list(f) for f in self.faces],
            "counts": {str(list(k)): v for k, v in self.counts.items()},
            "subtori": {str(list(k)): v for k, v in self.subtori.items()},
            "n_in_P": self.n_in_P,
            "partition_ok": self.partition_ok,
            "connectivity": self.connectivity,
            "bounded": self.bounded,
            "notes": self.notes,
        }


def cut_decompose(sys: MomentSystem, P: PolyhedralSet, n: int, rng: np.random.Generator,
                  n_face: int = 200, compact: bool = True) -> CutReport:
    """Face decomposition of mu^-1(P) and sample-level checks of the cut.

    Bulk samples land in the open interior with probability one, so each
    boundary face is also populated by Newton-projecting the samples whose
    images lie closest to it.
    """
    X, C = sys.model.sample(n, rng)
    vals = np.array([sys.mu(x, c) for x, c in zip(X, C)]).reshape(n, sys.m)
    pts = [(x, int(c)) for x, c in zip(X, C)]
    faces = P.faces()
    for A in faces:
        if not A:
            continue
        dist = np.abs(vals @ P.V[list(A)].T - P.b[list(A)]).max(axis=1)
        for i in np.argsort(dist)[:n_face]:
            y, k, ok = _project_to_face(sys, P, A, *pts[i])
            if ok:
                pts.append((y, k))
    allvals = np.array([sys.mu(x, c) for x, c in pts]).reshape(len(pts), sys.m)
    inside = P.contains(allvals)
    counts = {A: 0 for A in faces}
    for v in allvals[inside]:
        A = P.active(v)
        counts[A] = counts.get(A, 0) + 1
    n_in = int(inside.sum())
    partition_ok = sum(counts.values()) == n_in and set(counts) == set(faces)

    emb = np.array([sys.model.embed(x, c) for (x, c), keep in zip(pts, inside) if keep])
    conn = {}
    if n_in >= 10:
        nn = cKDTree(emb).query(emb, k=2)[0][:, 1]
        k_pre = count_components(emb, 3.0 * float(np.median(nn)))
        img = allvals[inside]
        nn_i = cKDTree(img).query(img, k=2)[0][:, 1]
        k_img = count_components(img, 3.0 * float(np.median(nn_i)))
        conn = {"preimage_components": k_pre, "image_components": k_img,
                "equivalence_holds": (k_pre == 1) == (k_img == 1)}
    else:
        conn = {"verdict": "inconclusive"}
    bounded = bool(np.all(np.isfinite(allvals[inside])))
    notes = [] if compact else ["noncompact model: results assume a proper moment map"]
    return CutReport(faces, counts, {A: P.subtorus(A) for A in faces}, n_in, partition_ok,
                     conn, bounded, notes)


# ---------------------------------------------------------------------------
# Polyhedrality and coverage
# ---------------------------------------------------------------------------


def rationalize(normal, max_den: int = 100, ang_tol: float = 1e-3):
    """Primitive integer vector within ang_tol of a planar direction, or None."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    i = int(np.argmax(np.abs(n)))
    r = Fraction(float(n[1 - i] / n[i])).limit_denominator(max_den)
    v = np.zeros(2, dtype=int)
    v[i] = r.denominator
    v[1 - i] = r.numerator
    v = v * int(np.sign(n[i]))
    ang = np.arccos(np.clip(v @ n / np.linalg.norm(v), -1, 1))
    return (v, float(ang)) if ang <= ang_tol else (None, float(ang))


def edge_runs(V: np.ndarray, ang_merge: float = 0.05, min_frac: float = 0.02):
    """Group consecutive polygon edges with nearly equal direction."""
    E = np.roll(V, -1, axis=0) - V
    L = np.linalg.norm(E, axis=1)
    ang = np.arctan2(E[:, 1], E[:, 0])
    n = len(V)
    # start at the sharpest corner so no run wraps around
    turn = np.abs(np.angle(np.exp(1j * (ang - np.roll(ang, 1)))))
    start = int(np.argmax(turn))
    order = [(start + k) % n for k in range(n)]
    runs, cur = [], [order[0]]
    for e in order[1:]:
        ref = np.arctan2(*(np.sum(E[cur], axis=0)[::-1]))
        if abs(np.angle(np.exp(1j * (ang[e] - ref)))) < ang_merge:
            cur.append(e)
        else:
            runs.append(cur)
            cur = [e]
    runs.append(cur)
    per = L.sum()
    return [r for r in runs if L[r].sum() >= min_frac * per]


def polyhedrality_report(points_or_hull, max_den: int = 100, ang_tol: float = 1e-3) -> dict:
    """Rationality of the edge normals of a planar sampled hull."""
    hull = points_or_hull if isinstance(points_or_hull, HullReport) else convex_hull(points_or_hull)
    if hull.dim != 2 or hull.vertices.shape[1] != 2:
        raise ValueError("polyhedrality needs a nondegenerate planar hull")
    V = hull.vertices
    n = len(V)
    edges = []
    for run in edge_runs(V):
        idx = sorted({i for e in run for i in (e, (e + 1) % n)})
        pts = V[idx]
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        normal = vt[-1]
        # inward normal: the hull lies on the positive side
        if (V.mean(axis=0) - c) @ normal < 0:
            normal = -normal
        v, ang = rationalize(normal, max_den, ang_tol)
        edges.append({"normal": normal.tolist(), "integer": None if v is None else v.tolist(),
                      "angle_error": ang, "offset": float(c @ normal)})
    failures = [e for e in edges if e["integer"] is None]
    return {"edges": edges, "integer_normals": [e["integer"] for e in edges if e["integer"]],
            "rational": not failures, "n_failures": len(failures)}


def quadrant_coverage(make_system, n_w: int = 50, n_per: int = 2000, rng=None,
                      extent: float = 3.0, step: float = 0.1, w_range=(0.5, 40.0),
                      tol: float = 0.05) -> dict:
    """Grid coverage of [-extent, 0]^2 by the union of sampled hulls over random w."""
    rng = np.random.default_rng(0) if rng is None else rng
    hulls = []
    ws = []
    for _ in range(n_w):
        w = rng.uniform(*w_range, size=2) * np.exp(2j * np.pi * rng.uniform(size=2))
        ws.append(w)
        sys = make_system(w)
        hulls.append(convex_hull(sample_image(sys, n_per, rng)).vertices)
    g = np.arange(-extent, 1e-9, step)
    grid = np.array([(x, y) for x in g for y in g])
    covered = np.array([min(point_polygon_distance(p, H) for H in hulls) <= tol for p in grid])
    return {"grid_points": len(grid), "covered": int(covered.sum()),
            "fraction": float(covered.mean()), "passed": bool(covered.all()),
            "uncovered": grid[~covered].tolist(), "w_moduli": [np.abs(w).tolist() for w in ws]}
