import numpy as np
import pytest

from gcx.builtins import make_builtin
from gcx.convexity import (PolyhedralSet, convex_hull, convexity_defect, cut_decompose,
                           embedded_samples, hausdorff_convex, level_connectivity,
                           polyhedrality_report, quadrant_coverage, sample_image,
                           theorem_a_report)
from gcx.genlin import from_symplectic, standard_symplectic
from gcx.geom import ConstantModel
from gcx.hamilton import MomentSystem, constant_moment_system

TRIANGLE = np.array([[0.0, 0.0], [-0.5, 0.0], [0.0, -0.5]])


class AnnulusModel(ConstantModel):
    def __init__(self):
        super().__init__(from_symplectic(standard_symplectic(2)), -1.5, 1.5, name="annulus")

    def sample(self, n, rng):
        r = np.sqrt(rng.uniform(0.25, 2.25, size=n))
        t = rng.uniform(0, 2 * np.pi, size=n)
        return np.c_[r * np.cos(t), r * np.sin(t)], np.zeros(n, dtype=int)


def annulus_system():
    return MomentSystem(AnnulusModel(), 1, lambda x, c=0: np.zeros((2, 1)),
                        lambda x, c=0: np.array([x[0] ** 2]))


@pytest.fixture(scope="module")
def cp2():
    return make_builtin("cp2_fs", w=(1.0, 1.0))


def test_cp2_image_in_triangle(cp2):
    P = sample_image(cp2, 2000, np.random.default_rng(0))
    assert np.all(P <= 1e-12) and np.all(P.sum(axis=1) >= -0.5 - 1e-12)


def test_counterexample_image_on_graph():
    P = sample_image(make_builtin("c_counterexample"), 1000, np.random.default_rng(1))
    assert np.abs(P[:, 2] - 2 * P[:, 0] * P[:, 1]).max() == 0.0


def test_single_sample(cp2):
    rng = np.random.default_rng(2)
    X, C = cp2.model.sample(1, np.random.default_rng(2))
    assert np.array_equal(sample_image(cp2, 1, rng)[0], cp2.mu(X[0], C[0]))


def test_sampling_deterministic(cp2):
    a = sample_image(cp2, 500, np.random.default_rng(3))
    b = sample_image(cp2, 500, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_hull_drops_interior_point():
    h = convex_hull(np.r_[TRIANGLE, [[-0.1, -0.1]]])
    assert h.dim == 2 and not h.degenerate
    assert {tuple(v) for v in h.vertices} == {tuple(v) for v in TRIANGLE}


def test_hull_ccw_and_contains_inputs():
    P = np.random.default_rng(4).normal(size=(300, 2))
    h = convex_hull(P)
    V = h.vertices
    E = np.roll(V, -1, axis=0) - V
    assert np.all(E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0] > 0)
    off = np.einsum("ij,ij->i", h.normals, V)
    assert np.all(P @ h.normals.T <= off + 1e-12)


def test_hull_collinear_flagged():
    h = convex_hull([[0, 0], [1, 1], [2, 2]])
    assert h.dim == 1 and h.degenerate
    assert {tuple(v) for v in h.vertices} == {(0.0, 0.0), (2.0, 2.0)}


def test_hull_three_dimensional():
    cube = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
    h = convex_hull(np.r_[cube, [[0.5, 0.5, 0.5]]])
    assert h.dim == 3 and len(h.vertices) == 8


def test_hull_rejects_high_dimension():
    with pytest.raises(ValueError):
        convex_hull(np.zeros((5, 4)))


def test_hausdorff_convex_examples():
    assert hausdorff_convex(TRIANGLE, TRIANGLE) == 0.0
    shifted = TRIANGLE + [0.1, 0.0]
    assert hausdorff_convex(TRIANGLE, shifted) == pytest.approx(0.1)


def test_cp2_hull_matches_triangle(cp2):
    # a single seed passes 5e-3 most of the time; the distribution must sit below it
    dist = [hausdorff_convex(convex_hull(sample_image(cp2, 20000, np.random.default_rng(s))).vertices,
                             TRIANGLE) for s in range(10)]
    assert np.median(dist) < 5e-3 and max(dist) < 7e-3


@pytest.mark.parametrize("w,expected", [
    ((1.0, 1.0), {(0.0, 0.0), (-0.5, 0.0), (0.0, -0.5)}),
    ((2.0, 1.0), {(0.0, 0.0), (-1.0, 0.0), (0.0, -0.5)}),
    ((1.0, 3.0), {(0.0, 0.0), (-0.5, 0.0), (0.0, -1.5)}),
])
def test_theorem_a(w, expected):
    sys_ = make_builtin("cp2_fs", w=w)
    rep = theorem_a_report(sys_, 20000, np.random.default_rng(7))
    vals = {tuple(np.round(v, 8) + 0.0) for v in rep["fixed_values"]}
    assert vals == expected
    assert rep["fixed_dims"] == [0, 0, 0]
    # the sampled hull approaches the polytope at a rate set by its size
    assert rep["hausdorff"] < 5e-3 * max(w)


def test_theorem_a_trivial_action():
    base = make_builtin("r2n_symplectic", d=2)
    sys_ = constant_moment_system(base.model, [0.4, -0.2], m=2)
    rep = theorem_a_report(sys_, 100, np.random.default_rng(8), xi=[1.0, np.sqrt(2)], n_start=20)
    assert rep["hausdorff"] == 0.0
    assert np.allclose(rep["image_hull"].vertices, [[0.4, -0.2]])


def test_level_connectivity_cp2(cp2):
    samples = embedded_samples(cp2, 20000, np.random.default_rng(9))
    rep = level_connectivity(cp2, [-0.2, -0.2], 0.01, samples=samples)
    assert rep["components"] == 1 and rep["verdict"] == "connected"
    out = level_connectivity(cp2, [0.3, 0.3], 0.01, samples=samples)
    assert out["components"] == 0 and out["verdict"] == "empty"


def test_level_connectivity_counts_two_islands():
    sys_ = annulus_system()
    rep = level_connectivity(sys_, [0.5], 0.01, n=20000, rng=np.random.default_rng(10))
    assert rep["components"] == 2 and rep["verdict"] == "disconnected"


def test_level_connectivity_undersampled_is_inconclusive(cp2):
    rep = level_connectivity(cp2, [-0.2, -0.2], 0.01, n=200, rng=np.random.default_rng(11))
    assert rep["verdict"] in ("inconclusive", "empty")
    assert rep["components"] in (None, 0)


def test_convexity_defect():
    cc = make_builtin("c_counterexample")
    P = np.r_[sample_image(cc, 4000, np.random.default_rng(12)), [[1, 1, 2], [-1, -1, 2]]]
    assert convexity_defect(P, rng=np.random.default_rng(13)) > 1.0
    # the midpoint (0, 0, 2) of the two marked points sits ~1.32 from the graph
    d = np.min(np.linalg.norm(P - [0, 0, 2], axis=1))
    assert 1.3 < d < 1.4
    assert convexity_defect(np.zeros((1, 2))) == 0.0


def test_convexity_defect_shrinks_for_cp2(cp2):
    vals = [convexity_defect(sample_image(cp2, n, np.random.default_rng(14)),
                             rng=np.random.default_rng(15)) for n in (1000, 4000, 16000)]
    assert vals[0] > vals[1] > vals[2]


def test_polyhedral_set_faces_orthant():
    P = PolyhedralSet.from_lists([[1, 0], [0, 1]], [-0.3, -0.3])
    assert P.faces() == [(), (0,), (1,), (0, 1)]
    assert P.subtorus((0, 1)) == [[1, 0], [0, 1]]
    assert P.active(np.array([-0.3, 0.1])) == (0,)
    with pytest.raises(ValueError):
        PolyhedralSet.from_lists([[0, 0]], [1.0])


def test_cut_rotation_half_line():
    sys_ = make_builtin("r2_rotation")
    P = PolyhedralSet.from_lists([[1]], [0.5])
    rep = cut_decompose(sys_, P, 2000, np.random.default_rng(16), compact=False)
    assert rep.faces == [(), (0,)]
    assert rep.subtori[(0,)] == [[1]] and rep.subtori[()] == []
    assert rep.partition_ok and rep.counts[(0,)] > 0
    assert rep.notes


def test_cut_cp2_orthant(cp2):
    P = PolyhedralSet.from_lists([[1, 0], [0, 1]], [-0.3, -0.3])
    rep = cut_decompose(cp2, P, 4000, np.random.default_rng(17))
    assert rep.partition_ok
    assert sum(rep.counts.values()) == rep.n_in_P
    assert rep.counts[()] > 0 and rep.counts[(0,)] > 0 and rep.counts[(1,)] > 0
    assert rep.subtori[(0, 1)] == [[1, 0], [0, 1]]
    assert rep.connectivity["equivalence_holds"]


def test_cut_containing_polytope_single_face(cp2):
    P = PolyhedralSet.from_lists([[1, 0]], [-10.0])
    n = 1000
    rep = cut_decompose(cp2, P, n, np.random.default_rng(18))
    assert rep.counts[()] == n


@pytest.mark.parametrize("w,expected", [
    ((1.0, 1.0), {(1, 1), (-1, 0), (0, -1)}),
    ((2.0, 1.0), {(1, 2), (-1, 0), (0, -1)}),
])
def test_polyhedrality(w, expected):
    sys_ = make_builtin("cp2_fs", w=w)
    rep = polyhedrality_report(sample_image(sys_, 20000, np.random.default_rng(19)))
    assert rep["rational"]
    assert {tuple(v) for v in rep["integer_normals"]} == expected


def test_polyhedrality_square():
    g = np.linspace(-1, 1, 41)
    sq = np.array([(x, y) for x in g for y in g])
    rep = polyhedrality_report(sq)
    assert {tuple(v) for v in rep["integer_normals"]} == {(1, 0), (-1, 0), (0, 1), (0, -1)}


def test_quadrant_coverage_small():
    out = quadrant_coverage(lambda w: make_builtin("cp2_fs", w=w), n_w=10, n_per=300,
                            rng=np.random.default_rng(20), extent=1.0, step=0.25)
    assert out["grid_points"] == 25
    assert 0 < out["covered"] <= 25
