import numpy as np
import pytest

from gcx.builtins import BUILTINS, CP2Charts, make_builtin
from gcx.genlin import (b_field_shift, from_complex_structure, from_symplectic, standard_complex,
                        standard_symplectic, validate_structure)
from gcx.geom import (FieldModel, SectionField, courant_bracket, dH_residual,
                      exterior_derivative_2form, fd_jacobian, integrability_residual)

D = 4


def rotating_complex_structure(x):
    """J(x) = R(x1) J0 R(x1)^T with R rotating the (e1, e3) plane."""
    c, s = np.cos(x[0]), np.sin(x[0])
    R = np.eye(D)
    R[0, 0], R[0, 2], R[2, 0], R[2, 2] = c, -s, s, c
    return from_complex_structure(R @ standard_complex(D) @ R.T)


def nonclosed_B(x):
    M = np.zeros((D, D))
    M[0, 1] = x[2] * x[0]
    M[0, 2] = np.sin(x[1])
    M[1, 3] = x[0] * x[3]
    M[2, 3] = x[1] * x[2]
    return M - M.T


def random_section(rng):
    C = rng.normal(size=(2 * D, D + 1))
    return SectionField(lambda x: np.concatenate([np.tanh(C[:D, :D] @ x + C[:D, D]),
                                                  np.sin(C[D:, :D] @ x + C[D:, D])]))


def test_constant_sections_bracket_zero():
    a = SectionField(lambda x: np.array([1.0, 2, 0, 0, 0.5, 0, 1, 3]))
    b = SectionField(lambda x: np.array([0.0, 1, 1, 0, 0, 2, 0, 1]))
    assert np.abs(courant_bracket(a, b, np.zeros((D, D, D)), np.ones(D))).max() < 1e-12


def test_bracket_hand_expansion():
    # [d/dx1, x1 dx2] = L_{d/dx1}(x1 dx2) - 1/2 d(x1 dx2 (d/dx1)) = dx2
    s1 = SectionField(lambda x: np.r_[1.0, 0, 0, 0])
    s2 = SectionField(lambda x: np.r_[0.0, 0, 0, x[0]])
    for p in ([0.3, -1.0], [2.0, 0.5]):
        out = courant_bracket(s1, s2, np.zeros((2, 2, 2)), np.array(p))
        assert np.abs(out - np.r_[0, 0, 0, 1]).max() < 1e-9
        rev = courant_bracket(s2, s1, np.zeros((2, 2, 2)), np.array(p))
        assert np.abs(rev + out).max() < 1e-9


def test_bracket_analytic_jacobian_matches_fd():
    s = SectionField(lambda x: np.r_[x[1] ** 2, x[0], 0, x[0] * x[1]],
                     lambda x: np.array([[0, 2 * x[1]], [1, 0], [0, 0], [x[1], x[0]]]))
    t = SectionField(lambda x: np.r_[np.sin(x[0]), 1.0, x[1], 0])
    p = np.array([0.4, -0.7])
    H = np.zeros((2, 2, 2))
    fd = SectionField(s.value)
    assert np.abs(courant_bracket(s, t, H, p) - courant_bracket(fd, t, H, p)).max() < 1e-8


def test_bracket_vector_part_antisymmetric_and_twist():
    rng = np.random.default_rng(0)
    s1, s2 = random_section(rng), random_section(rng)
    T = rng.normal(size=(D, D, D))
    H = sum(np.transpose(T, p) * sgn for p, sgn in
            [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
             ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)])
    p = 0.3 * rng.normal(size=D)
    a = courant_bracket(s1, s2, H, p)
    b = courant_bracket(s2, s1, H, p)
    assert np.abs(a + b).max() < 1e-8
    untwisted = courant_bracket(s1, s2, np.zeros((D, D, D)), p)
    X, Y = s1(p)[:D], s2(p)[:D]
    assert np.abs(a[D:] - untwisted[D:] - np.einsum("ijk,i,j->k", H, X, Y)).max() < 1e-10


def test_b_transform_shifts_twist_by_dB():
    """[e^B s1, e^B s2]_H = e^B [s1, s2]_{H + dB} for a non-closed B(x)."""
    rng = np.random.default_rng(1)
    s1, s2 = random_section(rng), random_section(rng)

    def shifted(s):
        return SectionField(lambda x: np.concatenate([s(x)[:D], s(x)[D:] + s(x)[:D] @ nonclosed_B(x)]))

    p = 0.5 * rng.normal(size=D)
    dB = lambda x: exterior_derivative_2form(nonclosed_B, x)
    lhs = courant_bracket(shifted(s1), shifted(s2), np.zeros((D, D, D)), p)
    for sign, expect_match in ((1, True), (-1, False)):
        r = courant_bracket(s1, s2, lambda x: sign * dB(x), p)
        r = np.concatenate([r[:D], r[D:] + r[:D] @ nonclosed_B(p)])
        assert (np.abs(lhs - r).max() < 1e-7) == expect_match


def test_shifted_structure_integrable_for_shifted_twist():
    S0 = from_symplectic(standard_symplectic(D))
    model = lambda H: FieldModel(D, lambda x: b_field_shift(S0, nonclosed_B(x)), H)
    p = np.array([0.3, -0.4, 0.5, 0.2])
    minus_dB = lambda x: -exterior_derivative_2form(nonclosed_B, x)
    assert integrability_residual(model(minus_dB), p) < 1e-6
    assert integrability_residual(model(None), p) > 1e-2


def test_nonintegrable_fixture_detected():
    model = FieldModel(D, rotating_complex_structure)
    rng = np.random.default_rng(2)
    for p in rng.uniform(-1, 1, size=(5, D)):
        assert integrability_residual(model, p) > 1e-2


@pytest.mark.parametrize("name", BUILTINS)
def test_builtin_structures_valid(name):
    sys_ = make_builtin(name)
    X, C = sys_.model.sample(10, np.random.default_rng(3))
    for x, c in zip(X, C):
        assert validate_structure(sys_.model.structure_mat(x, c)).passed
        assert dH_residual(sys_.model, x, c) < 1e-8


@pytest.mark.parametrize("name", ["r2n_symplectic", "r2_rotation", "c_counterexample", "cp2_fs"])
def test_builtin_integrable(name):
    sys_ = make_builtin(name)
    X, C = sys_.model.sample(10, np.random.default_rng(4))
    for x, c in zip(X, C):
        assert integrability_residual(sys_.model, x, c) < 1e-5


def test_product_family_is_not_integrable():
    sys_ = make_builtin("product_family")
    X, C = sys_.model.sample(5, np.random.default_rng(5))
    assert max(integrability_residual(sys_.model, x, c) for x, c in zip(X, C)) > 1e-2


def test_integrability_residual_converges_quadratically():
    sys_ = make_builtin("cp2_fs", w=(1.0, 1.0))
    x, c = np.array([0.4, -0.3, 0.25, 0.6]), 0
    r = [integrability_residual(sys_.model, x, c, h) for h in (1e-2, 5e-3, 2.5e-3)]
    assert r[0] > r[1] > r[2]
    for a, b in zip(r, r[1:]):
        assert 3.0 < a / b < 5.0


def test_builtin_examples():
    cp2 = make_builtin("cp2_fs", w=(1.0, 1.0))
    Z = np.ones(3) / np.sqrt(3)
    x = CP2Charts.coords(Z, 0)
    assert np.abs(cp2.mu(x, 0) - np.array([-1 / 6, -1 / 6])).max() < 1e-14
    cc = make_builtin("c_counterexample")
    assert np.array_equal(cc.mu(np.array([1.0, 1.0])), [1.0, 1.0, 2.0])
    r2 = make_builtin("r2n_symplectic", d=2)
    for x in np.random.default_rng(6).uniform(-1, 1, size=(3, 2)):
        assert np.array_equal(r2.model.structure_mat(x), from_symplectic(standard_symplectic(2)).mat)


def test_builtin_rejects_bad_parameters():
    with pytest.raises(KeyError):
        make_builtin("torus")
    with pytest.raises(ValueError):
        make_builtin("cp2_fs", w=(0.0, 1.0))


def test_cp2_chart_overlap_consistency():
    cp2 = make_builtin("cp2_fs", w=(1.5, 0.7))
    rng = np.random.default_rng(7)
    for _ in range(20):
        Z = rng.normal(size=3) + 1j * rng.normal(size=3)
        vals = [cp2.mu(CP2Charts.coords(Z, k), k) for k in range(3)]
        assert max(np.abs(v - vals[0]).max() for v in vals) < 1e-10
        x0 = CP2Charts.coords(Z, 0)
        assert np.abs(cp2.model.to_chart(x0, 0, 2) - CP2Charts.coords(Z, 2)).max() < 1e-10


def test_cp2_form_calibrated_to_moment_map():
    """d mu^xi = iota_{xi_M} omega (as components omega(xi_M, .))."""
    cp2 = make_builtin("cp2_fs", w=(1.0, 1.0))
    xi = np.array([1.0, np.sqrt(2)])
    X, C = cp2.model.sample(10, np.random.default_rng(8))
    for x, c in zip(X, C):
        w = cp2.model.form(x, c)
        fd = fd_jacobian(lambda y: cp2.mu_xi(xi, y, c), x)
        assert np.abs(cp2.xi_M(xi, x, c) @ w - fd).max() < 1e-8
