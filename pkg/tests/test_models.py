import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gammahom.errors import ConstructionError, StructuralError
from gammahom.models import (
    BUILTIN_MODELS,
    PROBE_D,
    CoefficientFamily,
    QuadraticForm,
    build_bump_H,
    cartan_noneven,
    cartan_norm,
    check_dominance,
    constant_one,
    derivative_check,
    get_model,
    half_norm_dominance,
    load_quadratic_form,
    make_counterexample_finsler,
    make_dominance_g,
    noneven_dominance,
    oscillating,
    parse_matrix_literal,
    shifted_x,
    smoothstep_cubic,
    smoothstep_quintic,
    tau,
)
from gammahom.numerics import wedge

E1, E2, E3 = np.eye(3)
TAU_PROBE = 2 * math.sqrt(2) / 3


def cols(*c):
    return np.stack(c, axis=-1)


@pytest.fixture(scope="module")
def bump():
    return build_bump_H()


# -- counterexample Finsler density -------------------------------------------

@pytest.mark.parametrize("A,expected", [(cols(E1, E1), 2.0), (cols(E2, E2), 3.0), (np.zeros((3, 2)), 0.0)])
def test_finsler_probe_values(A, expected):
    assert make_counterexample_finsler()(0.0, 0.0, A) == expected


def test_finsler_growth_witness():
    phi = make_counterexample_finsler()
    A = np.random.default_rng(1).standard_normal((1000, 3, 2))
    vals = phi(0.0, 0.0, A)
    n2 = np.sum(A * A, axis=(1, 2))
    assert np.all(vals >= 0.5 * n2) and np.all(vals <= 2.0 * n2)


# -- dominance function and tau -------------------------------------------------

def test_tau_examples():
    assert tau(cols(E1, E2)) == 1.0
    assert tau(cols(E1, E1)) == 0.0
    assert tau(cols(E1, E2 + E3)) == pytest.approx(TAU_PROBE, abs=1e-15)
    assert tau(np.zeros((3, 2))) == 1.0


@given(A=arrays(np.float64, (3, 2), elements=st.floats(-5, 5, allow_nan=False)),
       angle=st.floats(0, 2 * math.pi), axis=st.integers(0, 2))
def test_tau_swap_and_rotation_invariance(A, angle, axis):
    assert tau(A) == tau(A[:, ::-1])
    c, s = math.cos(angle), math.sin(angle)
    R = np.eye(3)
    i, j = [k for k in range(3) if k != axis]
    R[i, i], R[i, j], R[j, i], R[j, j] = c, -s, s, c
    if np.sum(A * A) > 1e-6:
        assert tau(R @ A) == pytest.approx(tau(A), abs=1e-9)
    assert 0.0 <= tau(A) <= 1.0


@pytest.mark.parametrize("eta", [smoothstep_quintic(), smoothstep_cubic()])
def test_dominance_probe_values(eta):
    g = make_dominance_g(eta)
    s0 = np.zeros(3)
    assert g(s0, cols(E1, E2 + E3)) == pytest.approx(15 / 4 + 0.75 * float(eta(TAU_PROBE)), abs=1e-12)
    assert g(s0, cols(E1, E2)) == pytest.approx(3.0, abs=1e-15)
    assert g(s0, np.zeros((3, 2))) == 0.0


def test_dominance_two_homogeneous():
    g = make_dominance_g()
    rng = np.random.default_rng(3)
    A = rng.standard_normal((1000, 3, 2))
    s = rng.standard_normal((1000, 3))
    base = g(s, A)
    for t in (0.5, 2.0, 7.0):
        np.testing.assert_allclose(g(s, t * A), t * t * base, rtol=1e-12)
    n2 = np.sum(A * A, axis=(1, 2))
    mu1, mu2 = g.bounds
    assert np.all(base >= mu1 * n2 - 1e-12) and np.all(base <= mu2 * n2 + 1e-12)


def test_cutoffs_admissible():
    assert smoothstep_quintic().is_admissible()
    assert smoothstep_cubic().is_admissible()
    assert not constant_one().is_admissible()


@pytest.mark.parametrize("g,phi", [(half_norm_dominance(), cartan_norm()),
                                   (make_dominance_g(), cartan_norm(3.0)),
                                   (noneven_dominance(), cartan_noneven())])
def test_check_dominance_passes(g, phi):
    rep = check_dominance(g, phi, samples=500, seed=0)
    assert rep.overall, rep.to_text()


def test_dominance_pointwise_examples():
    s0 = np.zeros(3)
    half, norm = half_norm_dominance(), cartan_norm()
    assert norm(s0, wedge(E1, E2)) == 1.0 == half(s0, cols(E1, E2))
    assert norm(s0, wedge(E1, E1)) == 0.0 < half(s0, cols(E1, E1)) == 1.0
    assert cartan_norm(3.0)(s0, wedge(E1, E2)) == pytest.approx(3.0)
    assert make_dominance_g()(s0, cols(E1, E2)) == pytest.approx(3.0)


def test_check_dominance_detects_violation():
    rep = check_dominance(half_norm_dominance(), cartan_norm(3.0), samples=200, seed=0)
    assert not rep.overall


# -- Cartan integrands -----------------------------------------------------------

@pytest.mark.parametrize("phi", [cartan_norm(), cartan_noneven()])
def test_cartan_homogeneity_and_bounds(phi):
    rng = np.random.default_rng(5)
    z = rng.standard_normal((500, 3))
    s = rng.standard_normal((500, 3))
    for t in (0.3, 4.0):
        np.testing.assert_allclose(phi(s, t * z), t * phi(s, z), rtol=1e-13)
    m1, m2 = phi.bounds
    nz = np.linalg.norm(z, axis=1)
    assert np.all(phi(s, z) >= m1 * nz - 1e-12) and np.all(phi(s, z) <= m2 * nz + 1e-12)


def test_cartan_parity_margins():
    assert cartan_norm().parity_margin() == 2.0
    assert cartan_noneven().parity_margin() == 2.0
    assert cartan_norm().even and not cartan_noneven().even


# -- bump ---------------------------------------------------------------------------

def test_bump_swap_inequality(bump):
    assert bump.swap_margin() > 0
    assert bump(PROBE_D[:, ::-1]) > bump(PROBE_D)


def test_bump_support_and_bounds(bump):
    A = np.random.default_rng(7).standard_normal((400, 3, 2))
    A[:, :, 0] = -E3
    assert np.all(bump(A) == 0.0)
    A = np.random.default_rng(8).standard_normal((400, 3, 2))
    A = np.concatenate([A, PROBE_D[None], PROBE_D[None, :, ::-1]])
    H = bump(A)
    assert np.all(H >= 0) and np.all(H <= np.sum(A * A, axis=(1, 2)))
    np.testing.assert_allclose(bump(2.0 * A), 4.0 * H, rtol=1e-12, atol=1e-300)


def test_bump_vanishes_on_conformal_pairs(bump):
    rng = np.random.default_rng(9)
    a = rng.standard_normal((300, 3))
    v = rng.standard_normal((300, 3))
    v -= (np.sum(v * a, axis=1) / np.sum(a * a, axis=1))[:, None] * a
    v *= (np.linalg.norm(a, axis=1) / np.linalg.norm(v, axis=1))[:, None]
    assert np.all(bump(np.stack([a, v], axis=-1)) == 0.0)


@pytest.mark.parametrize("kwargs", [{"mollify_radius": 0.5}, {"k": 2.0}, {"mollify_radius": 0.0}])
def test_bump_construction_errors(kwargs):
    with pytest.raises(ConstructionError):
        build_bump_H(**kwargs)


# -- quadratic forms and families -------------------------------------------------

def test_quadratic_form_isotropic_check():
    QuadraticForm(np.eye(2), 2 * np.eye(3), isotropic=True)
    with pytest.raises(StructuralError):
        QuadraticForm(np.eye(2), np.diag([1.0, 2.0, 1.0]), isotropic=True)


@given(A=arrays(np.float64, (3, 2), elements=st.floats(-3, 3, allow_nan=False)))
def test_quadratic_form_matrix_consistent(A):
    q = QuadraticForm(np.array([[1.0, 0.5], [-0.5, 1.0]]), np.diag([1.0, 2.0, 3.0]))
    v = A.reshape(-1)
    assert q(A) == pytest.approx(v @ q.matrix() @ v, abs=1e-12)


def test_load_quadratic_form(tmp_path):
    p = tmp_path / "form.ini"
    p.write_text("[form]\na = 1 0; 0 1\nb = 2 0; 0 1\n")
    lag = get_model(str(p))
    assert lag(0.0, 0.0, np.eye(2)) == 3.0
    p.write_text("[form]\na = 1\nb = 1\nc = 2\n")
    with pytest.raises(ValueError):
        load_quadratic_form(p)


def test_parse_matrix_literal():
    np.testing.assert_array_equal(parse_matrix_literal("1 0; 0 1"), np.eye(2))
    np.testing.assert_array_equal(parse_matrix_literal("1,2"), [[1.0, 2.0]])
    for bad in ("1 2; 3", "1 x", "1;;2"):
        with pytest.raises(ValueError):
            parse_matrix_literal(bad)


def test_coefficient_family_invariants():
    fam = CoefficientFamily([np.eye(2), 2 * np.eye(2)], [np.eye(3), np.eye(3)], bound_M=2.0, coercivity_c1=1.0)
    assert fam.check_bounded()
    assert fam.coercivity_margin() >= -1e-12
    with pytest.raises(StructuralError):
        CoefficientFamily([np.eye(2)], [], bound_M=1.0, coercivity_c1=0.0)


# -- built-in registry -------------------------------------------------------------

def test_unknown_model():
    with pytest.raises(KeyError):
        get_model("no-such-model")


@pytest.mark.parametrize("name", sorted(BUILTIN_MODELS))
def test_builtin_growth_and_periodicity(name):
    lag = get_model(name)
    rng = np.random.default_rng(11)
    k = 300
    x = rng.uniform(0, 1, (k, lag.m))
    s = rng.standard_normal((k, lag.n_target))
    A = rng.standard_normal((k, lag.n_target, lag.m))
    vals = lag(x, s, A)
    normp = np.sqrt(np.sum(A * A, axis=(1, 2))) ** lag.p
    assert np.all(vals >= lag.c1 * normp - 1e-10)
    assert np.all(vals <= lag.c2 * (1 + normp) + 1e-10)
    if lag.periodic_x:
        z = rng.integers(-3, 4, (k, lag.m)).astype(float)
        np.testing.assert_allclose(lag(x + z, s, A), vals, rtol=1e-12)
    if lag.periodic_s:
        w = rng.integers(-3, 4, (k, lag.n_target)).astype(float)
        np.testing.assert_allclose(lag(x, s + w, A), vals, rtol=1e-12)


@pytest.mark.parametrize("name", [n for n in sorted(BUILTIN_MODELS) if get_model(n).has_derivatives])
def test_builtin_derivatives_match_finite_differences(name):
    assert derivative_check(get_model(name), points=100, seed=0) < 1e-5


def test_derivative_check_rejects_missing_derivatives():
    with pytest.raises(StructuralError):
        derivative_check(get_model("nonuap-indicator"))


def test_oscillating_and_shift_wrappers():
    lag = get_model("layered-1d")
    A = np.ones((4, 1, 1))
    x = np.array([[0.1], [0.3], [0.6], [0.9]])
    s = np.zeros((4, 1))
    np.testing.assert_array_equal(oscillating(lag, 0.5)(x, s, A), lag(x / 0.5, s / 0.5, A))
    np.testing.assert_array_equal(shifted_x(lag, np.array([2.0]))(x, s, A), lag(x, s, A))


def test_nonuap_indicator_values():
    lag = get_model("nonuap-indicator")
    A = np.zeros((2, 2))
    assert lag(0.0, np.array([1.0, -2.0]), A) == 1.0
    assert lag(0.0, np.array([0.5, 0.0]), A) == 2.0
