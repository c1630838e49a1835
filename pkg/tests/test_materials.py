import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmmfit.materials import (ConstraintError, CubicModuli, IsotropicLame, equivalent_shear,
                              matrix_bound_violations, reuss_ce, reuss_ce_derivatives, voigt)

MATRIX = IsotropicLame(51.08, 26.32)
positive = st.floats(0.1, 100.0)


@st.composite
def ordered_pairs(draw):
    """(micro, macro) strictly ordered in mu, mu_star and lam + mu."""
    mu, ms, bulk = draw(positive), draw(positive), draw(positive)
    macro = CubicModuli(mu, ms, bulk - mu)
    f = [draw(st.floats(1.01, 50.0)) for _ in range(3)]
    micro = CubicModuli(f[0] * mu, f[1] * ms, f[2] * bulk - f[0] * mu)
    return micro, macro


def test_voigt_macro_example(macro):
    expected = [[13.548, 1.748, 0], [1.748, 13.548, 0], [0, 0, 0.627]]
    np.testing.assert_allclose(voigt(macro), expected, atol=1e-12)


def test_voigt_zero():
    assert not np.any(voigt(CubicModuli(0, 0, 0)))


def test_isotropic_as_cubic_has_equal_shears():
    c = MATRIX.as_cubic()
    assert (c.mu, c.mu_star, c.lam) == (26.32, 26.32, 51.08)


def test_reuss_example(macro):
    ce = reuss_ce(CubicModuli(10.55, 26.32, 8.22), macro)
    # independent oracle: harmonic gap per channel
    assert ce.mu == pytest.approx(10.55 * 5.9 / (10.55 - 5.9), rel=1e-12)
    assert ce.mu == pytest.approx(13.386, abs=5e-4)
    assert ce.mu_star == pytest.approx(0.6423, abs=5e-5)
    bulk = 18.77 * 7.648 / (18.77 - 7.648)
    assert ce.lam + ce.mu == pytest.approx(bulk, rel=1e-12)
    # the rounded reference values carry a last-digit slip
    assert ce.lam + ce.mu == pytest.approx(12.908, abs=1e-3)
    assert ce.lam == pytest.approx(-0.478, abs=1.5e-3)


def test_reuss_double_macro_gives_double_macro(macro):
    micro = CubicModuli(2 * macro.mu, 2 * macro.mu_star, 2 * macro.bulk_like - 2 * macro.mu)
    ce = reuss_ce(micro, macro)
    np.testing.assert_allclose([ce.mu, ce.mu_star, ce.bulk_like],
                               [2 * macro.mu, 2 * macro.mu_star, 2 * macro.bulk_like], rtol=1e-12)


def test_reuss_stiff_micro_limit(macro):
    ce = reuss_ce(macro.scaled(1e6), macro)
    np.testing.assert_allclose([ce.mu, ce.mu_star, ce.bulk_like],
                               [macro.mu, macro.mu_star, macro.bulk_like], rtol=1e-5)


def test_reuss_rejects_unordered(macro):
    with pytest.raises(ConstraintError, match="mu_star"):
        reuss_ce(CubicModuli(10.0, 0.5, 8.0), macro)
    with pytest.raises(ConstraintError):
        reuss_ce(macro, macro)


@settings(max_examples=200, deadline=None)
@given(ordered_pairs())
def test_reuss_inverse_composition(pair):
    micro, macro = pair
    ce = reuss_ce(micro, macro)
    lhs = np.linalg.inv(voigt(macro))
    rhs = np.linalg.inv(voigt(micro)) + np.linalg.inv(voigt(ce))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))
    assert ce.is_positive_definite()


@settings(max_examples=50, deadline=None)
@given(ordered_pairs())
def test_reuss_derivatives_match_finite_differences(pair):
    micro, macro = pair
    J = reuss_ce_derivatives(micro, macro)
    v = micro.as_array()
    fd = np.empty((3, 3))
    gap = min(micro.mu - macro.mu, micro.mu_star - macro.mu_star, micro.bulk_like - macro.bulk_like)
    h = 1e-4 * gap
    for k in range(3):
        vp, vm = v.copy(), v.copy()
        vp[k] += h
        vm[k] -= h
        cp, cm = reuss_ce(CubicModuli(*vp), macro), reuss_ce(CubicModuli(*vm), macro)
        fd[:, k] = (cp.as_array() - cm.as_array()) / (2 * h)
    np.testing.assert_allclose(J, fd, rtol=1e-4, atol=1e-5 * np.max(np.abs(J)))


def test_equivalent_shear_examples(macro):
    assert equivalent_shear(macro) == pytest.approx(1.537, abs=5e-4)
    assert equivalent_shear(CubicModuli(3.7, 3.7, 1.0)) == pytest.approx(3.7, rel=1e-14)
    assert equivalent_shear(CubicModuli(2.0, 1.0, 0.0)) == pytest.approx(4 ** 0.2, rel=1e-14)
    assert 4 ** 0.2 == pytest.approx(1.3195, abs=5e-5)


@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.floats(1e-3, 1e3))
def test_equivalent_shear_is_one_homogeneous(mu, ms, s):
    c = CubicModuli(mu, ms, 0.0)
    assert equivalent_shear(c.scaled(s)) == pytest.approx(s * equivalent_shear(c), rel=1e-12)


def test_equivalent_shear_requires_positive_definite():
    with pytest.raises(ConstraintError):
        equivalent_shear(CubicModuli(1.0, -1.0, 0.0))


def test_matrix_bound_examples():
    assert matrix_bound_violations(CubicModuli(10.19, 354.87, 11.3), MATRIX) == ["mu_star"]
    assert matrix_bound_violations(CubicModuli(10.55, 26.32, 8.22), MATRIX) == []
    assert matrix_bound_violations(MATRIX.as_cubic(), MATRIX) == []
    assert matrix_bound_violations(CubicModuli(20.0, 20.0, 60.0), MATRIX) == ["lam+mu"]


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
def test_voigt_definiteness_matches_invariant(mu, ms, lam):
    c = CubicModuli(mu, ms, lam)
    V = voigt(c)
    assert np.array_equal(V, V.T)
    eig = np.linalg.eigvalsh(V)
    if min(abs(mu), abs(ms), abs(lam + mu)) > 1e-9:
        assert (eig.min() > 0) == c.is_positive_definite()


def test_isotropic_lame_rejects_indefinite():
    with pytest.raises(ValueError):
        IsotropicLame(-10.0, 1.0)
