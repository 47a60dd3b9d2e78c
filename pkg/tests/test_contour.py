import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from thetamm.contour import (BasisPath, GeneralizedPath, Potential, basis_moments,
                             convergence_sectors, default_basis, independent_path_count,
                             moment_integral)
from thetamm.errors import ConfigError, DivergentPath


def test_quartic_sectors():
    sectors = convergence_sectors(Potential((0, 0, 0, 1)))
    assert len(sectors) == 4
    centers = sorted(float(s.center % (2 * mp.pi)) for s in sectors)
    assert centers == pytest.approx([0, mp.pi / 2, mp.pi, 3 * mp.pi / 2], abs=1e-12)
    assert all(float(s.width) == pytest.approx(float(mp.pi / 4)) for s in sectors)
    assert independent_path_count(Potential((0, 0, 0, 1))) == 3


def test_gaussian_and_cubic_sectors():
    g = convergence_sectors(Potential((0, 0.5)))
    assert len(g) == 2
    assert all(float(s.width) == pytest.approx(float(mp.pi / 2)) for s in g)
    cubic = Potential((0, 0, mp.mpf(1) / 3))
    assert len(convergence_sectors(cubic)) == 3
    assert independent_path_count(cubic) == 2
    # e^{-V} decays along each bisector
    for s in convergence_sectors(cubic):
        x = 10 * mp.expj(s.center)
        assert mp.re(cubic(x)) > 100


def test_gaussian_integral(gaussian):
    basis = default_basis(gaussian)
    path = GeneralizedPath.from_coefficients({1: 1})
    value = moment_integral(path, basis, gaussian, 1, 0)
    assert abs(value - mp.sqrt(2 * mp.pi)) < mp.mpf(10) ** -70
    assert mp.nstr(mp.re(value), 12) == "2.50662827463"


def test_odd_moments_vanish(quartic, real_line):
    basis = default_basis(quartic)
    for k in (1, 3, 5):
        assert abs(moment_integral(real_line, basis, quartic, 7, k)) < mp.mpf(10) ** -60


def test_linearity(quartic):
    basis = default_basis(quartic)
    one = GeneralizedPath.from_coefficients({1: 1})
    two = GeneralizedPath.from_coefficients({1: 2})
    for k in range(4):
        a = moment_integral(one, basis, quartic, 3, k)
        assert moment_integral(two, basis, quartic, 3, k) == 2 * a


def test_reversal_negates(quartic):
    path = default_basis(quartic)[2]
    m, _ = basis_moments(path, quartic, 5, 4)
    r, _ = basis_moments(path.reversed(), quartic, 5, 4)
    assert all(abs(a + b) < mp.mpf(10) ** -70 for a, b in zip(m, r))


def test_tolerance_halving_within_error(quartic):
    path = default_basis(quartic)[3]
    m1, e1 = basis_moments(path, quartic, 4, 6, tol=mp.mpf(10) ** -40)
    m2, _ = basis_moments(path, quartic, 4, 6, tol=mp.mpf(10) ** -40 / 2)
    for a, b, e in zip(m1, m2, e1):
        assert abs(a - b) <= max(e, mp.mpf(10) ** -70)


def test_divergent_ray_rejected(quartic):
    bad = BasisPath.two_rays(9, mp.pi / 4, 0)
    with pytest.raises(DivergentPath):
        basis_moments(bad, quartic, 1, 2)


def test_path_validation():
    with pytest.raises(ConfigError):
        GeneralizedPath.from_coefficients({1: 0, 2: 0})
    with pytest.raises(ConfigError):
        Potential((1,))
    scale, p = GeneralizedPath.from_coefficients({1: 2, 2: -4}).normalized()
    assert scale == -4 and p.coefficient(2) == 1 and p.coefficient(1) == mp.mpf(-0.5)
    assert GeneralizedPath.from_coefficients({2: 1, 3: -1}).is_genuine


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_linear_in_coefficients(c1, c2):
    pot = Potential((0, mp.mpf("-1.5"), 0, mp.mpf("0.25")))
    basis = default_basis(pot)
    combo = GeneralizedPath.from_coefficients({2: c1, 3: c2}) if (c1 or c2) else None
    if combo is None:
        return
    m2, _ = basis_moments(basis[2], pot, 2, 2)
    m3, _ = basis_moments(basis[3], pot, 2, 2)
    value = moment_integral(combo, basis, pot, 2, 2)
    expect = mp.mpc(c1) * m2[2] + mp.mpc(c2) * m3[2]
    assert abs(value - expect) <= mp.mpf(10) ** -60 * (1 + abs(expect))
