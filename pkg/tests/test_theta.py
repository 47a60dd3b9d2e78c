import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from thetamm.errors import IndefiniteQuadraticForm, RadiusOverflow
from thetamm.theta import (heat_residual, jacobi_relation_residual, jacobi_theta,
                           quasi_periodicity_residual, reduction_residual, theta_eval)

T2 = [[mp.mpc(-3, "0.4"), mp.mpc("0.7", "0.2")], [mp.mpc("0.7", "0.2"), mp.mpc(-2, "-0.3")]]
U2 = [mp.mpc("0.3", "0.1"), mp.mpc("-0.2", "0.5")]
SMALL = mp.mpf(10) ** -40


def test_theta3_at_i():
    v = jacobi_theta([0], [[1j]])
    assert abs(v - mp.jtheta(3, 0, mp.exp(-mp.pi))) < SMALL
    assert abs(v - mp.pi ** mp.mpf("0.25") / mp.gamma(mp.mpf(3) / 4)) < SMALL
    assert mp.nstr(mp.re(v), 20) == "1.0864348112133080146"


def test_characteristics_match_mpmath():
    # theta_{1/2,0}(z, tau) is mpmath's jtheta(2, pi z, q)
    tau = mp.mpc("0.1", "0.9")
    q = mp.exp(1j * mp.pi * tau)
    v = jacobi_theta([mp.mpf("0.2")], [[tau]], [mp.mpf(1) / 2], None)
    assert abs(v - mp.jtheta(2, mp.pi * mp.mpf("0.2"), q)) < SMALL


def test_derivatives_against_finite_differences():
    jet = theta_eval(U2, T2, [mp.mpf("0.3"), mp.mpf("-0.4")], [mp.mpf("0.1"), 0], m_max=3)
    h = mp.mpf(10) ** -20
    for i in range(2):
        up = list(U2)
        up[i] += h
        dn = list(U2)
        dn[i] -= h
        fd = (theta_eval(up, T2, jet.a, jet.b, 1).d(1)[(0,)]
              - theta_eval(dn, T2, jet.a, jet.b, 1).d(1)[(0,)]) / (2 * h)
        assert abs(fd - jet.d(2)[(0, i)]) < mp.mpf(10) ** -30 * abs(jet.d(2)[(0, i)])


def test_heat_equation():
    assert heat_residual(U2, T2, [mp.mpf("0.3"), 0], [0, mp.mpf("0.25")]) < mp.mpf(10) ** -40


def test_jacobi_relation():
    r = jacobi_relation_residual([mp.mpc("0.4", "0.3")], [[mp.mpc("-2.5", "0.3")]],
                                 [mp.mpf(1) / 2], [mp.mpf("0.2")], 17)
    assert r < SMALL


def test_reduction_to_zero_characteristics():
    tau = [[mp.mpc("0.2", "1.1"), mp.mpc("0.1", "0.3")], [mp.mpc("0.1", "0.3"), mp.mpc(0, "0.9")]]
    r = reduction_residual([mp.mpc("0.1", "0.05"), mp.mpf("-0.3")], tau, [mp.mpf("0.25"), mp.mpf("-0.5")],
                           [mp.mpf("0.3"), 0])
    assert r < SMALL


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=2),
       st.lists(st.integers(-3, 3), min_size=2, max_size=2))
def test_quasi_periodicity(n, m):
    r = quasi_periodicity_residual(U2, T2, [mp.mpf("0.3"), mp.mpf("-0.1")], [mp.mpf("0.2"), 0], n, m)
    assert r < mp.mpf(10) ** -35


def test_tail_bound_and_radius_doubling():
    a = [mp.mpf("0.3"), 0]
    coarse = theta_eval(U2, T2, a, None, 2, tol=mp.mpf(10) ** -20)
    fine = theta_eval(U2, T2, a, None, 2, tol=mp.mpf(10) ** -60)
    assert fine.radius > coarse.radius
    assert abs(coarse.value - fine.value) <= 2 * coarse.tail_bound + mp.mpf(10) ** -60
    assert fine.relative_tail < mp.mpf(10) ** -60


def test_indefinite_form_rejected():
    with pytest.raises(IndefiniteQuadraticForm):
        theta_eval([0], [[mp.mpf("0.1")]])
    with pytest.raises(IndefiniteQuadraticForm):
        theta_eval([0, 0], [[-1, 0], [0, 1]])


def test_radius_overflow():
    with pytest.raises(RadiusOverflow):
        theta_eval([0], [[mp.mpf("-1e-6")]], max_radius=50)
