import random

import mpmath as mp
import pytest

from thetamm.errors import TableIncomplete, ThetaDerivativeVanishing
from thetamm.invariants import random_table, zero_table
from thetamm.resummation import (assembled_coefficients, eval_resummed, operator_series, round_trip_residuals,
                                 shifted_point, solve_corrections, solve_scalar)
from thetamm.theta import theta_eval

sympy = pytest.importorskip("sympy")

TAU = mp.matrix([[mp.mpc("0.1", "0.8")]])
F0P = [mp.mpc("0.37", "0.2")]


def test_scalar_formulas_symbolic():
    F03, F04, F11, F12 = sympy.symbols("F03 F04 F11 F12")
    th = sympy.symbols("th0:7")
    F = {(0, 3): F03, (0, 4): F04, (1, 1): F11, (1, 2): F12}
    us, ts = solve_scalar(lambda h, l: F[(h, l)], lambda m: th[m], 1)
    assert sympy.simplify(us[1] - (F11 + F03 * th[3] / (6 * th[1]))) == 0
    # order 2: t1 Theta'' + u1^2 Theta'' / 2 matches the assembled series
    a2 = (F04 * th[4] / 24 + F12 * th[2] / 2 + F03 ** 2 * th[6] / 72
          + F03 * F11 * th[4] / 6 + F11 ** 2 * th[2] / 2)
    assert sympy.simplify(ts[1] * th[2] + us[1] ** 2 * th[2] / 2 - a2) == 0


def test_operator_series_low_orders():
    s = operator_series({1: [2]}, {1: [[3]]}, 1, 2)
    assert s[(1, (0,))] == 2
    assert s[(2, (0, 0))] == 3 + 2
    assert s[(0, ())] == 1


def test_zero_table_gives_no_shift():
    t = zero_table(1, 2)
    corr = solve_corrections(t, None, 1, 20, f0p=F0P, tau=TAU)
    assert corr.u[1][0] == 0 and corr.t[1][0][0] == 0
    u, tt = shifted_point(corr, 20)
    assert u == list(corr.jet.u)


@pytest.mark.parametrize("q_max", [1, 2])
def test_round_trip(q_max):
    t = random_table(1, 2 * q_max, random.Random(q_max), radius=mp.mpf(1) / 2)
    corr = solve_corrections(t, None, q_max, 18, f0p=F0P, tau=TAU)
    res = round_trip_residuals(corr)
    assert max(res) < mp.mpf(10) ** -50


def test_round_trip_two_cycles():
    t = random_table(2, 2, random.Random(3), radius=mp.mpf(1) / 2)
    tau = mp.matrix([[mp.mpc("0.1", "0.9"), mp.mpc(0, "0.2")], [mp.mpc(0, "0.2"), mp.mpc("-0.1", "1.1")]])
    corr = solve_corrections(t, None, 1, 14, f0p=[mp.mpc("0.3", "0.1"), mp.mpc("-0.2", 0)], tau=tau)
    assert max(round_trip_residuals(corr)) < mp.mpf(10) ** -40


def test_perturbed_solution_breaks_round_trip():
    t = random_table(1, 2, random.Random(7), radius=mp.mpf(1) / 2)
    corr = solve_corrections(t, None, 1, 18, f0p=F0P, tau=TAU)
    corr.u[1] = [corr.u[1][0] + mp.mpf(10) ** -6]
    assert round_trip_residuals(corr)[1] > mp.mpf(10) ** -9


def test_remainder_is_third_order():
    """At a fixed base jet, Theta(shifted) minus the assembled S_2 is O(e^3)."""
    t = random_table(1, 2, random.Random(9), radius=mp.mpf(1) / 2)
    corr = solve_corrections(t, None, 1, 30, f0p=F0P, tau=TAU)
    coeffs = assembled_coefficients(t, corr.jet, 2)
    errs = []
    for N in (200, 400):
        s2 = sum(c / mp.mpf(N) ** p for p, c in enumerate(coeffs))
        errs.append(abs(eval_resummed(corr, N) - s2))
    slope = mp.log(errs[1] / errs[0]) / mp.log(2)
    assert -3.2 < slope < -2.8


def test_divisor_guard():
    # Theta' vanishes at u = 0 with zero characteristics (even function)
    t = zero_table(1, 2)
    jet = theta_eval([0], [[-1]], [0], [0], 6)
    with pytest.raises(ThetaDerivativeVanishing) as info:
        solve_corrections(t, jet, 1)
    assert info.value.order == 1


def test_table_too_short():
    with pytest.raises(TableIncomplete):
        solve_corrections(zero_table(1, 1), None, 1, 10, f0p=F0P, tau=TAU)
