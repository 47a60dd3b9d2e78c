import random
from fractions import Fraction

import mpmath as mp
import pytest

from thetamm.errors import TableIncomplete
from thetamm.expansion import (assemble_ratio, brute_force_terms, enumerate_stable_terms,
                               lattice_ratio, max_derivative, scalar_first_order, theta_point)
from thetamm.invariants import build_table, random_table, zero_table
from thetamm.tensors import SymTensor

TAU = mp.matrix([[mp.mpc("0.1", "0.8")]])
F0P = [mp.mpc("0.37", "0.2")]


def test_low_order_weights():
    p1 = {t.parts: t.weight for t in enumerate_stable_terms(1)}
    assert p1 == {((0, 3),): Fraction(1, 6), ((1, 1),): Fraction(1)}
    p2 = {t.parts: t.weight for t in enumerate_stable_terms(2)}
    assert p2 == {((0, 4),): Fraction(1, 24), ((1, 2),): Fraction(1, 2),
                  ((0, 3), (0, 3)): Fraction(1, 72), ((0, 3), (1, 1)): Fraction(1, 6),
                  ((1, 1), (1, 1)): Fraction(1, 2)}


@pytest.mark.parametrize("p", range(7))
def test_enumeration_matches_brute_force(p):
    terms = enumerate_stable_terms(p)
    assert len(terms) == [1, 2, 5, 11, 23, 45, 87][p]
    assert {t.parts: t.weight for t in terms} == brute_force_terms(p)
    assert max(t.derivative for t in terms) == max_derivative(p)


def test_zero_table_gives_theta():
    t = zero_table(1, 3)
    t.curve = None
    r = assemble_ratio(t, 20, 3, f0p=F0P, tau=TAU)
    assert all(s == r.partial_sums[0] for s in r.partial_sums)
    assert r.partial_sums[0] == r.jet.value


def test_first_order_formula():
    t = random_table(1, 2, random.Random(5))
    r = assemble_ratio(t, 24, 2, f0p=F0P, tau=TAU)
    first = (r.partial_sums[1] - r.partial_sums[0]) * 24
    assert abs(first - scalar_first_order(t, r.jet)) < mp.mpf(10) ** -60


@pytest.mark.parametrize("g,p_max", [(1, 3), (2, 2)])
def test_lattice_sum_consistency(g, p_max):
    t = random_table(g, p_max, random.Random(g), radius=mp.mpf(1) / 2)
    tau = TAU if g == 1 else mp.matrix([[mp.mpc("0.1", "0.9"), mp.mpc(0, "0.2")],
                                        [mp.mpc(0, "0.2"), mp.mpc("-0.1", "1.1")]])
    f0p = F0P if g == 1 else [mp.mpc("0.37", "0.2"), mp.mpc("-0.11", "0.05")]
    r = assemble_ratio(t, 16, p_max, nu=[mp.mpf("0.1")] * g, f0p=f0p, tau=tau)
    v, _ = lattice_ratio(t, 16, p_max, nu=[mp.mpf("0.1")] * g, f0p=f0p, tau=tau)
    assert abs(v - r.partial_sums[-1]) < mp.mpf(10) ** -50 * abs(v)


def test_permutation_invariance():
    """Relabelling the cycles permutes tensor indices and leaves S_p unchanged."""
    rng = random.Random(11)
    t = random_table(2, 2, rng, radius=mp.mpf(1) / 2)
    tau = mp.matrix([[mp.mpc(0, "0.9"), mp.mpc(0, "0.2")], [mp.mpc(0, "0.2"), mp.mpc(0, "1.3")]])
    f0p = [mp.mpc("0.3", "0.1"), mp.mpc("-0.2", "0.05")]
    swap = lambda idx: tuple(1 - i for i in idx)
    entries = {k: SymTensor.from_full(2, k[1], lambda idx, T=v: T[swap(idx)]) for k, v in t.entries.items()}
    ts = build_table(t.eps_star, 2, entries)
    taus = mp.matrix([[tau[1, 1], tau[1, 0]], [tau[0, 1], tau[0, 0]]])
    a = assemble_ratio(t, 12, 2, f0p=f0p, tau=tau).partial_sums
    b = assemble_ratio(ts, 12, 2, f0p=f0p[::-1], tau=taus).partial_sums
    assert max(abs(x - y) for x, y in zip(a, b)) < mp.mpf(10) ** -60


def test_missing_entries():
    t = zero_table(1, 1)
    with pytest.raises(TableIncomplete):
        assemble_ratio(t, 10, 2, f0p=F0P, tau=TAU)
    jet = theta_point(t, 10, f0p=F0P, tau=TAU, m_max=2)
    with pytest.raises(TableIncomplete):
        assemble_ratio(t, 10, 1, jet=jet)
