import itertools
import random
from fractions import Fraction

import pytest

from thetamm.errors import SingularKappa, TableIncomplete
from thetamm.holan import (diagram_weights, double_factorial, enumerate_pairings, fhat_g,
                           gaussian_moment_identity, scalar_fhat2, structure_match)
from thetamm.invariants import build_table
from thetamm.tensors import SymTensor


def _partitions(total, max_part=None):
    max_part = total if max_part is None else max_part
    if total == 0:
        yield ()
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in _partitions(total - first, first):
            yield (first,) + rest


@pytest.mark.parametrize("L", range(2, 13, 2))
def test_pairing_totals(L):
    for ranks in _partitions(L):
        if len(ranks) > 4:
            continue
        e = enumerate_pairings(ranks)
        assert not e.odd and e.total == double_factorial(L - 1)


def test_orbit_split():
    assert sorted(s.multiplicity for s in enumerate_pairings((3, 3))) == [6, 9]
    e = enumerate_pairings((4,))
    assert len(e) == 1 and e.total == 3
    assert enumerate_pairings((3, 2)).odd


def _table(values, dim=1):
    entries = {}
    for (h, l), v in values.items():
        entries[(h, l)] = v if isinstance(v, SymTensor) else SymTensor.scalar(Fraction(v), l)
    return build_table([0] * dim, 2, entries)


def test_scalar_fhat2():
    vals = {(0, 3): 3, (0, 4): 5, (1, 1): Fraction(1, 7), (1, 2): -2, (2, 0): Fraction(1, 3)}
    t = _table(vals)
    kappa = Fraction(2, 5)
    F = lambda h, l: Fraction(vals[(h, l)])
    assert fhat_g(t, kappa, 2) == scalar_fhat2(F, kappa)
    assert fhat_g(t, kappa, 2, orbits=False) == fhat_g(t, kappa, 2)


def test_orbits_versus_raw_two_cycles():
    rng = random.Random(4)
    entries = {}
    for h, l in [(0, 3), (0, 4), (1, 1), (1, 2)]:
        t = SymTensor(2, l)
        for key in t.data:
            t.data[key] = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        entries[(h, l)] = t
    table = build_table([0, 0], 2, entries)
    kappa = [[Fraction(1, 2), Fraction(1, 3)], [Fraction(1, 3), Fraction(2)]]
    assert fhat_g(table, kappa, 2) == fhat_g(table, kappa, 2, orbits=False)


def test_missing_entry():
    t = build_table([0], 1, {(0, 3): SymTensor.scalar(1, 3), (1, 1): SymTensor.scalar(1, 1)})
    with pytest.raises(TableIncomplete):
        fhat_g(t, Fraction(1), 2)


def test_diagram_weights_g2():
    w = {(parts, pat): wt for parts, pat, wt in diagram_weights(2)}
    assert w[(((0, 3), (0, 3)), ((0, 0), (0, 1), (1, 1)))] == Fraction(1, 8)
    assert w[(((0, 3), (0, 3)), ((0, 1), (0, 1), (0, 1)))] == Fraction(1, 12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gaussian_moments(dim):
    rng = random.Random(dim)
    while True:
        kappa = [[Fraction(0)] * dim for _ in range(dim)]
        for i, j in itertools.combinations_with_replacement(range(dim), 2):
            kappa[i][j] = kappa[j][i] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        try:
            for l in range(1, 5):
                lhs, rhs = gaussian_moment_identity(kappa, l)
                assert lhs == rhs
            break
        except SingularKappa:
            continue
    assert gaussian_moment_identity(kappa, order=3) == (0, 0)


def test_singular_kappa():
    with pytest.raises(SingularKappa):
        gaussian_moment_identity([[1, 2], [2, 4]], 1)


def test_structure_match():
    rep = structure_match(4)
    assert rep.ok
    assert rep.rows[1]["odd_theta_terms"] == [((0, 3),), ((1, 1),)]
