"""Wick-pairing side of the holomorphic anomaly.

``Fhat_g`` collects the stable multisets of order ``2g - 2`` and contracts
their index slots pairwise with a symmetric propagator ``kappa``:

    Fhat_g = F_g + sum_terms w(term) sum_{matchings} prod F . prod kappa.

Replacing ``(2k-1)!! kappa^k`` by ``d^(2k) Theta / du^(2k)`` turns this into
the even part of the theta expansion; :func:`structure_match` checks that
correspondence term by term with exact rationals.
"""
import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from .errors import MissingEntry, SingularKappa, TableIncomplete
from .expansion import enumerate_stable_terms, is_stable, pair_order


def double_factorial(n):
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def perfect_matchings(slots):
    """All perfect matchings of a list of slot labels, as tuples of pairs."""
    slots = list(slots)
    if not slots:
        yield ()
        return
    first, rest = slots[0], slots[1:]
    for i, other in enumerate(rest):
        for tail in perfect_matchings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


@dataclass(frozen=True)
class PairingScheme:
    """One orbit of matchings under slot permutations inside each tensor."""

    ranks: tuple
    matching: tuple
    pattern: tuple
    multiplicity: int


@dataclass
class PairingEnumeration:
    ranks: tuple
    schemes: list = field(default_factory=list)
    odd: bool = False

    @property
    def total(self):
        return sum(s.multiplicity for s in self.schemes)

    def __iter__(self):
        return iter(self.schemes)

    def __len__(self):
        return len(self.schemes)


def _slots(ranks):
    return [(i, s) for i, l in enumerate(ranks) for s in range(l)]


def _pattern(matching):
    """Multiset of factor pairs joined by the matching (the contraction pattern)."""
    return tuple(sorted(tuple(sorted((a[0], b[0]))) for a, b in matching))


def enumerate_pairings(ranks):
    """Matchings of the index slots of tensors with the given ranks, by orbit."""
    ranks = tuple(int(l) for l in ranks)
    if sum(ranks) % 2:
        return PairingEnumeration(ranks, [], odd=True)
    orbits = {}
    for m in perfect_matchings(_slots(ranks)):
        key = _pattern(m)
        if key in orbits:
            orbits[key][1] += 1
        else:
            orbits[key] = [m, 1]
    schemes = [PairingScheme(ranks, m, key, c) for key, (m, c) in sorted(orbits.items())]
    return PairingEnumeration(ranks, schemes)


# ----------------------------------------------------------------------
# Fhat_g

def _kappa_entry(kappa, i, j):
    try:
        return kappa[i][j]
    except TypeError:
        return kappa[i, j]


def _contract_matching(factors, ranks, matching, kappa, dim):
    """``sum_idx prod_f F_f[idx_f] prod_pairs kappa[idx_a, idx_b]``."""
    slots = _slots(ranks)
    where = {s: n for n, s in enumerate(slots)}
    total = 0
    for idx in itertools.product(range(dim), repeat=len(slots)):
        v = 1
        for (a, b) in matching:
            v = v * _kappa_entry(kappa, idx[where[a]], idx[where[b]])
        pos = 0
        for f, l in zip(factors, ranks):
            v = v * f(idx[pos:pos + l])
            pos += l
        total = total + v
    return total


def _component(table, h, l):
    t = table.get(h, l)
    return lambda idx: t[tuple(sorted(idx))]


def fhat_terms(g):
    """Stable terms of order ``2g - 2`` with an even number of slots."""
    return [t for t in enumerate_stable_terms(2 * g - 2) if t.derivative % 2 == 0]


def fhat_g(table, kappa, g, dim=None, orbits=True):
    """``Fhat_g`` for a table of ``F_h^(l)`` and a symmetric ``kappa``.

    ``orbits=False`` sums every matching separately instead of one
    representative per orbit times its multiplicity.
    """
    if g < 2:
        raise ValueError("Fhat_g is defined here for g >= 2")
    dim = table.gbar if dim is None else dim
    if not hasattr(kappa, "__getitem__"):
        kappa = [[kappa]]
    total = 0
    for term in fhat_terms(g):
        try:
            factors = [_component(table, h, l) for h, l in term.parts]
        except MissingEntry as exc:
            raise TableIncomplete(str(exc)) from exc
        ranks = tuple(l for _, l in term.parts)
        acc = 0
        if orbits:
            for s in enumerate_pairings(ranks):
                acc = acc + s.multiplicity * _contract_matching(factors, ranks, s.matching, kappa, dim)
        else:
            for m in perfect_matchings(_slots(ranks)):
                acc = acc + _contract_matching(factors, ranks, m, kappa, dim)
        total = total + acc * term.weight.numerator / term.weight.denominator
    if (g, 0) in table.entries:
        total = total + table.get(g, 0)[()]
    return total


def scalar_fhat2(F, kappa):
    """Closed form of ``Fhat_2`` for gbar = 1; ``F(h, l)`` gives scalars."""
    return (F(2, 0) + kappa * (F(1, 2) / 2 + F(1, 1) ** 2 / 2)
            + 3 * kappa ** 2 * (F(0, 4) / 24 + F(1, 1) * F(0, 3) / 6)
            + 15 * kappa ** 3 * F(0, 3) ** 2 / 72)


def diagram_weights(g):
    """Rational weight of every (term, orbit) pair: term weight times orbit size."""
    out = []
    for term in fhat_terms(g):
        ranks = tuple(l for _, l in term.parts)
        for s in enumerate_pairings(ranks):
            out.append((term.parts, s.pattern, term.weight * s.multiplicity))
    return out


# ----------------------------------------------------------------------
# Gaussian moments

def _det(M):
    """Exact determinant by fraction-valued elimination."""
    n = len(M)
    A = [[Fraction(x) for x in row] for row in M]
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            for k in range(c, n):
                A[r][k] -= f * A[c][k]
    return det


def _poly_mul(p, q):
    out = {}
    for a, x in p.items():
        for b, y in q.items():
            k = tuple(i + j for i, j in zip(a, b))
            out[k] = out.get(k, 0) + x * y
    return out


def gaussian_moment_identity(kappa, l=None, order=None):
    """Both sides of ``d^(2l) f / du^(2l) = (2l-1)!! kappa^l`` as dicts over sorted keys.

    ``f = exp(-(1/4) v t^-1 v)`` at ``t = -kappa^-1 / 2`` is ``exp(v kappa v / 2)``;
    the left side differentiates that closed form through its Taylor
    polynomial ``(v kappa v / 2)^l / l!``, the right side sums over
    perfect matchings.  Entries of ``kappa`` may be Fractions for exact
    arithmetic.  An odd derivative order returns ``(0, 0)``.
    """
    kappa = [[Fraction(x) if isinstance(x, int) else x for x in row] for row in kappa]
    dim = len(kappa)
    if _det(kappa) == 0:
        raise SingularKappa("kappa is singular; t = -kappa^-1 / 2 is undefined")
    m = 2 * l if order is None else int(order)
    if m % 2:
        return 0, 0
    half = m // 2
    # Q(v) = v kappa v / 2 as exponent-tuple polynomial
    Q = {}
    for i in range(dim):
        for j in range(dim):
            e = [0] * dim
            e[i] += 1
            e[j] += 1
            Q[tuple(e)] = Q.get(tuple(e), 0) + kappa[i][j] * Fraction(1, 2)
    P = {(0,) * dim: Fraction(1)}
    for _ in range(half):
        P = _poly_mul(P, Q)
    lhs, rhs = {}, {}
    for key in itertools.combinations_with_replacement(range(dim), m):
        counts = Counter(key)
        alpha = tuple(counts.get(i, 0) for i in range(dim))
        mult = 1
        for c in alpha:
            mult *= factorial(c)
        lhs[key] = P.get(alpha, 0) * mult / factorial(half)
        acc = 0
        for match in perfect_matchings(list(range(m))):
            v = 1
            for a, b in match:
                v = v * kappa[key[a]][key[b]]
            acc += v
        rhs[key] = acc
    return lhs, rhs


# ----------------------------------------------------------------------
# kappa <-> Theta correspondence

def kappa_side_terms(p):
    """Terms of the kappa expansion at order ``p = 2g - 2``, from ordered tuples.

    Returns a dict multiset -> (weight, sum l).  The weight is the
    coefficient in front of ``(sum l - 1)!! kappa^(sum l / 2)``.
    """
    out = Counter()
    if p == 0:
        return {(): (Fraction(1), 0)}
    pairs = [(h, l) for h in range(p + 2) for l in range(1, p + 3)
             if is_stable((h, l)) and pair_order((h, l)) <= p]
    for k in range(1, p + 1):
        for seq in itertools.product(pairs, repeat=k):
            if sum(pair_order(q) for q in seq) != p:
                continue
            L = sum(l for _, l in seq)
            if L % 2:
                continue
            den = factorial(k)
            for _, l in seq:
                den *= factorial(l)
            out[tuple(sorted(seq))] += Fraction(1, den)
    return {k: (w, sum(l for _, l in k)) for k, w in out.items()}


@dataclass
class StructureReport:
    p_max: int
    rows: list = field(default_factory=list)

    @property
    def ok(self):
        return all(r["match"] for r in self.rows)


def structure_match(p_max):
    """Compare the kappa expansion with the theta expansion for ``p <= p_max``.

    Under ``(2k-1)!! kappa^k -> Theta^(2k)`` every even term must carry the
    same multiset, derivative order and weight; odd-``sum l`` terms exist
    only on the theta side.
    """
    report = StructureReport(p_max)
    for p in range(p_max + 1):
        theta = {t.parts: (t.weight, t.derivative) for t in enumerate_stable_terms(p)}
        even = {k: v for k, v in theta.items() if v[1] % 2 == 0}
        odd = sorted(k for k, v in theta.items() if v[1] % 2)
        kappa = kappa_side_terms(p)
        report.rows.append({
            "p": p,
            "theta_terms": len(theta),
            "kappa_terms": len(kappa),
            "odd_theta_terms": odd,
            "match": kappa == even and (p % 2 == 0 or not kappa),
        })
    return report
