"""Stable terms of the oscillatory series and the ratio prediction.

Expanding ``exp(sum_{(h,l) stable} N^(2-2h-l) F_h^(l) . x^l / l!)`` in powers
of ``1/N`` and trading every ``x^L`` for ``d^L/du^L`` under the lattice sum
gives

    Zhat / Z(eps*) ~ sum_p N^-p sum_{terms of order p} w . F x ... x F . d^L Theta

where a term is a multiset of stable pairs ``(h_i, l_i)`` with
``sum (2 h_i + l_i - 2) = p`` and weight ``1 / (prod mult! prod l_i!)``.
"""
import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import mpmath as mp

from .errors import ConfigError, TableIncomplete
from .invariants import stable_pairs
from .precision import resolve, working
from .tensors import contract
from .theta import theta_eval


def pair_order(pair):
    h, l = pair
    return 2 * h + l - 2


def is_stable(pair):
    h, l = pair
    return l >= 1 and 2 - 2 * h - l < 0


@dataclass(frozen=True)
class StableTerm:
    """Multiset of stable pairs with its exact rational weight."""

    parts: tuple
    weight: Fraction

    @property
    def k(self):
        return len(self.parts)

    @property
    def order(self):
        return sum(pair_order(q) for q in self.parts)

    @property
    def derivative(self):
        """Total number of u-derivatives, ``sum l_i``."""
        return sum(l for _, l in self.parts)

    def sort_key(self):
        return (self.order, self.k, self.parts)


def term_weight(parts):
    """``(k! / prod mult!) / (k! prod l_i!)``."""
    den = 1
    for c in Counter(parts).values():
        den *= factorial(c)
    for _, l in parts:
        den *= factorial(l)
    return Fraction(1, den)


def _pairs_of_order(q):
    return [(h, q + 2 - 2 * h) for h in range(0, q // 2 + 2) if q + 2 - 2 * h >= 1]


def enumerate_stable_terms(p):
    """All stable terms of order ``p`` in canonical order."""
    if p < 0:
        raise ConfigError("order must be nonnegative")
    out = []

    def rec(remaining, smallest, acc):
        if remaining == 0:
            out.append(tuple(acc))
            return
        for q in range(1, remaining + 1):
            for pair in _pairs_of_order(q):
                key = (q, pair)
                if smallest is not None and key < smallest:
                    continue
                acc.append(pair)
                rec(remaining - q, key, acc)
                acc.pop()

    rec(p, None, [])
    terms = {tuple(sorted(parts)): None for parts in out}
    result = [StableTerm(parts, term_weight(parts)) for parts in terms]
    return sorted(result, key=StableTerm.sort_key)


def brute_force_terms(p):
    """Independent generator: ordered compositions of ``p``, filtered for stability.

    Every ordered sequence of pairs is produced once; the weight of a
    multiset is its number of orderings divided by ``k! prod l_i!``, i.e. the
    literal coefficient of the expanded exponential.
    """
    if p == 0:
        return {(): Fraction(1)}
    counts = Counter()
    for k in range(1, p + 1):
        for cuts in itertools.combinations(range(1, p), k - 1):
            bounds = (0,) + cuts + (p,)
            orders = [bounds[i + 1] - bounds[i] for i in range(k)]
            choices = []
            for q in orders:
                cands = [(h, l) for h in range(0, q + 2) for l in range(1, q + 3)
                         if 2 * h + l - 2 == q and is_stable((h, l))]
                choices.append(cands)
            for seq in itertools.product(*choices):
                counts[seq] += 1
    out = Counter()
    for seq, c in counts.items():
        den = factorial(len(seq))
        for _, l in seq:
            den *= factorial(l)
        out[tuple(sorted(seq))] += Fraction(c, den)
    return dict(out)


def max_derivative(p_max):
    return 3 * p_max


# ----------------------------------------------------------------------
# assembling the prediction

@dataclass
class RatioExpansion:
    """Partial sums ``S_0..S_p`` and per-term contributions (before ``N^-p``)."""

    N: object
    partial_sums: list
    contributions: list = field(default_factory=list)
    jet: object = None

    def to_json(self):
        c = lambda z: [mp.nstr(mp.re(z), 30), mp.nstr(mp.im(z), 30)]
        return {
            "N": mp.nstr(self.N, 20),
            "partial_sums": [c(s) for s in self.partial_sums],
            "terms": [{"order": t.order, "parts": [list(q) for q in t.parts],
                       "weight": str(t.weight), "value": c(v)}
                      for t, v in self.contributions],
        }


def theta_point(table, N, nu=None, f0p=None, tau=None, m_max=None, prec=None):
    """:class:`ThetaJet` at ``u = N F0'``, ``t = i pi tau``, ``(a, b) = (-N eps*, nu)``."""
    curve = getattr(table, "curve", None)
    f0p = curve.f0p if f0p is None else f0p
    tau = curve.tau if tau is None else tau
    if f0p is None or tau is None:
        raise ConfigError("F0' and tau are required for the theta evaluation point")
    g = table.gbar
    prec = resolve(prec)
    with working(prec):
        N = mp.mpf(N)
        f0p = list(f0p) if isinstance(f0p, (list, tuple)) else [f0p[i] for i in range(g)]
        tau = tau if isinstance(tau, mp.matrix) else mp.matrix(tau)
        u = [N * mp.mpc(v) for v in f0p]
        t = tau * (1j * mp.pi)
        a = [-N * mp.mpf(e) for e in table.eps_star]
        b = [mp.mpc(0)] * g if nu is None else [mp.mpc(v) for v in nu]
        m_max = max_derivative(table.p_max) if m_max is None else m_max
        return theta_eval(u, t, a, b, m_max, prec)


def assemble_ratio(table, N, p_max, nu=None, jet=None, f0p=None, tau=None, prec=None):
    """Partial sums ``S_0..S_{p_max}`` of the ratio ``Zhat(gamma) / Z(eps*)``."""
    prec = resolve(prec)
    with working(prec):
        N = mp.mpf(N)
        needed = stable_pairs(p_max)
        missing = [q for q in needed if q not in table.entries]
        if missing:
            raise TableIncomplete(f"FgTable lacks entries {missing} required for p_max={p_max}")
        if jet is None:
            jet = theta_point(table, N, nu, f0p, tau, max_derivative(p_max), prec)
        if jet.m_max < max_derivative(p_max):
            raise TableIncomplete(f"theta jet has m_max={jet.m_max} < {max_derivative(p_max)}")
        sums = [jet.value]
        contributions = []
        for p in range(1, p_max + 1):
            layer = []
            for term in enumerate_stable_terms(p):
                factors = [table.get(h, l) for h, l in term.parts]
                value = mp.mpf(term.weight.numerator) / term.weight.denominator
                value *= contract(factors, jet.d(term.derivative))
                contributions.append((term, value))
                layer.append(value)
            sums.append(sums[-1] + mp.fsum(layer) / N ** p)
        return RatioExpansion(N, sums, contributions, jet)


def lattice_ratio(table, N, p_max, nu=None, f0p=None, tau=None, prec=None, window=None):
    """Direct lattice sum of the Taylor-expanded fixed-filling ratios.

    Sums ``exp(x.u + x.t.x + 2 i pi n.nu) P_p(x)`` over ``n`` near the peak,
    where ``x = n - N eps*`` and ``P_p`` is the order-``p`` truncation in
    ``1/N`` of ``exp(sum_stable N^(2-2h-l) F_h^(l) x^l / l!)``.  Equal to
    ``S_{p_max}`` up to the window tail, by exchanging derivatives and
    multiplication.  Returns ``(value, window)``.
    """
    prec = resolve(prec)
    with working(prec):
        jet = theta_point(table, N, nu, f0p, tau, 0, prec)
        g = table.gbar
        window = int(mp.ceil(jet.radius)) + 2 if window is None else int(window)
        N = mp.mpf(N)
        terms = [t for p in range(p_max + 1) for t in enumerate_stable_terms(p)]
        acc = []
        for off in itertools.product(range(-window, window + 1), repeat=g):
            n = [jet.center[i] + off[i] for i in range(g)]
            x = [n[i] + jet.a[i] for i in range(g)]
            expo = mp.fsum(x[i] * jet.u[i] for i in range(g))
            expo += mp.fsum(x[i] * jet.t[i, j] * x[j] for i in range(g) for j in range(g))
            expo += 2j * mp.pi * mp.fsum(n[i] * jet.b[i] for i in range(g))
            poly = []
            for term in terms:
                v = mp.mpf(term.weight.numerator) / term.weight.denominator / N ** term.order
                for h, l in term.parts:
                    v *= _apply(table.get(h, l), x)
                poly.append(v)
            acc.append(mp.exp(expo) * mp.fsum(poly))
        return mp.fsum(acc), window


def _apply(tensor, x):
    """``T . x^rank`` for a symmetric tensor."""
    total = []
    for idx, v in tensor.full_items():
        for i in idx:
            v *= x[i]
        total.append(v)
    return mp.fsum(total)


def scalar_first_order(table, jet):
    """``F1' Theta' + F0''' Theta''' / 6`` for gbar = 1."""
    if table.gbar != 1:
        raise ConfigError("scalar formula needs gbar = 1")
    return table.scalar(1, 1) * jet.scalar(1) + table.scalar(0, 3) * jet.scalar(3) / 6
