"""Symmetric tensors over C^g stored by sorted index tuples."""
import itertools
from collections import Counter
from fractions import Fraction
from math import factorial

import mpmath as mp

from .errors import AsymmetricTensor


def sorted_indices(dim, rank):
    """Canonical (non-decreasing) index tuples, in lexicographic order."""
    return list(itertools.combinations_with_replacement(range(dim), rank))


def multiplicity(key):
    """Number of distinct orderings of a sorted index tuple."""
    out = factorial(len(key))
    for c in Counter(key).values():
        out //= factorial(c)
    return out


class SymTensor:
    """Symmetric rank-``rank`` tensor over ``C^dim`` (packed storage)."""

    def __init__(self, dim, rank, data=None):
        self.dim = int(dim)
        self.rank = int(rank)
        self.data = {k: mp.mpc(0) for k in sorted_indices(self.dim, self.rank)}
        if data:
            for k, v in data.items():
                # Fractions stay exact for the rational pairing checks
                self.data[tuple(sorted(k))] = v if isinstance(v, Fraction) else mp.mpc(v)

    @classmethod
    def scalar(cls, value, rank):
        return cls(1, rank, {(0,) * rank: value})

    @classmethod
    def from_full(cls, dim, rank, getter, tol=None):
        """Build from a function on all index tuples, checking symmetry."""
        out = cls(dim, rank)
        groups = {}
        for idx in itertools.product(range(dim), repeat=rank):
            groups.setdefault(tuple(sorted(idx)), []).append(mp.mpc(getter(idx)))
        scale = max([abs(v) for vals in groups.values() for v in vals] + [mp.mpf(0)])
        tol = mp.mpf(2) ** (-mp.mp.prec // 2) if tol is None else tol
        for key, vals in groups.items():
            if max(abs(v - vals[0]) for v in vals) > tol * max(scale, 1):
                raise AsymmetricTensor(f"entries for index class {key} differ")
            out.data[key] = mp.fsum(vals) / len(vals)
        return out

    def __getitem__(self, idx):
        return self.data[tuple(sorted(idx))]

    def __setitem__(self, idx, value):
        self.data[tuple(sorted(idx))] = mp.mpc(value)

    def full_items(self):
        for idx in itertools.product(range(self.dim), repeat=self.rank):
            yield idx, self.data[tuple(sorted(idx))]

    def scale(self, c):
        return SymTensor(self.dim, self.rank, {k: c * v for k, v in self.data.items()})

    def max_abs(self):
        return max([abs(v) for v in self.data.values()] + [mp.mpf(0)])

    def to_json(self):
        return {",".join(map(str, k)): [mp.nstr(mp.re(v), 40), mp.nstr(mp.im(v), 40)]
                for k, v in self.data.items()}

    @classmethod
    def from_json(cls, dim, rank, raw):
        data = {}
        for key, (re, im) in raw.items():
            idx = tuple(int(t) for t in key.split(",")) if key else ()
            data[idx] = mp.mpc(mp.mpf(re), mp.mpf(im))
        return cls(dim, rank, data)

    def __repr__(self):
        return f"SymTensor(dim={self.dim}, rank={self.rank}, {self.data})"


def contract(factors, target):
    """Full contraction of ``factors[0] x factors[1] x ...`` with ``target``.

    ``target`` has rank equal to the sum of factor ranks.  The sum runs over
    all ``dim**rank`` index tuples, which is cheap for the small genus used
    here.
    """
    ranks = [f.rank for f in factors]
    total_rank = sum(ranks)
    if total_rank != target.rank:
        raise ValueError("rank mismatch in contraction")
    dim = target.dim
    acc = []
    for idx in itertools.product(range(dim), repeat=total_rank):
        prod = target[idx]
        if prod == 0:
            continue
        pos = 0
        for f, r in zip(factors, ranks):
            prod *= f[idx[pos:pos + r]]
            pos += r
        acc.append(prod)
    return mp.fsum(acc)
