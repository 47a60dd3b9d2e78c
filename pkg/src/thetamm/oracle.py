"""Determinantal evaluation of convergent matrix integrals.

By the Andreief identity,

    (1/n!) int_{gamma^n} Delta(x)^2 prod w(x_i) dx_i = det[ m_{j+k} ]_{j,k<n},

with ``m_k`` the moments of ``w`` along ``gamma``.  For a generalized path
``sum c_i gamma_i`` the Hankel matrix is ``sum c_i M_i``; its determinant
is a homogeneous polynomial of degree n in the ``c_i`` whose coefficients
are the fixed-filling integrals.  These are read off by a discrete Fourier
transform over roots of unity after setting one coefficient to 1.
"""
import itertools
from dataclasses import dataclass

import gmpy2
import mpmath as mp

from . import _gmp
from .contour import basis_moments, default_basis
from .errors import ConfigError, DeterminantUnderflow, ExtractionAliasing
from .precision import resolve, working

DEFAULT_N_CAP = 64


def guard_bits(n):
    """Extra bits carried through moments and eliminations for size n.

    Measured loss on quartic Hankel determinants is about 3 bits per row.
    """
    return 32 + 3 * int(n)


@dataclass(frozen=True)
class FillingCounts:
    """Eigenvalue counts ``n_i`` per basis path id, with the scale ``N``."""

    counts: tuple
    N: object = None

    def __post_init__(self):
        raw = dict(self.counts)
        if any(int(v) != v or v < 0 for v in raw.values()):
            raise ConfigError("filling counts must be nonnegative integers")
        object.__setattr__(self, "counts", tuple(sorted((int(i), int(v)) for i, v in raw.items())))

    @classmethod
    def of(cls, counts, N=None):
        """``counts`` is a mapping id -> n_i, or a sequence indexed from id 1."""
        if isinstance(counts, dict):
            return cls(tuple(counts.items()), N)
        return cls(tuple(enumerate(counts, start=1)), N)

    @property
    def n(self):
        return sum(v for _, v in self.counts)

    def as_dict(self):
        return dict(self.counts)

    @property
    def fractions(self):
        N = self.n if self.N is None else mp.mpf(self.N)
        return {i: mp.mpf(v) / N for i, v in self.counts}


def hankel(moments, n, shift=0):
    """n x n Hankel matrix ``[m_{j+k+shift}]``."""
    if len(moments) < 2 * n - 1 + shift:
        raise ConfigError(f"need {2 * n - 1 + shift} moments, got {len(moments)}")
    return mp.matrix([[moments[j + k + shift] for k in range(n)] for j in range(n)])


def log_det(A, prec=None):
    """``(det, log|det|)`` by LU with full pivoting.

    Elimination runs on MPFR/MPC numbers at ``prec`` bits.  A pivot that is
    zero, or below the rounding floor of the largest entry, raises
    :class:`DeterminantUnderflow` carrying the partial log-modulus.
    """
    prec = resolve(prec)
    n = A.rows
    if n == 0:
        return mp.mpc(1), mp.mpf(0)
    with _gmp.context(prec):
        a = [[_gmp.to_gmp(A[i, j]) for j in range(n)] for i in range(n)]
        biggest = max(abs(v) for row in a for v in row)
        floor = biggest * gmpy2.mpfr(2) ** (16 - prec)
        det = gmpy2.mpc(1)
        log_abs = gmpy2.mpfr(0)
        for col in range(n):
            best, bi, bj = gmpy2.mpfr(-1), col, col
            for i in range(col, n):
                row = a[i]
                for j in range(col, n):
                    v = abs(row[j])
                    if v > best:
                        best, bi, bj = v, i, j
            if best == 0 or best < floor:
                raise DeterminantUnderflow(
                    f"pivot {col} of {n} is at the rounding floor",
                    log_abs=_gmp.real_to_mp(log_abs))
            if bi != col:
                a[bi], a[col] = a[col], a[bi]
                det = -det
            if bj != col:
                for row in a:
                    row[bj], row[col] = row[col], row[bj]
                det = -det
            pivot = a[col][col]
            det *= pivot
            log_abs += gmpy2.log(best)
            inv = 1 / pivot
            prow = a[col]
            for i in range(col + 1, n):
                row = a[i]
                f = row[col] * inv
                if f == 0:
                    continue
                for j in range(col + 1, n):
                    row[j] -= f * prow[j]
        return _gmp.to_mp(det), _gmp.real_to_mp(log_abs)


def det(A, prec=None):
    return log_det(A, prec)[0]


class Oracle:
    """Moment cache and determinant evaluator for one (V, basis, N) triple.

    ``prec`` is the target precision; moments and eliminations carry
    :func:`guard_bits` extra bits for the largest ``n`` requested.
    """

    def __init__(self, pot, N, basis=None, prec=None, guard=None, n_cap=DEFAULT_N_CAP):
        self.pot = pot
        self.basis = default_basis(pot) if basis is None else dict(basis)
        self.prec = resolve(prec)
        with working(self.prec):
            self.N = mp.mpf(N)
        self.guard = guard
        self.n_cap = n_cap

    def working_prec(self, n):
        g = guard_bits(n) if self.guard is None else int(self.guard)
        return self.prec + g

    def _check_n(self, n):
        if n < 0:
            raise ConfigError("n must be nonnegative")
        if n > self.n_cap:
            raise ConfigError(f"n = {n} exceeds the configured cap {self.n_cap}")

    def moments(self, basis_id, kmax, n):
        if basis_id not in self.basis:
            raise ConfigError(f"unknown basis path id {basis_id}")
        wp = self.working_prec(n)
        m, _ = basis_moments(self.basis[basis_id], self.pot, self.N, kmax, prec=wp)
        return m

    def matrix(self, coeffs, n, kmax=None):
        """Hankel matrix of ``sum c_i M_i``; ``coeffs`` maps id -> c_i."""
        kmax = 2 * n - 2 if kmax is None else kmax
        wp = self.working_prec(n)
        with mp.workprec(wp):
            total = [mp.mpc(0)] * (kmax + 1)
            for i, c in sorted(coeffs.items()):
                if c == 0:
                    continue
                m = self.moments(i, kmax, n)
                total = [a + c * b for a, b in zip(total, m)]
        return total

    def determinant(self, coeffs, n):
        self._check_n(n)
        if n == 0:
            return mp.mpc(1)
        wp = self.working_prec(n)
        with mp.workprec(wp):
            A = hankel(self.matrix(coeffs, n), n)
            value, _ = log_det(A, wp)
        return value

    def full(self, path, n):
        """``Zhat(gamma)`` for a :class:`GeneralizedPath`."""
        coeffs = {i: c for c, i in path.terms}
        with working(self.prec):
            return +self.determinant(coeffs, n)

    def extract(self, fn, ids, n, grid=None, radius=None):
        """Coefficients of a degree-n homogeneous polynomial ``fn(c)``.

        ``fn`` takes a mapping id -> c.  Returns a dict from count tuples
        (ordered like ``ids``) to coefficients.  The last id is pinned to 1
        and the others run over ``grid``-th roots of unity (times ``radius``).
        """
        ids = list(ids)
        grid = n + 1 if grid is None else int(grid)
        if grid < n + 1:
            raise ExtractionAliasing(f"DFT grid {grid} < n + 1 = {n + 1} aliases coefficients")
        if len(ids) == 1:
            return {(n,): fn({ids[0]: mp.mpc(1)})}
        free = len(ids) - 1
        radius = [mp.mpf(1)] * free if radius is None else [mp.mpf(r) for r in radius]
        wp = self.working_prec(n)
        with mp.workprec(wp):
            roots = [mp.expjpi(mp.mpf(2 * q) / grid) for q in range(grid)]
            values = {}
            for qs in itertools.product(range(grid), repeat=free):
                c = {ids[a]: radius[a] * roots[q] for a, q in enumerate(qs)}
                c[ids[-1]] = mp.mpc(1)
                values[qs] = fn(c)
            out = {}
            for ks in itertools.product(range(n + 1), repeat=free):
                if sum(ks) > n:
                    continue
                acc = mp.mpc(0)
                for qs, v in values.items():
                    acc += v * roots[(-sum(k * q for k, q in zip(ks, qs))) % grid]
                scale = mp.fprod(r ** k for r, k in zip(radius, ks))
                out[tuple(ks) + (n - sum(ks),)] = acc / (grid ** free * scale)
        return out

    def mean_count(self, ids, n, t, step=mp.mpf(1) / 4):
        """Average count on ``ids[0]`` in ``det(e^t M_0 + M_1)``.

        This is ``d log|D| / dt`` by a central difference of width
        ``2 * step``; accuracy of a fraction of one eigenvalue is enough to
        balance the DFT radius.
        """
        wp = self.working_prec(n)
        with mp.workprec(wp):
            def logabs(x):
                A = hankel(self.matrix({ids[0]: mp.exp(x), ids[1]: mp.mpc(1)}, n), n)
                return log_det(A, wp)[1]
            return (logabs(t + step) - logabs(t - step)) / (2 * step)

    def balanced_radius(self, ids, n, target, tol=mp.mpf(1) / 4, max_iter=60):
        """Radius ``r`` on ``ids[0]`` making the count ``target`` dominant.

        On the circle ``|c_0| = r`` the coefficients of ``det(c_0 M_0 + M_1)``
        are weighted by ``r^k``; choosing ``r`` so that the mean count equals
        ``target`` puts the requested coefficient near the top of the
        spectrum, where the DFT loses no relative accuracy.
        """
        if len(ids) != 2:
            raise ConfigError("balanced radius needs exactly two basis ids")
        target = mp.mpf(target)
        if not 0 < target < n:
            return mp.mpf(1)
        g = lambda t: self.mean_count(ids, n, t) - target
        lo, hi, width = mp.mpf(-1), mp.mpf(1), mp.mpf(1)
        glo, ghi = g(lo), g(hi)
        while glo > 0 or ghi < 0:
            width *= 2
            if width > 1e6:
                raise ConfigError("could not bracket the balanced radius")
            if glo > 0:
                lo, glo = -width, g(-width)
            if ghi < 0:
                hi, ghi = width, g(width)
        for _ in range(max_iter):
            # regula falsi with bisection fallback
            mid = (lo * ghi - hi * glo) / (ghi - glo)
            if not lo < mid < hi or (hi - lo) > 4:
                mid = (lo + hi) / 2
            gm = g(mid)
            if abs(gm) < tol:
                return mp.exp(mid)
            if gm < 0:
                lo, glo = mid, gm
            else:
                hi, ghi = mid, gm
        return mp.exp((lo + hi) / 2)

    def fixed_filling_table(self, ids, n, grid=None, radius=None):
        """All ``Z(n_1/N, ...)`` with ``sum n_i = n`` over the given basis ids."""
        self._check_n(n)
        table = self.extract(lambda c: self.determinant(c, n), ids, n, grid, radius)
        with working(self.prec):
            return {k: +v for k, v in table.items()}

    def fixed_filling(self, counts, grid=None, radius=None):
        """``Z(n_1/N, ..., n_d/N)`` for :class:`FillingCounts`.

        ``radius="auto"`` balances the DFT circle on the requested counts
        (two active ids only), which keeps coefficients far from the
        dominant filling accurate.
        """
        active = [(i, v) for i, v in counts.counts if v > 0]
        n = counts.n
        self._check_n(n)
        if not active:
            return mp.mpc(1)
        for i, _ in active:
            if i not in self.basis:
                raise ConfigError(f"unknown basis path id {i}")
        ids = [i for i, _ in active]
        key = tuple(v for _, v in active)
        if radius == "auto":
            radius = [self.balanced_radius(ids, n, key[0])] if len(ids) == 2 else None
        table = self.extract(lambda c: self.determinant(c, n), ids, n, grid, radius)
        with working(self.prec):
            return +table[key]

    # ------------------------------------------------------------------
    # loop equations

    def virasoro_terms(self, k, coeffs, n):
        """Individual contributions to ``V_k . Z``, followed by ``N n Z``.

        The last entry is not part of the constraint; it is the natural
        magnitude used to normalize residuals whose terms all vanish by
        symmetry.

        Integration by parts of ``d/dx_i (x_i^{k+1} ...)`` gives

            < sum_{a=0}^k p_a p_{k-a} > - N sum_j j t_j < p_{k+j} > = 0,

        with ``p_m = sum_i x_i^m`` and ``p_0 = n``.  Each expectation is
        multiplied by Z and obtained from exact derivatives of the Hankel
        determinant with inserted weights.
        """
        if k < -1:
            raise ConfigError("Virasoro index must be >= -1")
        self._check_n(n)
        pot = self.pot
        kmax = 2 * n - 2 + max(k + pot.d + 1, k, 0)
        wp = self.working_prec(n)
        with mp.workprec(wp):
            m = self.matrix(coeffs, n, kmax)
            A = hankel(m, n)
            det_a, _ = log_det(A, wp)
            inv = A ** -1 if n else None

            def ins(shift):
                return hankel(m, n, shift)

            def single(a):
                # < p_a > Z
                if a == 0:
                    return n * det_a
                if n == 0:
                    return mp.mpc(0)
                return det_a * _trace_product(inv, ins(a))

            def double(a, b):
                # < p_a p_b > Z
                if a == 0:
                    return n * single(b)
                if b == 0:
                    return n * single(a)
                B, C, D = ins(a), ins(b), ins(a + b)
                ib, ic = inv * B, inv * C
                tr_d = _trace_product(inv, D)
                tr_bc = sum(ib[i, j] * ic[j, i] for i in range(n) for j in range(n))
                return det_a * (tr_d + _trace(ib) * _trace(ic) - tr_bc)

            terms = [double(a, k - a) for a in range(0, k + 1)] if n else []
            for j, t in enumerate(pot.coeffs, start=1):
                if t != 0 and k + j >= 0:
                    terms.append(-self.N * j * t * single(k + j))
            terms.append(self.N * n * det_a)
        return terms

    def virasoro(self, k, coeffs, n):
        """``(normalized residual, raw residual, largest term)``."""
        *terms, ref = self.virasoro_terms(k, coeffs, n)
        return self._normalize(terms, ref, n)

    def _normalize(self, terms, ref, n):
        with mp.workprec(self.working_prec(n)):
            total = mp.fsum(terms)
            big = max([abs(t) for t in terms] + [abs(ref)])
            norm = total / big if big else mp.mpc(0)
        with working(self.prec):
            return +norm, +total, +big

    def virasoro_fixed_filling(self, k, counts, grid=None):
        """Normalized Virasoro residual of one fixed-filling piece."""
        active = [(i, v) for i, v in counts.counts if v > 0]
        n = counts.n
        if not active:
            return mp.mpc(0)
        ids = [i for i, _ in active]
        key = tuple(v for _, v in active)
        size = len(self.virasoro_terms(k, {ids[-1]: mp.mpc(1)}, n))
        pieces = []
        for t in range(size):
            table = self.extract(lambda c: self.virasoro_terms(k, c, n)[t], ids, n, grid)
            pieces.append(table[key])
        return self._normalize(pieces[:-1], pieces[-1], n)[0]


def _trace(A):
    return mp.fsum(A[i, i] for i in range(A.rows))


def _trace_product(A, B):
    n = A.rows
    return mp.fsum(A[i, j] * B[j, i] for i in range(n) for j in range(n))


# ----------------------------------------------------------------------
# functional interface

def partition_full(path, n, pot, N, basis=None, prec=None, guard=None):
    """``Zhat(gamma) = (1/n!) int_{gamma^n} Delta^2 prod e^{-N V(x_i)} dx_i``."""
    return Oracle(pot, N, basis, prec, guard).full(path, n)


def partition_fixed_filling(counts, pot, N, basis=None, prec=None, guard=None, grid=None,
                            radius=None):
    """Fixed-filling integral ``Z(n_1/N, ..., n_d/N)``."""
    if not isinstance(counts, FillingCounts):
        counts = FillingCounts.of(counts, N)
    return Oracle(pot, N, basis, prec, guard).fixed_filling(counts, grid, radius)


def virasoro_residual(k, path, n, pot, N, basis=None, prec=None, guard=None):
    """Normalized residual of ``V_k . Zhat(gamma) = 0``."""
    coeffs = {i: c for c, i in path.terms}
    return Oracle(pot, N, basis, prec, guard).virasoro(k, coeffs, n)[0]
