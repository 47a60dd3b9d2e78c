"""Potentials, integration contours and high-precision moment integrals.

A potential is ``V(x) = sum_j t_j x^j`` for ``j = 1..d+1``.  Integration
contours are chains of straight legs (finite segments or rays to infinity);
basis paths are combined linearly into generalized paths.  Moments

    int_gamma x^k p(x) exp(-N V(x)) dx

are computed leg by leg: Gauss-Legendre panels on finite legs and an
exp-sinh (double-exponential) trapezoidal rule on infinite rays.  All
moments ``k = 0..kmax`` share the same nodes.
"""
from dataclasses import dataclass
import gmpy2
import mpmath as mp
from mpmath.calculus.quadrature import GaussLegendre

from . import _gmp
from .errors import ConfigError, DivergentPath, QuadratureNotConverged
from .precision import resolve, to_mpc, tolerance, working


@dataclass(frozen=True)
class Potential:
    """Polynomial potential with coefficients ``(t_1, ..., t_{d+1})``."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(to_mpc(c) for c in self.coeffs)
        if len(coeffs) < 2:
            raise ConfigError("potential needs degree >= 2 (d >= 1)")
        if coeffs[-1] == 0:
            raise ConfigError("leading coefficient t_{d+1} must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_config(cls, raw):
        return cls(tuple(to_mpc(c) for c in raw))

    @property
    def d(self):
        return len(self.coeffs) - 1

    @property
    def leading(self):
        return self.coeffs[-1]

    def __call__(self, x):
        acc = mp.mpc(0)
        for c in reversed(self.coeffs):
            acc = (acc + c) * x
        return acc

    def deriv_coeffs(self):
        """Ascending coefficients of V'(x)."""
        return [j * c for j, c in enumerate(self.coeffs, start=1)]

    def deriv(self, x):
        return mp.polyval(self.deriv_coeffs()[::-1], x)

    @property
    def is_real(self):
        return all(mp.im(c) == 0 for c in self.coeffs)

    @property
    def is_even(self):
        return all(c == 0 for j, c in enumerate(self.coeffs, start=1) if j % 2)

    def to_config(self):
        return [[mp.nstr(mp.re(c), 30), mp.nstr(mp.im(c), 30)] for c in self.coeffs]


@dataclass(frozen=True)
class Sector:
    """Open angular sector ``|arg x - center| < half_width`` at infinity."""

    center: object
    half_width: object

    @property
    def width(self):
        return 2 * self.half_width

    def contains(self, angle, margin=0):
        delta = mp.fmod(mp.mpf(angle) - self.center + 3 * mp.pi, 2 * mp.pi) - mp.pi
        return abs(delta) < self.half_width - margin


def convergence_sectors(pot):
    """The d+1 sectors where Re V -> +inf, sorted by center in [0, 2pi)."""
    k = pot.d + 1
    phase = mp.arg(pot.leading)
    half = mp.pi / (2 * k)
    centers = [mp.fmod((-phase + 2 * mp.pi * j) / k + 4 * mp.pi, 2 * mp.pi) for j in range(k)]
    return [Sector(c, half) for c in sorted(centers)]


def independent_path_count(pot):
    return pot.d


@dataclass(frozen=True)
class Leg:
    """Straight piece ``origin + r e^{i angle}``, ``0 <= r <= length``.

    ``length=None`` is a ray to infinity.  ``reverse`` traverses the leg
    towards ``origin``.
    """

    origin: object
    angle: object
    length: object = None
    reverse: bool = False

    def __post_init__(self):
        object.__setattr__(self, "origin", to_mpc(self.origin))
        object.__setattr__(self, "angle", mp.mpf(self.angle))
        if self.length is not None:
            object.__setattr__(self, "length", mp.mpf(self.length))

    @property
    def infinite(self):
        return self.length is None

    @property
    def direction(self):
        return mp.expj(self.angle)

    @property
    def far_end(self):
        return None if self.infinite else self.origin + self.length * self.direction

    @property
    def start(self):
        return self.far_end if self.reverse else self.origin

    @property
    def end(self):
        return self.origin if self.reverse else self.far_end


@dataclass(frozen=True)
class BasisPath:
    id: int
    legs: tuple

    def __post_init__(self):
        legs = tuple(self.legs)
        object.__setattr__(self, "legs", legs)
        for a, b in zip(legs, legs[1:]):
            if a.end is None or b.start is None or abs(a.end - b.start) > mp.mpf(10) ** (-20):
                raise ConfigError(f"basis path {self.id}: legs are not connected")

    @classmethod
    def two_rays(cls, id, angle_in, angle_out, vertex=0):
        """Path from infinity at ``angle_in`` through ``vertex`` out to ``angle_out``."""
        return cls(id, (Leg(vertex, angle_in, None, True), Leg(vertex, angle_out, None, False)))

    def reversed(self):
        legs = tuple(Leg(l.origin, l.angle, l.length, not l.reverse) for l in reversed(self.legs))
        return BasisPath(self.id, legs)

    def check_convergent(self, pot):
        sectors = convergence_sectors(pot)
        for leg in self.legs:
            if leg.infinite and not any(s.contains(leg.angle) for s in sectors):
                raise DivergentPath(
                    f"basis path {self.id}: ray at angle {mp.nstr(leg.angle, 8)} "
                    "is outside every convergence sector")


def default_basis(pot):
    """Chain basis through the origin along sector bisectors.

    With sectors S_0..S_d sorted by angle, gamma_i runs from S_{d+1-i} to
    S_{d-i}.  For V = x^4 this gives gamma_2 + gamma_3 = R.
    """
    sectors = convergence_sectors(pot)
    d = pot.d
    return {i: BasisPath.two_rays(i, sectors[d + 1 - i].center, sectors[d - i].center)
            for i in range(1, d + 1)}


@dataclass(frozen=True)
class GeneralizedPath:
    """Formal combination ``sum c_i gamma_i``; terms are ``(c_i, basis_id)``."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((to_mpc(c), int(i)) for c, i in self.terms)
        if not any(c != 0 for c, _ in terms):
            raise ConfigError("generalized path needs at least one nonzero coefficient")
        ids = [i for _, i in terms]
        if len(set(ids)) != len(ids):
            raise ConfigError("basis ids must be distinct")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_coefficients(cls, coeffs):
        """``{basis_id: c}`` or a list indexed from basis id 1."""
        if isinstance(coeffs, dict):
            return cls(tuple((c, i) for i, c in coeffs.items()))
        return cls(tuple((c, i) for i, c in enumerate(coeffs, start=1)))

    @property
    def nonzero(self):
        return [(c, i) for c, i in self.terms if c != 0]

    @property
    def gbar(self):
        return len(self.nonzero) - 1

    @property
    def ids(self):
        return [i for _, i in self.terms]

    @property
    def characteristics(self):
        """``nu_i`` with ``c_i = exp(2 i pi nu_i)``, principal branch."""
        return {i: mp.log(c) / (2j * mp.pi) for c, i in self.nonzero}

    @property
    def is_genuine(self):
        return all(c in (1, -1) for c, _ in self.nonzero)

    def normalized(self):
        """Return ``(scale, path)`` with nonzero terms first and last one equal to 1.

        The original path equals ``scale * path``.
        """
        nz = self.nonzero
        scale = nz[-1][0]
        zeros = [(c, i) for c, i in self.terms if c == 0]
        return scale, GeneralizedPath(tuple((c / scale, i) for c, i in nz) + tuple(zeros))

    def coefficient(self, basis_id):
        for c, i in self.terms:
            if i == basis_id:
                return c
        return mp.mpc(0)


# --------------------------------------------------------------------------
# quadrature
#
# Node generation and moment accumulation run on gmpy2 numbers at the
# working precision; results are handed back as mpmath values.

def _horner(coeffs, x):
    acc = gmpy2.mpc(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _weight_function(pot, N, prefactor):
    vc = [gmpy2.mpc(0)] + [_gmp.to_gmp(c) for c in pot.coeffs]
    pc = None if prefactor is None else [_gmp.to_gmp(c) for c in prefactor]
    minus_n = -_gmp.to_gmp(N)

    def w(x):
        val = gmpy2.exp(minus_n * _horner(vc, x))
        if pc is not None:
            val *= _horner(pc, x)
        return val
    return w


def _accumulate(sums, nodes, kmax):
    for x, w in nodes:
        p = w
        for k in range(kmax + 1):
            sums[k] += p
            p *= x


def _abs_sums(nodes, kmax):
    out = [gmpy2.mpfr(0)] * (kmax + 1)
    for x, w in nodes:
        ap, ax = abs(w), abs(x)
        for k in range(kmax + 1):
            out[k] += ap
            ap *= ax
    return out


def _safe_radius(leg, pot, N, kmax):
    """Radius beyond which every x^k e^{-NV} (k <= kmax) is past its peak."""
    roots = mp.polyroots(pot.deriv_coeffs()[::-1], maxsteps=200, extraprec=64) if pot.d > 1 else [
        -pot.coeffs[0] / (2 * pot.coeffs[1])]
    rho = max([abs(r) for r in roots] + [mp.mpf(0)])
    lead = pot.leading * mp.expj((pot.d + 1) * leg.angle)
    damping = max(mp.re(lead), abs(lead) * mp.mpf(10) ** -6)
    peak = (mp.mpf(kmax + 1) / (N * damping * (pot.d + 1))) ** (mp.mpf(1) / (pot.d + 1))
    return 2 * (abs(leg.origin) + 1 + rho + peak)


def _converged(cur, prev, older, scale, tol):
    """Error estimates for a doubly-exponential rule, or None if not converged.

    Each halving of the step roughly doubles the correct digits, so the
    error of ``cur`` is about ``|cur - prev|**2 / |prev - older|``.
    """
    errs = []
    for a, b, c, s in zip(cur, prev, older, scale):
        d1, d0 = abs(a - b), abs(b - c)
        est = d1 if d0 == 0 else min(d1, d1 * d1 / d0)
        if est > tol * s:
            return None
        errs.append(max(est, s * tol / 1024))
    return errs


def _ray_moments(leg, pot, N, kmax, prefactor, prec, tol, max_level=12):
    with _gmp.context(prec):
        w = _weight_function(pot, N, prefactor)
        origin, direction = _gmp.to_gmp(leg.origin), _gmp.to_gmp(leg.direction)
        half_pi = gmpy2.const_pi() / 2
        gtol = _gmp.to_gmp(tol).real

        def node(t):
            r = gmpy2.exp(half_pi * gmpy2.sinh(t))
            x = origin + direction * r
            return x, w(x) * direction * (r * half_pi * gmpy2.cosh(t)), r

        def log_magnitude(x, wt):
            if wt == 0:
                return None
            return gmpy2.log(abs(wt)) + kmax * max(gmpy2.mpfr(0), gmpy2.log(abs(x)))

        log_eps = gmpy2.log(gtol) - 10
        r_safe = _gmp.to_gmp(_safe_radius(leg, pot, N, kmax)).real
        r_tiny = gmpy2.mpfr(2) ** -30
        h0 = gmpy2.mpfr(1) / 8
        found = {0: node(gmpy2.mpfr(0))}
        biggest = log_magnitude(*found[0][:2])
        bounds = {}
        for step in (1, -1):
            j, quiet = 0, 0
            while True:
                j += step
                x, wt, r = node(j * h0)
                found[j] = (x, wt)
                lm = log_magnitude(x, wt)
                if lm is not None and (biggest is None or lm > biggest):
                    biggest = lm
                small = lm is None or (biggest is not None and lm < biggest + log_eps)
                quiet = quiet + 1 if small else 0
                far_enough = r > r_safe if step > 0 else r < r_tiny
                if quiet >= 4 and far_enough:
                    break
                if abs(j) > 4000:
                    raise QuadratureNotConverged("ray quadrature range did not close")
            bounds[step] = j
        lo, hi = bounds[-1], bounds[1]
        nodes = [found[j][:2] for j in range(lo, hi + 1)]
        raw = [gmpy2.mpc(0)] * (kmax + 1)
        _accumulate(raw, nodes, kmax)
        scale = [a * h0 for a in _abs_sums(nodes, kmax)]
        history = [[s * h0 for s in raw]]
        for level in range(1, max_level + 1):
            h = h0 / 2 ** level
            fresh = [node(j * h)[:2] for j in range(lo * 2 ** level + 1, hi * 2 ** level, 2)]
            _accumulate(raw, fresh, kmax)
            history.append([s * h for s in raw])
            if level >= 3:
                errs = _converged(history[-1], history[-2], history[-3], scale, gtol)
                if errs is not None:
                    return [_gmp.to_mp(v) for v in history[-1]], [_gmp.real_to_mp(e) for e in errs]
        worst = max(abs(a - b) / s for a, b, s in zip(history[-1], history[-2], scale) if s > 0)
    raise QuadratureNotConverged(
        f"exp-sinh rule not converged after {max_level} levels "
        f"(relative change {mp.nstr(_gmp.real_to_mp(worst), 3)})")


def _segment_moments(leg, pot, N, kmax, prefactor, prec, tol, max_degree=10):
    panels = max(1, int(mp.ceil(leg.length * mp.sqrt(max(N, 1)))))
    rule = GaussLegendre(mp.mp)
    with _gmp.context(prec):
        w = _weight_function(pot, N, prefactor)
        origin, direction = _gmp.to_gmp(leg.origin), _gmp.to_gmp(leg.direction)
        width = _gmp.to_gmp(leg.length).real / panels
        gtol = _gmp.to_gmp(tol).real
        history = []
        for degree in range(2, max_degree + 1):
            with mp.workprec(prec):
                base = [(_gmp.to_gmp(s).real, _gmp.to_gmp(ws).real)
                        for s, ws in rule.calc_nodes(degree, prec)]
            nodes = []
            for p in range(panels):
                mid = (p + gmpy2.mpfr(1) / 2) * width
                for s, ws in base:
                    x = origin + direction * (mid + s * width / 2)
                    nodes.append((x, w(x) * direction * (ws * width / 2)))
            cur = [gmpy2.mpc(0)] * (kmax + 1)
            _accumulate(cur, nodes, kmax)
            history.append(cur)
            if len(history) >= 3:
                scale = _abs_sums(nodes, kmax)
                errs = _converged(history[-1], history[-2], history[-3], scale, gtol)
                if errs is not None:
                    return [_gmp.to_mp(v) for v in cur], [_gmp.real_to_mp(e) for e in errs]
    raise QuadratureNotConverged("Gauss-Legendre panels did not converge")


_LEG_CACHE = {}
_LEG_CACHE_SIZE = 256


def _leg_moments(leg, pot, N, kmax, prefactor, prec, tol):
    """Moments of one leg traversed away from its origin, cached across kmax."""
    key = (leg.origin, leg.angle, leg.length, pot, N, prefactor, prec, tol)
    hit = _LEG_CACHE.get(key)
    if hit is not None and len(hit[0]) > kmax:
        return hit[0][:kmax + 1], hit[1][:kmax + 1]
    fn = _ray_moments if leg.infinite else _segment_moments
    m, e = fn(leg, pot, N, kmax, prefactor, prec, tol)
    if len(_LEG_CACHE) >= _LEG_CACHE_SIZE:
        _LEG_CACHE.pop(next(iter(_LEG_CACHE)))
    _LEG_CACHE[key] = (m, e)
    return m, e


def clear_cache():
    _LEG_CACHE.clear()


def basis_moments(path, pot, N, kmax, prefactor=None, prec=None, tol=None):
    """Moments ``k = 0..kmax`` along one basis path, with error estimates."""
    prec = resolve(prec)
    with working(prec):
        N = mp.mpf(N)
        tol = tolerance(prec) if tol is None else mp.mpf(tol)
        pre = None if prefactor is None else tuple(to_mpc(c) for c in prefactor)
        path.check_convergent(pot)
        total = [mp.mpc(0)] * (kmax + 1)
        errs = [mp.mpf(0)] * (kmax + 1)
        for leg in path.legs:
            m, e = _leg_moments(leg, pot, N, int(kmax), pre, prec, tol)
            sign = -1 if leg.reverse else 1
            total = [a + sign * b for a, b in zip(total, m)]
            errs = [a + b for a, b in zip(errs, e)]
    return total, errs


def moment_integral(path, basis, pot, N, k, prefactor=None, prec=None, tol=None,
                    with_error=False):
    """``int_gamma x^k p(x) exp(-N V(x)) dx`` over a generalized path.

    ``basis`` maps basis ids to :class:`BasisPath`.  The result is the
    linear combination of per-basis moments with the path coefficients.
    """
    value = mp.mpc(0)
    err = mp.mpf(0)
    with working(prec):
        for c, i in path.terms:
            if c == 0:
                continue
            if i not in basis:
                raise ConfigError(f"unknown basis path id {i}")
            m, e = basis_moments(basis[i], pot, N, k, prefactor, prec, tol)
            value += c * m[k]
            err += abs(c) * e[k]
    return (value, err) if with_error else value
