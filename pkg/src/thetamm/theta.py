"""Theta functions with characteristics and their u-derivative tensors.

The basic object is the lattice sum

    Theta(u, t) = sum_{n in Z^g} exp((n + a).u + (n + a).t.(n + a) + 2 i pi n.b)

with ``a`` real (``-N eps*`` in the matrix-model application) and ``b`` the
path characteristic.  It converges when ``Re t`` is negative definite.  The
Jacobi form ``theta_{a,b}(u, tau)`` is the same sum with ``u -> 2 i pi (u + b)``
and ``t -> i pi tau``.

Sums are centered at the lattice point nearest to the maximizer of the
summand modulus and truncated at a Euclidean radius ``R`` around it; the
neglected tail is bounded by a radial Gaussian integral using the smallest
eigenvalue of ``-Re t``.
"""
import itertools
from dataclasses import dataclass, field

import mpmath as mp

from .errors import IndefiniteQuadraticForm, RadiusOverflow
from .precision import resolve, working
from .tensors import SymTensor, sorted_indices

DEFAULT_M_MAX = 6
DEFAULT_MAX_RADIUS = 400


def _as_vector(u):
    if isinstance(u, mp.matrix):
        return [mp.mpc(u[i]) for i in range(u.rows)]
    if isinstance(u, (list, tuple)):
        return [mp.mpc(v) for v in u]
    return [mp.mpc(u)]


def _as_matrix(t, g):
    if isinstance(t, mp.matrix):
        return mp.matrix([[mp.mpc(t[i, j]) for j in range(g)] for i in range(g)])
    if isinstance(t, (list, tuple)):
        return mp.matrix([[mp.mpc(v) for v in row] for row in t])
    return mp.matrix([[mp.mpc(t)]])


def _min_eig(S):
    """Smallest eigenvalue of a real symmetric matrix."""
    if S.rows == 1:
        return S[0, 0]
    ev = mp.eigsy(S, eigvals_only=True)
    return min(ev[i] for i in range(S.rows))


def _tail_bound(g, lam, c, m, R):
    """Bound for sum_{|y| > R} (c + |y|)^m exp(-lam |y|^2) over a shifted Z^g.

    Each lattice point owns the unit cube around it, on which ``|z|`` differs
    from ``|y|`` by at most ``s = sqrt(g)/2``, so the sum is dominated by the
    radial integral of ``(c + r + s)^m exp(-lam (r - s)^2) r^(g-1)`` from
    ``R - s``.  Requires the integrand to be decreasing there, which the
    caller guarantees by taking ``R`` large enough.
    """
    s = mp.sqrt(g) / 2
    area = 2 * mp.pi ** (mp.mpf(g) / 2) / mp.gamma(mp.mpf(g) / 2)
    r0 = R - s
    f = lambda r: (c + r + s) ** m * mp.exp(-lam * (r - s) ** 2) * r ** (g - 1)
    width = 1 / mp.sqrt(lam)
    val = mp.quad(f, [r0, r0 + width, r0 + 4 * width, mp.inf])
    # generous factor for the quadrature error of a smooth positive integrand
    return 2 * area * val


def _monotone_from(g, lam, c, m):
    """Radius beyond which (c+r+s)^m e^{-lam (r-s)^2} r^(g-1) decreases."""
    s = mp.sqrt(g) / 2
    # log-derivative m/(c+r+s) + (g-1)/r - 2 lam (r-s) < 0 for r >= r*
    return 2 * s + mp.sqrt((m + g) / lam) + max(c, 1)


@dataclass
class ThetaJet:
    """Value and symmetric u-derivative tensors of Theta at one point."""

    u: list
    t: object
    a: list
    b: list
    derivs: list
    radius: object
    tail_bound: object
    center: tuple
    terms: int
    prec: int = None
    meta: dict = field(default_factory=dict)

    @property
    def gbar(self):
        return len(self.u)

    @property
    def m_max(self):
        return len(self.derivs) - 1

    @property
    def value(self):
        return self.derivs[0][()]

    def d(self, m):
        """Rank-m derivative tensor ``d^m Theta / du^m``."""
        return self.derivs[m]

    def scalar(self, m):
        """``d^m Theta / du^m`` for gbar = 1."""
        return self.derivs[m][(0,) * m]

    @property
    def relative_tail(self):
        return self.tail_bound / abs(self.value) if self.value != 0 else mp.inf


def _lattice_sum(u, t, a, b, m_max, tol, max_radius):
    g = len(u)
    ReT = mp.matrix([[mp.re((t[i, j] + t[j, i]) / 2) for j in range(g)] for i in range(g)])
    lam = _min_eig(-ReT)
    if lam <= 0:
        raise IndefiniteQuadraticForm(
            f"Re t is not negative definite (smallest eigenvalue of -Re t = {mp.nstr(lam, 6)})")
    # modulus exponent as a function of x = n + a:  x.L + x.ReT.x + const
    L = mp.matrix([mp.re(u[i]) - 2 * mp.pi * mp.im(b[i]) for i in range(g)])
    x0 = -mp.lu_solve(ReT, L) / 2
    peak = mp.fsum(x0[i] * L[i] for i in range(g)) / 2
    c = mp.sqrt(mp.fsum(x0[i] ** 2 for i in range(g)))
    n0 = [int(mp.nint(x0[i] - a[i])) for i in range(g)]

    # radius: start from the Gaussian estimate and step until the bound holds
    R = max(_monotone_from(g, lam, c, m_max), mp.sqrt(-mp.log(tol) / lam) + 1)
    while True:
        if R > max_radius:
            raise RadiusOverflow(f"truncation radius {mp.nstr(R, 6)} exceeds cap {max_radius}")
        bound = _tail_bound(g, lam, c, m_max, R)
        if bound <= tol:
            break
        R = R * mp.mpf(1.125) + 1

    keys = [sorted_indices(g, m) for m in range(m_max + 1)]
    acc = [{k: [] for k in ks} for ks in keys]
    span = int(mp.ceil(R)) + 1
    two_pi_i = 2j * mp.pi
    count = 0
    for off in itertools.product(range(-span, span + 1), repeat=g):
        n = [n0[i] + off[i] for i in range(g)]
        x = [n[i] + a[i] for i in range(g)]
        if mp.fsum((x[i] - x0[i]) ** 2 for i in range(g)) > R * R:
            continue
        expo = mp.fsum(x[i] * u[i] for i in range(g))
        expo += mp.fsum(x[i] * t[i, j] * x[j] for i in range(g) for j in range(g))
        expo += two_pi_i * mp.fsum(n[i] * b[i] for i in range(g))
        term = mp.exp(expo - peak)
        count += 1
        for m in range(m_max + 1):
            for k in keys[m]:
                v = term
                for i in k:
                    v *= x[i]
                acc[m][k].append(v)
    scale = mp.exp(peak)
    derivs = [SymTensor(g, m, {k: mp.fsum(vals) * scale for k, vals in acc[m].items()})
              for m in range(m_max + 1)]
    return derivs, R, bound * abs(scale), tuple(n0), count


def theta_eval(u, t, a=None, b=None, m_max=DEFAULT_M_MAX, prec=None, tol=None,
               max_radius=DEFAULT_MAX_RADIUS):
    """:class:`ThetaJet` of ``Theta(u, t)`` with characteristic ``(a, b)``.

    ``u`` is a vector (or scalar for gbar = 1), ``t`` a symmetric matrix (or
    scalar).  ``tol`` bounds the tail relative to the largest summand; the
    default is ``2^-prec``.
    """
    prec = resolve(prec)
    with working(prec):
        u = _as_vector(u)
        g = len(u)
        t = _as_matrix(t, g)
        a = [mp.mpf(0)] * g if a is None else [mp.mpf(mp.re(v)) for v in _as_vector(a)]
        b = [mp.mpc(0)] * g if b is None else _as_vector(b)
        if t.rows != g or len(a) != g or len(b) != g:
            raise ValueError("dimension mismatch between u, t and the characteristic")
        tol = mp.mpf(2) ** (-prec) if tol is None else mp.mpf(tol)
        with mp.workprec(prec + 20):
            derivs, R, bound, n0, count = _lattice_sum(u, t, a, b, int(m_max), tol, max_radius)
        derivs = [d.scale(1) for d in derivs]
        return ThetaJet(u=u, t=t, a=a, b=b, derivs=derivs, radius=+R, tail_bound=+bound,
                        center=n0, terms=count, prec=prec)


def jacobi_theta(u, tau, a=None, b=None, prec=None, tol=None, max_radius=DEFAULT_MAX_RADIUS):
    """``theta_{a,b}(u, tau) = sum_n exp(2 i pi (n+a).(u+b) + i pi (n+a).tau.(n+a))``."""
    prec = resolve(prec)
    with working(prec):
        u = _as_vector(u)
        g = len(u)
        b = [mp.mpc(0)] * g if b is None else _as_vector(b)
        U = [2j * mp.pi * (u[i] + b[i]) for i in range(g)]
        T = _as_matrix(tau, g) * (1j * mp.pi)
    return theta_eval(U, T, a, None, 0, prec, tol, max_radius).value


# ----------------------------------------------------------------------
# identities

def heat_residual(u, t, a=None, b=None, prec=None):
    """Max relative residual of ``dTheta/dt_ij = (2 - delta_ij) d^2 Theta/du_i du_j``.

    ``t_ij`` and ``t_ji`` move together, hence the factor 2 off the diagonal.
    The t-derivative is a central difference with step ``2^(-prec/3)``.
    """
    prec = resolve(prec)
    with working(prec):
        jet = theta_eval(u, t, a, b, 2, prec)
        g = jet.gbar
        h = mp.mpf(2) ** (-(prec // 3))
        worst = mp.mpf(0)
        for i in range(g):
            for j in range(i, g):
                def shifted(s):
                    T = jet.t.copy()
                    T[i, j] += s
                    if i != j:
                        T[j, i] += s
                    return theta_eval(jet.u, T, jet.a, jet.b, 0, prec + prec // 3 + 10).value
                with mp.workprec(prec + prec // 3 + 10):
                    dt = (shifted(h) - shifted(-h)) / (2 * h)
                target = (1 if i == j else 2) * jet.d(2)[(i, j)]
                worst = max(worst, abs(dt - target) / max(abs(target), abs(jet.value)))
        return worst


def jacobi_relation_residual(u, t, eps_star, nu, N, prec=None):
    """Relative residual of ``Theta(u,t) = theta_{-N eps*, nu}(u/2i pi, t/i pi) e^{2i pi nu N eps*}``."""
    prec = resolve(prec)
    with working(prec):
        u = _as_vector(u)
        g = len(u)
        a = [-N * mp.mpf(e) for e in _as_vector_real(eps_star)]
        nu = _as_vector(nu)
        lhs = theta_eval(u, t, a, nu, 0, prec).value
        tau = _as_matrix(t, g) / (1j * mp.pi)
        th = jacobi_theta([v / (2j * mp.pi) for v in u], tau, a, nu, prec)
        phase = mp.exp(-2j * mp.pi * mp.fsum(nu[i] * a[i] for i in range(g)))
        return abs(lhs - th * phase) / abs(lhs)


def reduction_residual(u, tau, a, b, prec=None):
    """Relative residual of ``theta_{a,b}(u) = theta_{0,0}(u + b + tau a) e^{i pi a tau a + 2 i pi a (u+b)}``."""
    prec = resolve(prec)
    with working(prec):
        u = _as_vector(u)
        g = len(u)
        tau = _as_matrix(tau, g)
        a = [mp.mpf(mp.re(v)) for v in _as_vector(a)]
        b = _as_vector(b)
        lhs = jacobi_theta(u, tau, a, b, prec)
        shift = [u[i] + b[i] + mp.fsum(tau[i, j] * a[j] for j in range(g)) for i in range(g)]
        rhs = jacobi_theta(shift, tau, None, None, prec)
        quad = mp.fsum(a[i] * tau[i, j] * a[j] for i in range(g) for j in range(g))
        rhs *= mp.exp(1j * mp.pi * quad + 2j * mp.pi * mp.fsum(a[i] * (u[i] + b[i]) for i in range(g)))
        return abs(lhs - rhs) / abs(lhs)


def quasi_periodicity_residual(u, t, a, b, n, m, prec=None):
    """Relative residual of the translation law of ``Theta``.

    With integer vectors ``n``, ``m``:

        Theta(u + 2 i pi n + 2 t m) = exp(2 i pi a.n - m.u - m.t.m - 2 i pi m.b) Theta(u)

    which is the Jacobi law ``theta_{a,b}(u + n + tau m) = e^{2 i pi (a.n - m.b)}
    e^{-i pi m.tau.m - 2 i pi m.u} theta_{a,b}(u)`` in the variables of ``Theta``.
    """
    prec = resolve(prec)
    with working(prec):
        u = _as_vector(u)
        g = len(u)
        t = _as_matrix(t, g)
        a = [mp.mpf(mp.re(v)) for v in _as_vector(a)]
        b = _as_vector(b)
        shifted = [u[i] + 2j * mp.pi * n[i] + 2 * mp.fsum(t[i, j] * m[j] for j in range(g))
                   for i in range(g)]
        lhs = theta_eval(shifted, t, a, b, 0, prec).value
        base = theta_eval(u, t, a, b, 0, prec).value
        expo = 2j * mp.pi * mp.fsum(a[i] * n[i] for i in range(g))
        expo -= mp.fsum(m[i] * u[i] for i in range(g))
        expo -= mp.fsum(m[i] * t[i, j] * m[j] for i in range(g) for j in range(g))
        expo -= 2j * mp.pi * mp.fsum(m[i] * b[i] for i in range(g))
        rhs = mp.exp(expo) * base
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs))


def _as_vector_real(v):
    return [mp.mpf(mp.re(x)) for x in _as_vector(v)]
