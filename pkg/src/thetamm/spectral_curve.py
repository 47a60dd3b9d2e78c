"""Hyperelliptic spectral curves of the one-matrix model.

The curve is ``y^2 = V'(x)^2 - 4 P(x)``.  With ``gbar + 1`` occupied cuts
it factors as ``y = M(x) s(x)``, ``s(x)^2 = prod_j (x - e_j)`` over the
``2 gbar + 2`` branch points, ``s ~ x^{gbar+1}`` at infinity.

Conventions (all real branch points, cut i = [e_{2i-1}, e_{2i}]):

* ``y_+`` is the boundary value from the upper half plane;
* filling fraction  ``eps_i = (1/2 i pi) int_{cut i} y_+ dx``, i.e. half of
  the closed A-loop, so that ``eps_i = n_i / N`` with ``sum eps_i = eps_tot``;
* ``F0'_i = int_{b_i}^{a_last} y dx`` along the real axis, half of the
  closed two-sheet B-cycle, which is ``d F0 / d eps_i`` when the last
  filling absorbs ``eps_tot - sum eps_i``;
* holomorphic differentials ``du_j = sum_k C_jk x^{k-1} dx / s`` with
  half-cycle normalization, and ``tau_ij = int_{B_i} du_j``.  Then
  ``d F0' / d eps = 2 i pi tau``.
"""
from dataclasses import dataclass, field

import mpmath as mp

from .contour import Potential
from .errors import (ConfigError, DegenerateCurve, IllConditionedPeriods, LeftCell,
                     NewtonDiverged)
from .precision import resolve, working

DEGENERACY_THRESHOLD = mp.mpf("1e-6")
PERIOD_CONDITION_LIMIT = mp.mpf("1e30")


# ----------------------------------------------------------------------
# series helpers

def _inverse_sqrt_series(points, order):
    """Coefficients of ``prod_j (1 - e_j u)^{-1/2}`` up to ``u^order``."""
    out = [mp.mpf(1)] + [mp.mpf(0)] * order
    binom = [mp.binomial(-mp.mpf(1) / 2, r) for r in range(order + 1)]
    for e in points:
        factor = [binom[r] * (-e) ** r for r in range(order + 1)]
        out = [mp.fsum(out[i] * factor[r - i] for i in range(r + 1)) for r in range(order + 1)]
    return out


def laurent_ratio(vprime, points, order):
    """Laurent coefficients of ``V'(x) / s(x)`` at infinity.

    ``vprime`` is ascending.  Returns a dict power -> coefficient for
    powers from ``deg V' - gbar - 1`` down to ``-order``.
    """
    h = len(points) // 2  # gbar + 1
    top = len(vprime) - 1
    depth = top - h + order
    c = _inverse_sqrt_series(points, depth)
    out = {}
    for p in range(top - h, -order - 1, -1):
        acc = []
        for m, v in enumerate(vprime):
            r = m - h - p
            if 0 <= r <= depth:
                acc.append(v * c[r])
        out[p] = mp.fsum(acc)
    return out


def _polymul(a, b):
    out = [mp.mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _polyval(asc, x):
    acc = 0
    for c in reversed(asc):
        acc = acc * x + c
    return acc


# ----------------------------------------------------------------------
# curve data

@dataclass
class SpectralCurveData:
    """Real multi-cut curve ``y = M(x) s(x)``.

    ``branch_points`` are sorted increasingly; cut i is
    ``[branch_points[2i], branch_points[2i+1]]``.  ``M`` is ascending.
    ``potential`` may be None for a bare curve given by its branch points.
    """

    branch_points: list
    M: list
    potential: object = None
    eps_tot: object = 1
    prec: int = None
    tau: object = None
    du: object = None
    f0p: list = None
    eps: list = field(default=None)

    @property
    def gbar(self):
        return len(self.branch_points) // 2 - 1

    @property
    def cuts(self):
        e = self.branch_points
        return [(e[2 * i], e[2 * i + 1]) for i in range(len(e) // 2)]

    @property
    def P(self):
        """Ascending coefficients of ``P = (V'^2 - y^2) / 4``."""
        if self.potential is None:
            return None
        vp = self.potential.deriv_coeffs()
        sigma = [mp.mpf(1)]
        for e in self.branch_points:
            sigma = _polymul(sigma, [-e, mp.mpf(1)])
        y2 = _polymul(_polymul(self.M, self.M), sigma)
        v2 = _polymul(vp, vp)
        size = max(len(y2), len(v2))
        y2 += [0] * (size - len(y2))
        v2 += [0] * (size - len(v2))
        p = [(a - b) / 4 for a, b in zip(v2, y2)]
        while len(p) > 1 and abs(p[-1]) < mp.mpf(2) ** (-resolve(self.prec) // 2):
            p.pop()
        return p

    def polynomial_residual(self):
        """Max coefficient of ``y^2 - V'^2 + 4P``; zero up to rounding."""
        if self.potential is None:
            return mp.mpf(0)
        vp = self.potential.deriv_coeffs()
        sigma = [mp.mpf(1)]
        for e in self.branch_points:
            sigma = _polymul(sigma, [-e, mp.mpf(1)])
        y2 = _polymul(_polymul(self.M, self.M), sigma)
        v2 = _polymul(vp, vp)
        p = self.P
        size = max(len(y2), len(v2), len(p))
        pad = lambda a: list(a) + [0] * (size - len(a))
        return max(abs(a - b + 4 * c) for a, b, c in zip(pad(y2), pad(v2), pad(p)))

    # --- evaluation on the real axis ---

    def s_plus(self, x):
        """``s(x + i0)`` for real x."""
        acc = mp.mpc(1)
        for e in self.branch_points:
            acc *= mp.sqrt(x - e) if x >= e else 1j * mp.sqrt(e - x)
        return acc

    def y_plus(self, x):
        return _polyval(self.M, x) * self.s_plus(x)

    def to_dict(self):
        def c(z):
            z = mp.mpc(z)
            return [mp.nstr(z.real, 30), mp.nstr(z.imag, 30)]
        out = {
            "branch_points": [mp.nstr(e, 30) for e in self.branch_points],
            "cuts": [[mp.nstr(a, 30), mp.nstr(b, 30)] for a, b in self.cuts],
            "cycle_basis": "A_i: loop around cut i; B_i: real-axis path from cut i to the last cut",
            "M": [mp.nstr(m, 30) for m in self.M],
            "gbar": self.gbar,
        }
        if self.potential is not None:
            out["P"] = [c(p) for p in self.P]
        if self.tau is not None:
            out["tau"] = [[c(self.tau[i, j]) for j in range(self.gbar)] for i in range(self.gbar)]
        if self.f0p is not None:
            out["F0_prime"] = [c(v) for v in self.f0p]
        if self.eps is not None:
            out["eps"] = [mp.nstr(v, 30) for v in self.eps]
        return out


def _theta_quad(F, max_points=1 << 14):
    """``int_0^pi F(theta) d theta`` for F even and 2pi-periodic.

    After the substitution ``x = mid - half cos(theta)`` integrands over a
    cut or gap are of this form, and the trapezoidal rule converges
    geometrically; the node count doubles until two passes agree.
    """
    tol = mp.mpf(2) ** (-mp.mp.prec + 8)
    n = 8
    values = [F(mp.pi * k / n) for k in range(n + 1)]
    total = (values[0] + values[-1]) / 2 + mp.fsum(values[1:-1])
    size = mp.fsum(abs(v) for v in values)
    prev = total * mp.pi / n
    while n < max_points:
        fresh = [F(mp.pi * (2 * k + 1) / (2 * n)) for k in range(n)]
        total += mp.fsum(fresh)
        size += mp.fsum(abs(v) for v in fresh)
        n *= 2
        cur = total * mp.pi / n
        if abs(cur - prev) <= tol * size * mp.pi / n:
            return cur
        prev = cur
    raise IllConditionedPeriods("period quadrature did not converge (cut too close to another)")


def _cut_integral(curve, g, i):
    """``int_{cut i} g(x) s_+(x) dx`` with the sqrt singularities absorbed."""
    a, b = curve.cuts[i]
    mid, half = (a + b) / 2, (b - a) / 2
    others = [e for j, e in enumerate(curve.branch_points) if j not in (2 * i, 2 * i + 1)]

    def integrand(th):
        x = mid - half * mp.cos(th)
        rest = mp.mpc(1)
        for e in others:
            rest *= mp.sqrt(x - e) if x >= e else 1j * mp.sqrt(e - x)
        # sqrt(x-a) * i sqrt(b-x) = i * half * sin(th)
        return g(x) * rest * 1j * (half * mp.sin(th)) ** 2
    return _theta_quad(integrand)


def _cut_integral_inv(curve, g, i):
    """``int_{cut i} g(x) / s_+(x) dx``."""
    a, b = curve.cuts[i]
    mid, half = (a + b) / 2, (b - a) / 2
    others = [e for j, e in enumerate(curve.branch_points) if j not in (2 * i, 2 * i + 1)]

    def integrand(th):
        x = mid - half * mp.cos(th)
        rest = mp.mpc(1)
        for e in others:
            rest *= mp.sqrt(x - e) if x >= e else 1j * mp.sqrt(e - x)
        return g(x) / (rest * 1j)
    return _theta_quad(integrand)


def _gap_integral(curve, g, i, inverse):
    """``int`` over gap i (between cut i and cut i+1) of ``g s`` or ``g / s``."""
    a = curve.cuts[i][1]
    b = curve.cuts[i + 1][0]
    mid, half = (a + b) / 2, (b - a) / 2
    others = [e for j, e in enumerate(curve.branch_points) if j not in (2 * i + 1, 2 * i + 2)]

    def integrand(th):
        x = mid - half * mp.cos(th)
        rest = mp.mpc(1)
        for e in others:
            rest *= mp.sqrt(x - e) if x >= e else 1j * mp.sqrt(e - x)
        # s = sqrt(x-a) * i sqrt(b-x) * rest on the upper side; in a gap the
        # upper and lower values agree, and the product is real
        if inverse:
            return g(x) / (rest * 1j)
        return g(x) * rest * 1j * (half * mp.sin(th)) ** 2
    return _theta_quad(integrand)


def filling_fractions(curve, count=None):
    """``(1/2 i pi) int_{cut i} y_+ dx`` for the first ``count`` cuts (default all)."""
    M = curve.M
    count = curve.gbar + 1 if count is None else count
    return [mp.re(_cut_integral(curve, lambda x: _polyval(M, x), i) / (2j * mp.pi))
            for i in range(count)]


def periods_and_tau(curve, check=True):
    """Period matrix ``tau`` and normalization ``C`` of ``du_j = sum_k C_jk x^{k-1} dx/s``."""
    g = curve.gbar
    if g == 0:
        return mp.matrix(0, 0), mp.matrix(0, 0)
    with working(curve.prec):
        A = a_period_matrix(curve)
        cond = mp.mnorm(A, 1) * mp.mnorm(A ** -1, 1)
        if cond > PERIOD_CONDITION_LIMIT:
            raise IllConditionedPeriods(f"A-period matrix condition {mp.nstr(cond, 5)}")
        C = (A ** -1).T  # du_j = sum_k C[j,k] x^k dx/s  with  sum_k A[i,k] C[j,k] = delta_ij
        # B_i runs along the real axis from cut i to the last cut
        gaps = [[_gap_integral(curve, lambda x, k=k: x ** k, m, True) for k in range(g)]
                for m in range(g)]
        tau = mp.matrix(g, g)
        for i in range(g):
            for j in range(g):
                tau[i, j] = mp.fsum(C[j, k] * gaps[m][k] for m in range(i, g) for k in range(g)) / (2j * mp.pi)
        if check:
            scale = max(abs(tau[i, j]) for i in range(g) for j in range(g))
            asym = max([abs(tau[i, j] - tau[j, i]) for i in range(g) for j in range(g)] + [0])
            if asym > scale * mp.mpf(2) ** (-resolve(curve.prec) // 2):
                raise IllConditionedPeriods(f"tau not symmetric ({mp.nstr(asym, 3)})")
            im = mp.matrix([[mp.im(tau[i, j]) for j in range(g)] for i in range(g)])
            if min(mp.eigsy(im)[0]) <= 0:
                raise IllConditionedPeriods("Im tau is not positive definite")
    return tau, C


def f0_prime(curve):
    """``F0'_i = int_{B_i} y dx`` (real-axis path from cut i to the last cut)."""
    g = curve.gbar
    with working(curve.prec):
        M = curve.M
        gaps = [_gap_integral(curve, lambda x: _polyval(M, x), m, False) for m in range(g)]
        return [mp.fsum(gaps[i:]) for i in range(g)]


# ----------------------------------------------------------------------
# solving for the branch points

@dataclass(frozen=True)
class CutStructure:
    """Occupied cuts, each labelled by a real anchor inside it (a well minimum).

    ``guess`` optionally fixes the initial branch points.
    """

    anchors: tuple
    guess: tuple = None

    @property
    def gbar(self):
        return len(self.anchors) - 1

    @classmethod
    def from_config(cls, raw):
        if raw is None:
            return None
        if isinstance(raw, dict):
            anchors = tuple(mp.mpf(repr(a) if isinstance(a, float) else a) for a in raw["anchors"])
            guess = raw.get("guess")
            guess = None if guess is None else tuple(mp.mpf(repr(g) if isinstance(g, float) else g) for g in guess)
            return cls(anchors, guess)
        return cls(tuple(mp.mpf(a) for a in raw))


def default_cut_structure(pot, cuts=None):
    """Anchors at the real local minima of V (all of them unless ``cuts`` given)."""
    if not pot.is_real:
        raise ConfigError("curve solving is implemented for real potentials only")
    vp = [mp.re(c) for c in pot.deriv_coeffs()]
    roots = mp.polyroots(vp[::-1], maxsteps=200, extraprec=64) if len(vp) > 2 else [-vp[0] / vp[1]]
    vpp = [j * c for j, c in enumerate(vp[1:], start=1)]
    minima = sorted(mp.re(r) for r in roots
                    if abs(mp.im(r)) < mp.mpf(10) ** -20 and _polyval(vpp, mp.re(r)) > 0)
    if cuts is not None:
        minima = minima[:cuts]
    return CutStructure(tuple(minima))


def _initial_guess(pot, structure, eps_all):
    if structure.guess is not None:
        return list(structure.guess)
    vp = [mp.re(c) for c in pot.deriv_coeffs()]
    vpp = [j * c for j, c in enumerate(vp[1:], start=1)]
    out = []
    for anchor, e in zip(structure.anchors, eps_all):
        curv = _polyval(vpp, anchor)
        if curv <= 0:
            raise ConfigError("cut anchors must sit at local minima of V")
        r = 2 * mp.sqrt(e / curv)
        out += [anchor - r, anchor + r]
    return out


def _residuals(pot, points, eps_all, eps_tot, with_fill=True):
    h = len(points) // 2
    vp = [mp.re(c) for c in pot.deriv_coeffs()]
    lr = laurent_ratio(vp, points, h + 1)
    res = [lr[-k] for k in range(1, h + 1)] + [lr[-(h + 1)] - 2 * eps_tot]
    M = [lr[p] for p in range(0, max(lr) + 1)] if max(lr) >= 0 else [mp.mpf(0)]
    if with_fill:
        curve = SpectralCurveData(points, M, pot, eps_tot)
        fill = filling_fractions(curve, h - 1)
        res += [f - e for f, e in zip(fill, eps_all)]
    return res, M


def _check_separation(points):
    span = points[-1] - points[0]
    for a, b in zip(points, points[1:]):
        if b - a <= DEGENERACY_THRESHOLD * span:
            raise DegenerateCurve(
                f"branch points {mp.nstr(a, 10)} and {mp.nstr(b, 10)} nearly coincide")


def solve_curve(pot, eps, structure=None, eps_tot=1, prec=None, tol=None, max_iter=60):
    """Curve with ``gbar + 1`` real cuts and fillings ``eps`` (length gbar).

    Damped Newton on the branch points; the equations are the Laurent
    conditions ``y = V' - 2 eps_tot / x + O(x^-2)`` and the A-period
    (filling) conditions.
    """
    prec = resolve(prec)
    if not isinstance(pot, Potential):
        pot = Potential.from_config(pot)
    if not pot.is_real:
        raise ConfigError("curve solving is implemented for real potentials only")
    with working(prec):
        eps_tot = mp.mpf(eps_tot)
        eps = [mp.mpf(e) for e in eps]
        if structure is None:
            structure = default_cut_structure(pot, len(eps) + 1)
        if len(structure.anchors) != len(eps) + 1:
            raise ConfigError(f"cut structure has {len(structure.anchors)} cuts; "
                              f"expected {len(eps) + 1}")
        eps_all = eps + [eps_tot - mp.fsum(eps)]
        if any(e <= 0 for e in eps_all):
            raise DegenerateCurve("a filling fraction on an occupied cut is <= 0 (pinched cut)")
        tol = mp.mpf(2) ** (-prec + 40) if tol is None else mp.mpf(tol)
        pts = _initial_guess(pot, structure, eps_all)
        n = len(pts)
        fd = mp.mpf(2) ** (-prec // 3)
        best = None
        for it in range(max_iter):
            with mp.workprec(prec + 20):
                res, _ = _residuals(pot, pts, eps_all, eps_tot)
                norm = max(abs(r) for r in res)
                if best is not None and norm <= tol:
                    break
                J = mp.matrix(n, n)
                for j in range(n):
                    up = list(pts)
                    dn = list(pts)
                    step = fd * max(1, abs(pts[j]))
                    up[j] += step
                    dn[j] -= step
                    ru, _ = _residuals(pot, up, eps_all, eps_tot)
                    rd, _ = _residuals(pot, dn, eps_all, eps_tot)
                    for i in range(n):
                        J[i, j] = (ru[i] - rd[i]) / (2 * step)
                try:
                    delta = mp.lu_solve(J, mp.matrix(res))
                except ZeroDivisionError as exc:
                    raise NewtonDiverged("singular Jacobian in curve Newton") from exc
                lam = mp.mpf(1)
                span = pts[-1] - pts[0]
                for _ in range(30):
                    trial = [p - lam * d for p, d in zip(pts, delta)]
                    ordered = all(b - a > DEGENERACY_THRESHOLD * span for a, b in zip(trial, trial[1:]))
                    if ordered:
                        tres, _ = _residuals(pot, trial, eps_all, eps_tot)
                        if max(abs(r) for r in tres) < norm or lam < mp.mpf(2) ** -20:
                            break
                    lam /= 2
                else:
                    raise NewtonDiverged("line search failed in curve Newton")
                pts = trial
                best = norm
        else:
            raise NewtonDiverged(f"curve Newton did not converge (residual {mp.nstr(norm, 3)})")
        _check_separation(pts)
        _, M = _residuals(pot, pts, eps_all, eps_tot, with_fill=False)
        curve = SpectralCurveData(pts, M, pot, eps_tot, prec)
        curve.eps = filling_fractions(curve)
        curve.tau, curve.du = periods_and_tau(curve)
        curve.f0p = f0_prime(curve)
    return curve


def curve_from_branch_points(points, M=(1,), prec=None):
    """Bare curve ``y = M(x) sqrt(prod (x - e_j))`` for period computations."""
    prec = resolve(prec)
    with working(prec):
        pts = sorted(mp.mpf(p) for p in points)
        if len(pts) % 2 or len(pts) < 2:
            raise ConfigError("need an even number (>= 2) of branch points")
        _check_separation(pts)
        curve = SpectralCurveData(pts, [mp.mpf(m) for m in M], None, 1, prec)
        curve.tau, curve.du = periods_and_tau(curve)
    return curve


def a_period_residuals(curve):
    """``|eps_i(read back) - eps_i(target)|`` for the stored fillings."""
    with working(curve.prec):
        back = filling_fractions(curve)
        return [abs(a - b) for a, b in zip(back, curve.eps)]


def normalization_residual(curve):
    """``max |(1/2 i pi) int_{cut i} du_j - delta_ij|``."""
    g = curve.gbar
    with working(curve.prec):
        worst = mp.mpf(0)
        for i in range(g):
            for j in range(g):
                val = mp.fsum(curve.du[j, k] * _cut_integral_inv(curve, lambda x, k=k: x ** k, i)
                              for k in range(g)) / (2j * mp.pi)
                worst = max(worst, abs(val - (1 if i == j else 0)))
    return worst


# ----------------------------------------------------------------------
# Boutroux point

def boutroux_find(pot, structure=None, eps_tot=1, eps_init=None, prec=None, tol=None,
                  max_iter=40):
    """Real fillings with ``Re F0' = 0`` (the maximum of Re F0).

    Newton with gradient ``Re F0'`` and Hessian ``Re F0'' = -2 pi Im tau``
    (negative definite), so each step is ``eps += (2 pi Im tau)^{-1} Re F0'``.
    Returns ``(eps, curve, history)``; ``history`` lists (eps, |Re F0'|,
    eigenvalues of pi Im tau).
    """
    prec = resolve(prec)
    with working(prec):
        if structure is None:
            structure = default_cut_structure(pot)
        g = structure.gbar
        eps_tot = mp.mpf(eps_tot)
        eps = [eps_tot / (g + 1)] * g if eps_init is None else [mp.mpf(e) for e in eps_init]
        tol = mp.mpf(2) ** (-prec // 2) if tol is None else mp.mpf(tol)
        history = []
        for _ in range(max_iter):
            try:
                curve = solve_curve(pot, eps, structure, eps_tot, prec)
            except DegenerateCurve as exc:
                raise LeftCell(f"Boutroux iteration left the cell at eps={eps}") from exc
            grad = [mp.re(v) for v in curve.f0p]
            hess = mp.matrix([[2 * mp.pi * mp.im(curve.tau[i, j]) for j in range(g)] for i in range(g)])
            eig = mp.eigsy(hess / 2)[0] if g else []
            history.append((list(eps), max([abs(v) for v in grad] + [mp.mpf(0)]), list(eig)))
            if not grad or max(abs(v) for v in grad) <= tol:
                return eps, curve, history
            step = mp.lu_solve(hess, mp.matrix(grad))
            eps = [e + step[i] for i, e in enumerate(eps)]
        raise NewtonDiverged("Boutroux Newton did not converge")


def a_period_matrix(curve):
    """``A[i, k] = (1/2 i pi) int_{cut i} x^k dx / s_+`` for i, k < gbar."""
    g = curve.gbar
    with working(curve.prec):
        A = mp.matrix(g, g)
        for i in range(g):
            for k in range(g):
                A[i, k] = _cut_integral_inv(curve, lambda x, k=k: x ** k, i) / (2j * mp.pi)
    return A


def f1_value(curve):
    """Genus-one free energy of a real multi-cut curve, up to an additive constant.

        F1 = -1/2 ln det A - 1/24 ln( prod_i M(e_i) prod_{i<j} (e_i - e_j)^4 )

    with A the A-period matrix of ``x^k dx / s``.  Moduli are used inside the
    logarithms so F1 is real for real curves.
    """
    with working(curve.prec):
        e = curve.branch_points
        g = curve.gbar
        logdet = mp.log(abs(mp.det(a_period_matrix(curve)))) if g else mp.mpf(0)
        acc = mp.fsum(mp.log(abs(_polyval(curve.M, x))) for x in e)
        acc += 4 * mp.fsum(mp.log(abs(a - b)) for i, a in enumerate(e) for b in e[i + 1:])
        return -logdet / 2 - acc / 24
