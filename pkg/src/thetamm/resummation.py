"""Resummation of the oscillatory series into a single theta function.

With ``e = 1/N`` and shifts

    u = N F0' + sum_k e^(2k-1) u^(k),     t = i pi tau + sum_j e^(2j) t^(j),

the heat equation turns ``Theta(u, t)`` into ``exp(D) Theta`` at the base
point, where ``D = du . d_u + sum_ij dt_ij d_i d_j``.  Matching the
coefficient of ``e^p`` with the assembled series fixes ``u^(q)`` at
``p = 2q - 1`` (against ``Theta'``) and ``t^(q)`` at ``p = 2q`` (against
``Theta''``).

The combinatorial core works on generic numbers, so it also runs on
symbolic inputs.
"""
import itertools
from dataclasses import dataclass, field

import mpmath as mp

from .errors import ConfigError, IndefiniteQuadraticForm, TableIncomplete, ThetaDerivativeVanishing
from .expansion import enumerate_stable_terms, theta_point
from .invariants import stable_pairs
from .precision import resolve, working
from .theta import theta_eval

DIVISOR_THRESHOLD = mp.mpf("1e-12")


def _key(idx):
    return tuple(sorted(idx))


def operator_series(us, ts, g, p_max):
    """Coefficients of ``exp(D)`` as a dict ``(p, derivative key) -> coefficient``.

    ``us`` maps k -> u^(k) (length-g sequence), ``ts`` maps j -> t^(j)
    (g x g nested sequence).  Keys are sorted index tuples of u-derivatives.
    """
    D = {}
    for k, u in us.items():
        p = 2 * k - 1
        if p <= p_max:
            for i in range(g):
                D[(p, (i,))] = D.get((p, (i,)), 0) + u[i]
    for j, t in ts.items():
        p = 2 * j
        if p <= p_max:
            for a in range(g):
                for b in range(g):
                    key = (p, _key((a, b)))
                    D[key] = D.get(key, 0) + t[a][b]
    result = {(0, ()): 1}
    term = {(0, ()): 1}
    for r in range(1, p_max + 1):
        new = {}
        for (p1, k1), c1 in term.items():
            for (p2, k2), c2 in D.items():
                if p1 + p2 <= p_max:
                    key = (p1 + p2, _key(k1 + k2))
                    new[key] = new.get(key, 0) + c1 * c2
        term = {k: v / r for k, v in new.items()}
        if not term:
            break
        for k, v in term.items():
            result[k] = result.get(k, 0) + v
    return result


def assembled_series(F, g, p_max):
    """Coefficients of the assembled series, ``(p, key) -> coefficient``.

    ``F(h, l, idx)`` returns the component of ``F_h^(l)`` at the index
    tuple ``idx``.
    """
    out = {(0, ()): 1}
    for p in range(1, p_max + 1):
        for term in enumerate_stable_terms(p):
            ranks = [l for _, l in term.parts]
            for idx in itertools.product(range(g), repeat=sum(ranks)):
                prod = term.weight.numerator
                pos = 0
                for (h, l) in term.parts:
                    prod = prod * F(h, l, idx[pos:pos + l])
                    pos += l
                key = (p, _key(idx))
                out[key] = out.get(key, 0) + prod / term.weight.denominator
    return out


def order_value(series, p, deriv):
    """``sum_key c_(p,key) d^key Theta`` with ``deriv(key)`` the derivative value."""
    return sum((c * deriv(k) for (q, k), c in series.items() if q == p), 0)


def solve_scalar(F, deriv, q_max):
    """Scalar recursion on generic numbers (gbar = 1).

    ``F(h, l)`` and ``deriv(m)`` supply ``F_h^(l)`` and ``Theta^(m)``.
    Returns ``(u, t)`` as dicts k -> value.
    """
    p_max = 2 * q_max
    A = assembled_series(lambda h, l, idx: F(h, l), 1, p_max)
    d = lambda key: deriv(len(key))
    us, ts = {}, {}
    for q in range(1, q_max + 1):
        for p, unknown in ((2 * q - 1, "u"), (2 * q, "t")):
            C = operator_series({k: [v] for k, v in us.items()},
                                {j: [[v]] for j, v in ts.items()}, 1, p)
            r = order_value(A, p, d) - order_value(C, p, d)
            if unknown == "u":
                us[q] = r / deriv(1)
            else:
                ts[q] = r / deriv(2)
    return us, ts


@dataclass
class ResummedCorrections:
    """Shifts ``u^(k)``, ``t^(j)`` and the base-point data they were solved at."""

    u: dict
    t: dict
    jet: object
    table: object = None
    nu: list = None
    f0p: list = None
    tau: object = None
    meta: dict = field(default_factory=dict)

    @property
    def q_max(self):
        return max(self.u) if self.u else 0

    def to_json(self):
        c = lambda z: [mp.nstr(mp.re(z), 30), mp.nstr(mp.im(z), 30)]
        return {
            "u": {str(k): [c(x) for x in v] for k, v in self.u.items()},
            "t": {str(j): [[c(x) for x in row] for row in m] for j, m in self.t.items()},
        }


def _check_divisor(jet):
    g = jet.gbar
    scale = abs(jet.value)
    for m in (1, 2):
        size = jet.d(m).max_abs()
        if scale == 0 or size / scale < DIVISOR_THRESHOLD:
            raise ThetaDerivativeVanishing(
                f"|Theta^({m})| / |Theta| = {mp.nstr(size / scale if scale else 0, 5)} "
                f"below {mp.nstr(DIVISOR_THRESHOLD, 3)}: base point near the theta divisor",
                order=m, value=jet.d(m)[(0,) * m] if g == 1 else size)


def _min_norm(coeffs, r):
    """Minimum-norm solution of ``sum_i c_i x_i = r``."""
    norm = mp.fsum(abs(c) ** 2 for c in coeffs)
    return [r * mp.conj(c) / norm for c in coeffs]


def solve_corrections(table, jet=None, q_max=1, N=None, nu=None, f0p=None, tau=None, prec=None):
    """:class:`ResummedCorrections` up to ``q_max``.

    The jet (at ``u = N F0'``, ``t = i pi tau``) must carry derivatives to
    order ``6 q_max``.  For gbar > 1 each step is one scalar equation for a
    vector or symmetric matrix; the minimum-norm solution is taken.
    """
    prec = resolve(prec)
    p_max = 2 * q_max
    missing = [q for q in stable_pairs(p_max) if q not in table.entries]
    if missing:
        raise TableIncomplete(f"resummation to q_max={q_max} needs entries {missing}")
    with working(prec):
        if jet is None:
            if N is None:
                raise ConfigError("either a theta jet or N is required")
            jet = theta_point(table, N, nu, f0p, tau, 3 * p_max, prec)
        if jet.m_max < 3 * p_max:
            raise TableIncomplete(f"theta jet has m_max={jet.m_max} < {3 * p_max}")
        _check_divisor(jet)
        g = table.gbar
        deriv = lambda key: jet.d(len(key))[key]
        if g == 1:
            us, ts = solve_scalar(lambda h, l: table.scalar(h, l), lambda m: jet.scalar(m), q_max)
            u = {k: [v] for k, v in us.items()}
            t = {j: [[v]] for j, v in ts.items()}
        else:
            A = assembled_series(lambda h, l, idx: table.get(h, l)[idx], g, p_max)
            u, t = {}, {}
            grad = [jet.d(1)[(i,)] for i in range(g)]
            pairs = [(a, b) for a in range(g) for b in range(g)]
            hess = [jet.d(2)[(a, b)] for a, b in pairs]
            for q in range(1, q_max + 1):
                for p, unknown in ((2 * q - 1, "u"), (2 * q, "t")):
                    C = operator_series(u, t, g, p)
                    r = order_value(A, p, deriv) - order_value(C, p, deriv)
                    if unknown == "u":
                        u[q] = _min_norm(grad, r)
                    else:
                        flat = _min_norm(hess, r)
                        # symmetrize: the Hessian is symmetric, so this keeps the residual
                        m = [[0] * g for _ in range(g)]
                        for (a, b), v in zip(pairs, flat):
                            m[a][b] = v
                        t[q] = [[(m[a][b] + m[b][a]) / 2 for b in range(g)] for a in range(g)]
        return ResummedCorrections(u=u, t=t, jet=jet, table=table, nu=nu, f0p=f0p, tau=tau,
                                   meta={"q_max": q_max})


def shifted_point(corr, N):
    """``(u, t)`` after substituting the corrections at this ``N``."""
    jet = corr.jet
    g = jet.gbar
    N = mp.mpf(N)
    e = 1 / N
    u = list(jet.u)
    for k, v in corr.u.items():
        for i in range(g):
            u[i] += e ** (2 * k - 1) * v[i]
    t = jet.t.copy()
    for j, m in corr.t.items():
        for a in range(g):
            for b in range(g):
                t[a, b] += e ** (2 * j) * m[a][b]
    return u, t


def eval_resummed(corr, N=None, prec=None):
    """``Theta`` at the shifted arguments; ``N`` defaults to the base jet's."""
    prec = resolve(prec)
    with working(prec):
        if N is None:
            N = corr.meta.get("N")
        if N is None:
            raise ConfigError("N is required")
        u, t = shifted_point(corr, N)
        try:
            return theta_eval(u, t, corr.jet.a, corr.jet.b, 0, prec).value
        except IndefiniteQuadraticForm as exc:
            raise IndefiniteQuadraticForm(f"shifted t lost negative definiteness: {exc}") from exc


def resummed_for(table, N, q_max, nu=None, f0p=None, tau=None, prec=None):
    """Solve at ``u = N F0'`` and evaluate at the same ``N``."""
    corr = solve_corrections(table, None, q_max, N, nu, f0p, tau, prec)
    corr.meta["N"] = N
    return corr, eval_resummed(corr, N, prec)


def reexpansion_coefficients(corr, p_max, radius=mp.mpf(1) / 16, points=64, prec=None):
    """Taylor coefficients in ``e = 1/N`` of ``Theta(u(e), t(e))`` at fixed base.

    Independent of the heat equation: a Cauchy DFT over ``|e| = radius`` of
    direct lattice sums.  Aliasing is ``O(radius^points)``.
    """
    prec = resolve(prec)
    with working(prec):
        jet = corr.jet
        g = jet.gbar
        wp = prec + int(points * mp.log(1 / radius, 2)) // 2 + 20
        values = []
        with mp.workprec(wp):
            for j in range(points):
                e = radius * mp.expjpi(mp.mpf(2 * j) / points)
                u = list(jet.u)
                for k, v in corr.u.items():
                    for i in range(g):
                        u[i] += e ** (2 * k - 1) * v[i]
                t = jet.t.copy()
                for q, m in corr.t.items():
                    for a in range(g):
                        for b in range(g):
                            t[a, b] += e ** (2 * q) * m[a][b]
                values.append(theta_eval(u, t, jet.a, jet.b, 0, wp).value)
            coeffs = []
            for p in range(p_max + 1):
                acc = mp.fsum(values[j] * mp.expjpi(-mp.mpf(2 * j * p) / points)
                              for j in range(points))
                coeffs.append(acc / (points * radius ** p))
        return [+c for c in coeffs]


def assembled_coefficients(table, jet, p_max):
    """Coefficient of ``e^p`` in the assembled series at the jet's base point."""
    g = table.gbar
    A = assembled_series(lambda h, l, idx: table.get(h, l)[idx], g, p_max)
    deriv = lambda key: jet.d(len(key))[key]
    return [order_value(A, p, deriv) for p in range(p_max + 1)]


def round_trip_residuals(corr, p_max=None, prec=None, **kw):
    """Relative mismatch per order between re-expansion and assembled series."""
    p_max = 2 * corr.q_max if p_max is None else p_max
    prec = resolve(prec)
    with working(prec):
        lhs = reexpansion_coefficients(corr, p_max, prec=prec, **kw)
        rhs = assembled_coefficients(corr.table, corr.jet, p_max)
        return [abs(a - b) / abs(b) if b != 0 else abs(a) for a, b in zip(lhs, rhs)]
