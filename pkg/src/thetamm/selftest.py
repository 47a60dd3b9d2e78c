"""Quick invariant suite behind ``thetamm selftest``.

Each check returns ``(name, status, detail)`` with status PASS, FAIL or
SKIP.  Checks whose thresholds need high precision are skipped below
``PRECISION_BOUND`` bits rather than failed.
"""
import random
from fractions import Fraction

import mpmath as mp

from .precision import working

PRECISION_BOUND = 200


def _theta_identities(prec):
    from .theta import heat_residual, jacobi_relation_residual, quasi_periodicity_residual
    u, t = mp.mpc("0.3", "0.2"), mp.mpc("-1.1", "0.7")
    worst = max(heat_residual(u, t, [mp.mpf("-3.4")], [mp.mpf("0.25")], prec),
                jacobi_relation_residual(u, t, [mp.mpf("0.37")], [mp.mpf("0.25")], 20, prec),
                quasi_periodicity_residual(u, t, [mp.mpf("0.37")], [mp.mpf("0.25")], [2], [-3], prec))
    return worst < mp.mpf("1e-20"), f"max residual {mp.nstr(worst, 3)}"


def _enumeration(fault):
    from .expansion import brute_force_terms, enumerate_stable_terms
    for p in range(7):
        terms = {t.parts: t.weight for t in enumerate_stable_terms(p)}
        if fault == "weights" and p == 2:
            key = next(iter(terms))
            terms[key] += Fraction(1, 1000)
        if terms != brute_force_terms(p):
            return False, f"mismatch at p={p}"
    return True, "p <= 6 agree with brute force"


def _pairings():
    from .holan import double_factorial, enumerate_pairings
    for ranks in ([2], [4], [3, 3], [2, 2, 2], [1, 1, 2, 4], [3, 3, 2, 2], [6, 6]):
        if enumerate_pairings(ranks).total != double_factorial(sum(ranks) - 1):
            return False, f"total wrong for {ranks}"
    split = sorted(s.multiplicity for s in enumerate_pairings([3, 3]))
    return split == [6, 9], "totals (sum l - 1)!!, split 9 + 6"


def _wick():
    from .holan import gaussian_moment_identity, structure_match
    kappa = [[Fraction(1, 2), Fraction(1, 3)], [Fraction(1, 3), Fraction(2)]]
    ok = all(a == b for a, b in (gaussian_moment_identity(kappa, l) for l in range(1, 5)))
    return ok and structure_match(4).ok, "Gaussian moments and kappa/Theta structure exact"


def _round_trip(prec):
    from .invariants import random_table
    from .resummation import round_trip_residuals, solve_corrections
    table = random_table(1, 4, random.Random(7))
    table.eps_star = [mp.mpf(1) / 2]
    corr = solve_corrections(table, None, 2, N=12, nu=[mp.mpf("0.1")], f0p=[mp.mpf("0.02")],
                             tau=mp.matrix([[mp.mpc(0, "1.3")]]), prec=prec)
    worst = max(round_trip_residuals(corr, prec=prec))
    return worst < mp.mpf("1e-25"), f"max residual {mp.nstr(worst, 3)}"


def _virasoro(prec):
    from .contour import GeneralizedPath, Potential
    from .oracle import Oracle
    pot = Potential((0, mp.mpf("-1.5"), 0, mp.mpf("0.25")))
    oracle = Oracle(pot, 3, prec=prec)
    path = GeneralizedPath.from_coefficients({2: 1, 3: 1})
    coeffs = {i: c for c, i in path.terms}
    worst = max(abs(oracle.virasoro(k, coeffs, 3)[0]) for k in range(-1, 3))
    return worst < mp.mpf("1e-30"), f"max normalized residual {mp.nstr(worst, 3)}"


def run_selftest(prec=256, fault=None):
    results = []
    high = prec >= PRECISION_BOUND

    def record(name, fn, needs_precision=False):
        if needs_precision and not high:
            results.append((name, "SKIP", f"needs >= {PRECISION_BOUND} bits"))
            return
        try:
            with working(prec):
                ok, detail = fn()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, "PASS" if ok else "FAIL", detail))

    record("theta identities", lambda: _theta_identities(prec), True)
    record("stable-term enumeration", lambda: _enumeration(fault))
    record("pairing totals", _pairings)
    record("Wick identities", _wick)
    record("resummation round trip", lambda: _round_trip(prec), True)
    record("Virasoro residuals", lambda: _virasoro(prec), True)
    return results
