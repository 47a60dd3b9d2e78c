"""Exact conversions between mpmath numbers and gmpy2 MPFR/MPC values.

The inner loops (moment accumulation, LU elimination) run on gmpy2 types,
which are several times faster than mpmath's pure-Python wrappers.
"""
import gmpy2
import mpmath as mp


def context(prec):
    return gmpy2.context(gmpy2.get_context(), precision=prec,
                         real_prec=prec, imag_prec=prec)


def _real(x):
    sign, man, exp, _ = mp.mpf(x)._mpf_
    if not man:
        return gmpy2.mpfr(0)
    value = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -value if sign else value


def to_gmp(z):
    """mpmath (or Python) complex number -> gmpy2.mpc, exact at current context."""
    z = mp.mpc(z)
    return gmpy2.mpc(_real(z.real), _real(z.imag))


def real_to_mp(x):
    if x == 0:
        return mp.mpf(0)
    man, exp = x.as_mantissa_exp()
    return mp.mpf((int(man), int(exp)))


def to_mp(z):
    return mp.mpc(real_to_mp(z.real), real_to_mp(z.imag))
