"""Working-precision handling.

Every numerical entry point accepts ``prec`` (bits).  ``None`` means the
package default, read once from ``THETAMM_PREC`` (fallback 256).
"""
import os
from contextlib import contextmanager

import mpmath as mp

DEFAULT_PREC = 256
ENV_VAR = "THETAMM_PREC"


def default_prec():
    raw = os.environ.get(ENV_VAR)
    if raw is None:
        return DEFAULT_PREC
    try:
        value = int(raw)
    except ValueError:
        return DEFAULT_PREC
    return max(value, 53)


def resolve(prec):
    return default_prec() if prec is None else int(prec)


@contextmanager
def working(prec):
    """Run a block at ``prec`` bits (or the default)."""
    with mp.workprec(resolve(prec)):
        yield mp.mp.prec


def tolerance(prec, slack_bits=30):
    """Default convergence tolerance 2**(-p + slack) at p bits."""
    return mp.ldexp(mp.mpf(1), -resolve(prec) + slack_bits)


def to_mpc(value):
    """Accept complex, numbers, strings, or [re, im] pairs."""
    if isinstance(value, (list, tuple)):
        re, im = value
        return mp.mpc(_to_mpf(re), _to_mpf(im))
    if isinstance(value, str):
        return mp.mpc(value)
    if isinstance(value, (mp.mpf, mp.mpc)):
        return mp.mpc(value)
    if isinstance(value, complex):
        return mp.mpc(value.real, value.imag)
    return mp.mpc(_to_mpf(value))


def _to_mpf(value):
    if isinstance(value, str):
        return mp.mpf(value)
    if isinstance(value, float):
        # decimal repr keeps config values like 0.1 exact in base 10 intent
        return mp.mpf(repr(value))
    return mp.mpf(value)
