import mpmath as mp
import pytest

from thetamm.contour import GeneralizedPath, Potential, clear_cache


@pytest.fixture(autouse=True)
def _precision():
    """Every test starts at the default working precision with a fresh moment cache."""
    old = mp.mp.prec
    mp.mp.prec = 256
    clear_cache()
    yield
    mp.mp.prec = old


@pytest.fixture
def quartic():
    """Symmetric double well V = x^4/4 - 3x^2/2."""
    return Potential((0, mp.mpf("-1.5"), 0, mp.mpf("0.25")))


@pytest.fixture
def gaussian():
    return Potential((0, mp.mpf("0.5")))


@pytest.fixture
def real_line():
    """gamma_2 + gamma_3 of the quartic chain basis, i.e. the real axis."""
    return GeneralizedPath.from_coefficients({2: 1, 3: 1})


def rel(a, b):
    return abs(a - b) / abs(b)
