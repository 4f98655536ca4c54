from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from mlsb.errors import PrecisionUnavailable
from mlsb.numeric import check_prec, from_decimal, real, to_decimal


def test_expression_parameters():
    with mp.workprec(200):
        assert real("3*sqrt(3)") == 3 * mp.sqrt(3)
        assert real("(6)/2") == 3
        assert real(Fraction(1, 3)) == mp.mpf(1) / 3
        assert real(0.1) == mp.mpf("0.1")
        assert real("-pi/2") == -mp.pi / 2


def test_expression_rejects_names():
    with pytest.raises(ValueError):
        real("__import__('os')")
    with pytest.raises(TypeError):
        real(True)


def test_precision_bounds():
    assert check_prec(53) == 53 and check_prec(4096) == 4096
    for bad in (52, 4097):
        with pytest.raises(PrecisionUnavailable):
            check_prec(bad)


def test_integers_render_plainly():
    assert to_decimal(mp.mpf(4), 64) == "4"
    assert to_decimal(mp.mpf(8), 512) == "8"


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).filter(lambda x: x != 0),
       st.sampled_from([53, 64, 128, 256, 512]))
def test_decimal_round_trip(x, prec):
    with mp.workprec(prec):
        v = mp.mpf(x) / 3
        assert from_decimal(to_decimal(v, prec), prec) == v
