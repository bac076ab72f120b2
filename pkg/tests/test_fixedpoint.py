from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcva.fixedpoint import (
    FixedPoint,
    FixedPointRangeError,
    decode,
    decode_codes,
    encode,
    encode_codes,
    encode_signed,
    is_representable,
    max_representable,
    quantize,
)


def test_bits_layout():
    fp = encode(Fraction(5, 4), 3, 2)  # 001.01
    assert fp.bits == "00101"
    assert fp.int_bits == {3: 0, 2: 0, 1: 1}
    assert fp.frac_bits == {1: 0, 2: 1}
    assert FixedPoint.from_bits("00101", 3, 2) == fp


def test_exact_values_round_trip():
    for r in [0, Fraction(1, 2), Fraction(3, 4), 7, Fraction(2**16 - 1)]:
        assert decode(encode(r, 16, 32)) == r


def test_ties_go_toward_zero():
    # 1/8 between 0 and 1/4 at c2=2
    assert decode(encode(Fraction(1, 8), 2, 2)) == 0
    assert decode(encode(Fraction(3, 8), 2, 2)) == Fraction(1, 4)
    assert decode(encode(Fraction(5, 16), 2, 2)) == Fraction(1, 4)
    assert decode(encode(Fraction(7, 16), 2, 2)) == Fraction(1, 2)


def test_range_errors():
    with pytest.raises(FixedPointRangeError):
        encode(4, 2, 2)
    with pytest.raises(FixedPointRangeError):
        encode(-1, 2, 2)
    # rounds up to 2^c1, which does not fit
    with pytest.raises(FixedPointRangeError):
        encode(Fraction(4) - Fraction(1, 64), 2, 2)
    assert decode(encode(max_representable(2, 2), 2, 2)) == max_representable(2, 2)


def test_signed_parts():
    s = encode_signed(-2.5, 4, 4)
    assert float(s) == -2.5
    assert float(decode(s.positive_part)) == 0.0
    assert float(decode(s.negative_part)) == 2.5


@given(st.fractions(min_value=0, max_value=Fraction(2**8 - 1)), st.integers(1, 12))
def test_error_at_most_half_ulp(r, c2):
    q = decode(encode(r, 8, c2))
    assert abs(q - r) <= Fraction(1, 2 ** (c2 + 1))


@given(st.lists(st.floats(0, 60000, allow_nan=False), min_size=1, max_size=20))
def test_vector_path_matches_scalar(xs):
    codes = encode_codes(xs, 16, 32)
    for x, c in zip(xs, codes):
        assert encode(Fraction(x), 16, 32).code == int(c)


@given(st.lists(st.floats(-1000, 1000, allow_nan=False), min_size=1, max_size=20))
def test_signed_codes_round_trip(xs):
    q = quantize(xs, 16, 32, signed=True)
    assert np.all(np.abs(q - np.asarray(xs)) <= 2.0**-33)
    assert np.array_equal(decode_codes(encode_codes(q, 16, 32, signed=True), 16, 32, signed=True), q)


def test_is_representable():
    assert is_representable(0.75, 2, 2)
    assert not is_representable(0.1, 2, 2)
