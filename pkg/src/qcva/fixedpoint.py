"""Fixed-point rational encoding Q(a, b) of non-negative reals.

A value is stored as c1 integer bits a_{c1}..a_1 followed by c2 fractional
bits b_1..b_{c2}; the integer code of the concatenated bit string divided by
2^c2 is the represented rational.  Rounding is to nearest with ties toward
zero.  Signed values carry a separate sign flag next to the magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np

from .config import DEFAULT_C1, DEFAULT_C2


class FixedPointRangeError(ValueError):
    pass


def _check_widths(c1: int, c2: int) -> None:
    if int(c1) != c1 or int(c2) != c2 or c1 < 1 or c2 < 1:
        raise ValueError(f"bit widths must be positive integers, got c1={c1}, c2={c2}")


def max_representable(c1: int, c2: int) -> Fraction:
    return Fraction(2 ** (c1 + c2) - 1, 2**c2)


def _round_code(x: Fraction, c2: int) -> int:
    # nearest multiple of 2^-c2, exact ties go to the smaller magnitude
    scaled = x * 2**c2
    fl = math.floor(scaled)
    return fl + 1 if scaled - fl > Fraction(1, 2) else fl


@dataclass(frozen=True)
class FixedPoint:
    c1: int
    c2: int
    code: int

    def __post_init__(self):
        _check_widths(self.c1, self.c2)
        if not 0 <= self.code < 2 ** (self.c1 + self.c2):
            raise FixedPointRangeError(f"code {self.code} does not fit in {self.c1 + self.c2} bits")

    @property
    def width(self) -> int:
        return self.c1 + self.c2

    @property
    def bits(self) -> str:
        """Bit string a_{c1} ... a_1 b_1 ... b_{c2}."""
        return format(self.code, f"0{self.width}b")

    @property
    def int_bits(self) -> dict:
        """Integer bits keyed by subscript: a_i carries weight 2^(i-1)."""
        return {i: (self.code >> (self.c2 + i - 1)) & 1 for i in range(1, self.c1 + 1)}

    @property
    def frac_bits(self) -> dict:
        """Fractional bits keyed by subscript: b_i carries weight 2^-i."""
        return {i: (self.code >> (self.c2 - i)) & 1 for i in range(1, self.c2 + 1)}

    def decode(self) -> Fraction:
        total = Fraction(0)
        for i, a in self.int_bits.items():
            total += a * 2 ** (i - 1)
        for i, b in self.frac_bits.items():
            total += Fraction(b, 2**i)
        return total

    def __float__(self) -> float:
        return self.code / 2.0**self.c2

    @classmethod
    def from_bits(cls, bits: str, c1: int, c2: int) -> "FixedPoint":
        if len(bits) != c1 + c2 or set(bits) - {"0", "1"}:
            raise ValueError(f"expected a {c1 + c2}-character bit string, got {bits!r}")
        return cls(c1, c2, int(bits, 2))


def encode(r, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2) -> FixedPoint:
    """Nearest representable value to r (ties toward zero)."""
    _check_widths(c1, c2)
    if isinstance(r, float) and not math.isfinite(r):
        raise FixedPointRangeError(f"cannot encode non-finite value {r}")
    x = Fraction(r)
    if x < 0:
        raise FixedPointRangeError(f"value {r} is below the lower bound 0")
    if x >= 2**c1:
        raise FixedPointRangeError(f"value {r} is not below the upper bound 2^{c1}")
    code = _round_code(x, c2)
    if code >= 2 ** (c1 + c2):
        # r sits within half a step of 2^c1 and would round past the largest code
        raise FixedPointRangeError(
            f"value {r} rounds to 2^{c1}, above the largest representable {float(max_representable(c1, c2))}"
        )
    return FixedPoint(c1, c2, code)


def decode(fp: FixedPoint) -> Fraction:
    return fp.decode()


@dataclass(frozen=True)
class SignedFixed:
    negative: bool
    magnitude: FixedPoint

    def decode(self) -> Fraction:
        m = self.magnitude.decode()
        return -m if self.negative else m

    def __float__(self) -> float:
        m = float(self.magnitude)
        return -m if self.negative else m

    @property
    def positive_part(self) -> FixedPoint:
        m = self.magnitude
        return FixedPoint(m.c1, m.c2, 0) if self.negative else m

    @property
    def negative_part(self) -> FixedPoint:
        m = self.magnitude
        return m if self.negative else FixedPoint(m.c1, m.c2, 0)


def encode_signed(r, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2) -> SignedFixed:
    x = Fraction(r)
    mag = encode(abs(x), c1, c2)
    # -0 is stored as +0 so that every value has a single encoding
    return SignedFixed(bool(x < 0 and mag.code != 0), mag)


# Vectorised helpers used by the oracles.  Codes are plain int64 with the
# sign flag (when used) in bit c1+c2, above the magnitude bits.


def _float_path_ok(c1: int, c2: int) -> bool:
    return c1 + c2 <= 52


def encode_codes(values, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, signed: bool = False) -> np.ndarray:
    _check_widths(c1, c2)
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise FixedPointRangeError("cannot encode non-finite values")
    if not signed and np.any(v < 0):
        j = int(np.argmax(v < 0))
        raise FixedPointRangeError(f"entry {j} = {v.flat[j]} is below the lower bound 0")
    mag = np.abs(v)
    if np.any(mag >= 2.0**c1):
        j = int(np.argmax(mag >= 2.0**c1))
        raise FixedPointRangeError(f"entry {j} = {v.flat[j]} has magnitude not below 2^{c1}")
    if _float_path_ok(c1, c2):
        scaled = mag * 2.0**c2  # exact: power-of-two scaling below 2^53
        fl = np.floor(scaled)
        codes = (fl + (scaled - fl > 0.5)).astype(np.int64)
    else:
        if c1 + c2 + int(signed) > 62:
            raise ValueError("widths above 62 bits are not supported by the vector path")
        codes = np.array([_round_code(Fraction(float(m)), c2) for m in mag.ravel()], dtype=np.int64).reshape(mag.shape)
    if np.any(codes >= 2 ** (c1 + c2)):
        j = int(np.argmax(codes >= 2 ** (c1 + c2)))
        raise FixedPointRangeError(f"entry {j} = {v.flat[j]} rounds past the largest representable value")
    if signed:
        neg = (v < 0) & (codes != 0)
        codes = codes | (neg.astype(np.int64) << (c1 + c2))
    return codes


def decode_codes(codes, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, signed: bool = False) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    mask = (1 << (c1 + c2)) - 1
    mag = (codes & mask).astype(float) / 2.0**c2
    if signed:
        neg = (codes >> (c1 + c2)) & 1
        mag = np.where(neg == 1, -mag, mag)
    return mag


def quantize(values, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, signed: bool = False) -> np.ndarray:
    """Round-trip an array through the encoding."""
    return decode_codes(encode_codes(values, c1, c2, signed), c1, c2, signed)


def is_representable(r: Real, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2) -> bool:
    x = Fraction(r)
    return 0 <= x <= max_representable(c1, c2) and (x * 2**c2).denominator == 1
