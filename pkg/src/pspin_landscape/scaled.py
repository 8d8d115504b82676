"""Overflow-safe carrier for very large or very small reals.

Values are stored as ``mantissa * 2**exponent`` with ``|mantissa|`` in
``[1, 2)`` (or exactly zero).  Hermite functions at large argument and
shifted GOE determinants routinely leave the double range, so they are
passed around in this form or as plain natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ScaledValue:
    mantissa: float
    exponent: int

    def __post_init__(self):
        m = self.mantissa
        if m != 0.0 and not (1.0 <= abs(m) < 2.0):
            raise ValueError(f"mantissa {m!r} not normalized to [1, 2)")

    @classmethod
    def normalize(cls, mantissa: float, exponent: int = 0) -> "ScaledValue":
        """Bring an arbitrary finite ``mantissa * 2**exponent`` to normal form."""
        if mantissa == 0.0:
            return cls(0.0, 0)
        if not math.isfinite(mantissa):
            raise ValueError("mantissa must be finite")
        m, e = math.frexp(mantissa)  # m in [0.5, 1)
        return cls(2.0 * m, int(exponent) + e - 1)

    @classmethod
    def from_float(cls, value: float) -> "ScaledValue":
        return cls.normalize(float(value), 0)

    @classmethod
    def from_log(cls, log_abs: float, sign: float = 1.0) -> "ScaledValue":
        """Build from a natural log-magnitude and a sign."""
        if sign == 0 or log_abs == -math.inf:
            return cls(0.0, 0)
        l2 = log_abs / LN2
        e = math.floor(l2)
        m = 2.0 ** (l2 - e)
        if m >= 2.0:  # rounding at the boundary
            m, e = m / 2.0, e + 1
        return cls(math.copysign(m, sign), int(e))

    @property
    def sign(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        return math.copysign(1.0, self.mantissa)

    def log2(self) -> float:
        """Base-2 log of the magnitude (``-inf`` for zero)."""
        if self.mantissa == 0.0:
            return -math.inf
        return self.exponent + math.log2(abs(self.mantissa))

    def log(self) -> float:
        """Natural log of the magnitude (``-inf`` for zero)."""
        return self.log2() * LN2

    def to_float(self) -> float:
        """Convert to a double; under/overflows to 0 or inf like ``ldexp``."""
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.copysign(math.inf, self.mantissa)

    def __float__(self) -> float:
        return self.to_float()

    def __mul__(self, other):
        if isinstance(other, ScaledValue):
            return ScaledValue.normalize(self.mantissa * other.mantissa,
                                         self.exponent + other.exponent)
        return ScaledValue.normalize(self.mantissa * float(other), self.exponent)

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledValue(-self.mantissa, self.exponent)

    def __add__(self, other):
        other = other if isinstance(other, ScaledValue) else ScaledValue.from_float(other)
        if self.mantissa == 0.0:
            return other
        if other.mantissa == 0.0:
            return self
        e = max(self.exponent, other.exponent)
        total = (math.ldexp(self.mantissa, self.exponent - e)
                 + math.ldexp(other.mantissa, other.exponent - e))
        return ScaledValue.normalize(total, e)
