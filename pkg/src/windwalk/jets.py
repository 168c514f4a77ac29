"""Second-order bivariate truncated Taylor arithmetic about (lam, z) = (1, 1).

A Jet2 stores the coefficients of

    c00 + c10*dl + c01*dz + c20*dl^2 + c11*dl*dz + c02*dz^2

with dl = lam - 1, dz = z - 1; products truncate above total degree two.
Propagating jets through a determinant yields all five partial derivatives
in a single pass, with no finite-difference cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Real


@dataclass(frozen=True)
class Jet2:
    c00: float = 0.0
    c10: float = 0.0
    c01: float = 0.0
    c20: float = 0.0
    c11: float = 0.0
    c02: float = 0.0

    @staticmethod
    def const(value: float) -> "Jet2":
        return Jet2(float(value))

    @staticmethod
    def var_lambda() -> "Jet2":
        """The coordinate function lam, expanded about 1."""
        return Jet2(1.0, c10=1.0)

    @staticmethod
    def var_z() -> "Jet2":
        """The coordinate function z, expanded about 1."""
        return Jet2(1.0, c01=1.0)

    def __add__(self, other):
        other = _coerce(other)
        return Jet2(
            self.c00 + other.c00,
            self.c10 + other.c10,
            self.c01 + other.c01,
            self.c20 + other.c20,
            self.c11 + other.c11,
            self.c02 + other.c02,
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.c00, -self.c10, -self.c01, -self.c20, -self.c11, -self.c02)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        o = _coerce(other)
        return Jet2(
            self.c00 * o.c00,
            self.c00 * o.c10 + self.c10 * o.c00,
            self.c00 * o.c01 + self.c01 * o.c00,
            self.c00 * o.c20 + self.c10 * o.c10 + self.c20 * o.c00,
            self.c00 * o.c11 + self.c10 * o.c01 + self.c01 * o.c10 + self.c11 * o.c00,
            self.c00 * o.c02 + self.c01 * o.c01 + self.c02 * o.c00,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Jet2":
        if self.c00 == 0.0:
            raise ZeroDivisionError("Jet2 with zero constant term has no inverse")
        a = self.c00
        # 1/(a + e) = 1/a - e/a^2 + e^2/a^3 with e the degree>=1 part.
        inv_a = 1.0 / a
        e10, e01, e20, e11, e02 = self.c10, self.c01, self.c20, self.c11, self.c02
        return Jet2(
            inv_a,
            -e10 * inv_a**2,
            -e01 * inv_a**2,
            (e10 * e10 * inv_a - e20) * inv_a**2,
            (2.0 * e10 * e01 * inv_a - e11) * inv_a**2,
            (e01 * e01 * inv_a - e02) * inv_a**2,
        )

    def __truediv__(self, other):
        return self * _coerce(other).inverse()

    def __rtruediv__(self, other):
        return _coerce(other) * self.inverse()

    # Partial derivatives of the represented function at (1, 1).
    @property
    def value(self) -> float:
        return self.c00

    @property
    def d_lambda(self) -> float:
        return self.c10

    @property
    def d_z(self) -> float:
        return self.c01

    @property
    def d2_lambda(self) -> float:
        return 2.0 * self.c20

    @property
    def d_lambda_z(self) -> float:
        return self.c11

    @property
    def d2_z(self) -> float:
        return 2.0 * self.c02


def _coerce(value) -> Jet2:
    if isinstance(value, Jet2):
        return value
    if isinstance(value, Real):
        return Jet2(float(value))
    raise TypeError(f"cannot mix Jet2 with {type(value)!r}")


def power_jet(exponent: float) -> Jet2:
    """Jet of z**w about z = 1 for a real (possibly non-integer) weight w,
    via the generalized binomial expansion."""
    w = float(exponent)
    return Jet2(1.0, c01=w, c02=0.5 * w * (w - 1.0))


def series_jet(value: float, d1: float, d2: float) -> Jet2:
    """Jet of a function of lam alone from its value and two derivatives."""
    return Jet2(float(value), c10=float(d1), c20=0.5 * float(d2))
