"""Exact Gaussian-rational scalars.

Real values are plain ``Fraction`` objects.  A value with a nonzero
imaginary part is a ``Gaussian``.  The constructor ``qi`` always demotes
to ``Fraction`` when the imaginary part vanishes, so equality and hashing
stay structural.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Union


class Gaussian:
    __slots__ = ("re", "im")

    def __init__(self, re: Fraction, im: Fraction):
        self.re = re
        self.im = im

    # arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Gaussian):
            return qi(self.re + other.re, self.im + other.im)
        if isinstance(other, (int, Fraction)):
            return Gaussian(self.re + other, self.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Gaussian(-self.re, -self.im)

    def __sub__(self, other):
        if isinstance(other, Gaussian):
            return qi(self.re - other.re, self.im - other.im)
        if isinstance(other, (int, Fraction)):
            return Gaussian(self.re - other, self.im)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, Fraction)):
            return Gaussian(other - self.re, -self.im)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Gaussian):
            return qi(self.re * other.re - self.im * other.im,
                      self.re * other.im + self.im * other.re)
        if isinstance(other, (int, Fraction)):
            if not other:
                return Fraction(0)
            return Gaussian(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Gaussian):
            n = other.re * other.re + other.im * other.im
            return qi((self.re * other.re + self.im * other.im) / n,
                      (self.im * other.re - self.re * other.im) / n)
        if isinstance(other, (int, Fraction)):
            return Gaussian(self.re / other, self.im / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            n = self.re * self.re + self.im * self.im
            return qi(other * self.re / n, -other * self.im / n)
        return NotImplemented

    def __pow__(self, e: int):
        out: Scalar = Fraction(1)
        base: Scalar = self
        if e < 0:
            base = 1 / base
            e = -e
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    # comparison -----------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Gaussian):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return False  # normalized values never have im == 0
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return True

    def conjugate(self):
        return Gaussian(self.re, -self.im)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"Gaussian({fmt(self.re)}, {fmt(self.im)})"

    def __str__(self):
        return fmt(self)


Scalar = Union[Fraction, Gaussian]

ZERO = Fraction(0)
ONE = Fraction(1)
I = Gaussian(Fraction(0), Fraction(1))


def qi(re, im=0) -> Scalar:
    re = Fraction(re)
    im = Fraction(im)
    if im == 0:
        return re
    return Gaussian(re, im)


def conj(x):
    if isinstance(x, Gaussian):
        return Gaussian(x.re, -x.im)
    return x


def re_part(x) -> Fraction:
    return x.re if isinstance(x, Gaussian) else Fraction(x)


def im_part(x) -> Fraction:
    return x.im if isinstance(x, Gaussian) else Fraction(0)


def is_real(x) -> bool:
    return not isinstance(x, Gaussian)


def to_complex(x) -> complex:
    if isinstance(x, Gaussian):
        return complex(x)
    return complex(float(x))


def _fmt_frac(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def fmt(x) -> str:
    """Render as the exact string format used in instance files."""
    if not isinstance(x, Gaussian):
        return _fmt_frac(Fraction(x))
    re_s = _fmt_frac(x.re)
    im = x.im
    sign = "-" if im < 0 else "+"
    im_s = _fmt_frac(abs(im))
    if x.re == 0:
        return f"{'-' if im < 0 else ''}{im_s}*i"
    return f"{re_s}{sign}{im_s}*i"


_RAT = re.compile(r"[+-]?\d+(?:/\d+)?")


def _rat(t: str, whole: str) -> Fraction:
    if t in ("", "+"):
        return Fraction(1)
    if t == "-":
        return Fraction(-1)
    if not _RAT.fullmatch(t):
        raise ValueError(f"not an exact scalar: {whole!r}")
    return Fraction(t)


def parse(s) -> Scalar:
    """Parse ``"p/q"``, ``"p/q+r/s*i"``, ``"-3*i"`` or an int."""
    if isinstance(s, bool):
        raise ValueError(f"not a scalar: {s!r}")
    if isinstance(s, int):
        return Fraction(s)
    if isinstance(s, (Fraction, Gaussian)):
        return s
    if not isinstance(s, str):
        raise ValueError(f"not an exact scalar: {s!r}")
    t = s.replace(" ", "")
    if not t:
        raise ValueError("empty scalar")
    if not t.endswith("i"):
        if not _RAT.fullmatch(t):
            raise ValueError(f"not an exact rational: {s!r}")
        return Fraction(t)
    body = t[:-1]
    if body.endswith("*"):
        body = body[:-1]
    cut = max(body.rfind("+"), body.rfind("-"))
    if cut > 0:
        re_s, im_s = body[:cut], body[cut:]
        if not _RAT.fullmatch(re_s):
            raise ValueError(f"not an exact scalar: {s!r}")
        return qi(Fraction(re_s), _rat(im_s, s))
    return qi(0, _rat(body, s))
