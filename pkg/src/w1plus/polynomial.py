"""Univariate polynomials in t with exact rational coefficients.

Coefficients are ``gmpy2.mpq``; floats convert exactly, so a polynomial built
from double-precision inputs carries no rounding of its own. Products and
derivatives are therefore exact and identities between curve objects can be
checked coefficient by coefficient.
"""

from __future__ import annotations

from math import comb
from typing import Iterable, Sequence

import numpy as np
from gmpy2 import mpq

ZERO = mpq(0)
ONE = mpq(1)


def exact(x) -> mpq:
    """Exact rational value of an int, float, Fraction or mpq."""
    if isinstance(x, float):
        return mpq(x)
    try:
        return mpq(x)
    except TypeError:
        return mpq(x.numerator, x.denominator)


class Polynomial:
    """Dense coefficient vector, lowest degree first, trailing zeros trimmed."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        c = [exact(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.c: tuple = tuple(c)

    @classmethod
    def _raw(cls, c: list) -> "Polynomial":
        while c and c[-1] == 0:
            c.pop()
        p = cls.__new__(cls)
        p.c = tuple(c)
        return p

    @classmethod
    def constant(cls, v) -> "Polynomial":
        return cls([v])

    @classmethod
    def monomial(cls, k: int, coeff=1) -> "Polynomial":
        return cls([0] * k + [coeff])

    @classmethod
    def one_minus_t_power(cls, k: int) -> "Polynomial":
        """(1 - t)**k."""
        return cls._raw([mpq(comb(k, j) * (-1) ** j) for j in range(k + 1)])

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.c) - 1

    def coeff(self, k: int):
        return self.c[k] if 0 <= k < len(self.c) else ZERO

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        return self.c == other.c

    def __hash__(self):
        return hash(self.c)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, v in enumerate(b):
            out[i] = out[i] + v
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw([-v for v in self.c])

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            s = exact(other)
            return Polynomial._raw([v * s for v in self.c])
        a, b = self.c, other.c
        if not a or not b:
            return Polynomial._raw([])
        out = [ZERO] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
        return Polynomial._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        s = exact(scalar)
        return Polynomial._raw([v / s for v in self.c])

    def derivative(self) -> "Polynomial":
        return Polynomial._raw([self.c[k] * k for k in range(1, len(self.c))])

    def reflect(self) -> "Polynomial":
        """The polynomial s -> p(1 - s)."""
        out = [ZERO] * len(self.c)
        for k, ck in enumerate(self.c):
            if ck == 0:
                continue
            for j in range(k + 1):
                term = ck * comb(k, j)
                out[j] += -term if j % 2 else term
        return Polynomial._raw(out)

    def divmod(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        """Exact long division: ``self = q * other + r`` with deg r < deg other."""
        if not other.c:
            raise ZeroDivisionError("polynomial division by zero")
        r = list(self.c)
        dv = other.c
        lead = dv[-1]
        q = [ZERO] * max(len(r) - len(dv) + 1, 0)
        for k in range(len(q) - 1, -1, -1):
            coef = r[k + len(dv) - 1] / lead
            q[k] = coef
            if coef:
                for j, dj in enumerate(dv):
                    r[k + j] -= coef * dj
        return Polynomial._raw(q), Polynomial._raw(r[: len(dv) - 1])

    def eval_exact(self, t) -> mpq:
        t = exact(t)
        acc = ZERO
        for v in reversed(self.c):
            acc = acc * t + v
        return acc

    def __call__(self, t) -> float:
        """Value at ``t``, computed exactly and rounded once."""
        return float(self.eval_exact(t))

    def floats(self) -> list[float]:
        return [float(v) for v in self.c]

    def eval_float(self, ts) -> np.ndarray:
        """Horner in double precision. Accurate when coefficients share a sign."""
        return np.polynomial.polynomial.polyval(np.asarray(ts, dtype=float), np.array(self.floats() or [0.0]))

    def max_abs_coeff(self) -> float:
        return max((abs(float(v)) for v in self.c), default=0.0)

    def __repr__(self):
        return f"Polynomial({self.floats()!r})"


def max_abs_coeff(polys: Iterable[Polynomial]) -> float:
    return max((p.max_abs_coeff() for p in polys), default=0.0)


def interpolate(ts: Sequence, ys: Sequence) -> Polynomial:
    """Exact Newton interpolation through the points (ts[i], ys[i])."""
    ts = [exact(t) for t in ts]
    coef = [exact(y) for y in ys]
    n = len(ts)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (ts[i] - ts[i - j])
    p = Polynomial([coef[-1]])
    for i in range(n - 2, -1, -1):
        p = p * Polynomial([-ts[i], 1]) + coef[i]
    return p
