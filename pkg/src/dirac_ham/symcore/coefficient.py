"""Exact coefficients: a rational number times a monomial in opaque constants.

The constants ``c``, ``pi`` and ``alpha`` are always available; models may
declare more.  ``I`` is the imaginary unit and obeys ``I^2 = -1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

BUILTIN_SYMBOLS = ("c", "pi", "alpha", "I")
IMAGINARY = "I"

Monomial = tuple  # tuple[tuple[str, int], ...], sorted by name, no zero exponents


def mono_mul(a: Monomial, b: Monomial) -> tuple[int, Monomial]:
    """Multiply two monomials; returns (sign, monomial).  The sign comes from I^2."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    exps = dict(a)
    for name, e in b:
        exps[name] = exps.get(name, 0) + e
    return _normalize(exps)


def mono_pow(a: Monomial, n: int) -> tuple[int, Monomial]:
    return _normalize({name: e * n for name, e in a})


def _normalize(exps: dict) -> tuple[int, Monomial]:
    sign = 1
    if IMAGINARY in exps:
        e = exps[IMAGINARY] % 4
        if e >= 2:
            sign = -1
            e -= 2
        exps[IMAGINARY] = e
    return sign, tuple(sorted((k, v) for k, v in exps.items() if v != 0))


def mono_text(m: Monomial) -> list[str]:
    out = []
    for name, e in m:
        out.append(name if e == 1 else f"{name}^{e}")
    return out


@dataclass(frozen=True)
class Coefficient:
    rational: Fraction
    symbols: Monomial = ()

    def __mul__(self, other: "Coefficient") -> "Coefficient":
        sign, m = mono_mul(self.symbols, other.symbols)
        return Coefficient(self.rational * other.rational * sign, m)

    def __neg__(self) -> "Coefficient":
        return Coefficient(-self.rational, self.symbols)

    def inverse(self) -> "Coefficient":
        if self.rational == 0:
            raise ZeroDivisionError("inverse of a zero coefficient")
        sign, m = mono_pow(self.symbols, -1)
        return Coefficient(sign / self.rational, m)

    def __truediv__(self, other: "Coefficient") -> "Coefficient":
        return self * other.inverse()

    def __str__(self) -> str:
        parts = mono_text(self.symbols)
        if self.rational != 1 or not parts:
            parts.insert(0, str(self.rational))
        return "*".join(parts)
