"""Conversion between atom-free (or kernel) expressions and sympy.

Only linear algebra is delegated to sympy.  Constants stay opaque symbols
(``pi`` is *not* sympy's number) so results convert back exactly.
"""

from __future__ import annotations

from fractions import Fraction

import sympy

from .atoms import DIM, Kind, dirac
from .coefficient import IMAGINARY, mono_mul
from .expr import Expr
from .text import atom_text

WAVE = tuple(sympy.Symbol(f"K{n}") for n in range(1, DIM + 1))


def _symbol(name: str):
    if name == IMAGINARY:
        return sympy.I
    return sympy.Symbol(name, positive=name in ("c", "pi"))


def mono_to_sympy(value: Fraction, mono) -> sympy.Expr:
    out = sympy.Rational(value.numerator, value.denominator)
    for name, e in mono:
        out *= _symbol(name) ** e
    return out


def to_sympy(e: Expr, kernel: tuple = None, atoms_as_symbols: bool = False) -> sympy.Expr:
    """Scalar value of an atom-free expression.

    With ``kernel=(p, q)`` terms may also carry one concrete-index
    ``ddelta(p, q)``; each derivative on the first label becomes ``K_j``
    (the Fourier symbol of d/dx_j, dropping the factor i).  With
    ``atoms_as_symbols`` every other atom becomes an opaque symbol named by
    its text form, which is enough for rank computations over field values.
    """
    out = sympy.Integer(0)
    for val, mono, atoms in e.terms:
        term = mono_to_sympy(val, mono)
        for a in atoms:
            if kernel is not None and a.kind == Kind.DELTA and tuple(a.points) == tuple(kernel):
                for d in a.derivs:
                    if not isinstance(d, int):
                        raise ValueError("kernel derivatives must carry concrete indices")
                    term *= WAVE[d - 1]
            elif kernel is not None and a.kind == Kind.DELTA and tuple(a.points) == tuple(kernel[::-1]):
                for d in a.derivs:
                    if not isinstance(d, int):
                        raise ValueError("kernel derivatives must carry concrete indices")
                    term *= -WAVE[d - 1]
            elif atoms_as_symbols and a.kind != Kind.DELTA:
                term *= sympy.Symbol(atom_text(a))
            else:
                raise ValueError(f"cannot convert atom {a} to a scalar")
        out += term
    return sympy.expand(out)


def from_sympy(value, kernel: tuple = None) -> Expr:
    """Inverse of :func:`to_sympy` for polynomials in the constants (and ``K``)."""
    value = sympy.expand(sympy.nsimplify(value) if value.has(sympy.Float) else value)
    if value == 0:
        return Expr.zero()
    total = Expr.zero()
    for t in sympy.Add.make_args(value):
        coeff, factors = t.as_coeff_mul()
        mono = ()
        rational = Fraction(int(sympy.numer(coeff)), int(sympy.denom(coeff)))
        derivs = []
        for f in factors:
            base, exp = f.as_base_exp()
            if base == sympy.I:
                sign, mono = mono_mul(mono, ((IMAGINARY, int(exp)),))
                rational *= sign
                continue
            if not isinstance(base, sympy.Symbol) or not exp.is_integer:
                raise ValueError(f"cannot convert {t} back to an exact coefficient")
            if base in WAVE:
                if kernel is None or exp < 0:
                    raise ValueError("wave-vector symbol outside a kernel")
                derivs.extend([WAVE.index(base) + 1] * int(exp))
                continue
            sign, mono = mono_mul(mono, ((base.name, int(exp)),))
            rational *= sign
        piece = Expr.number(rational).scale(1, mono)
        if kernel is not None:
            piece = piece * Expr.atom(dirac(kernel[0], kernel[1], derivs))
        total = total + piece
    return total
