"""Deterministic text forms of canonical expressions.

``expr_text`` produces the DSL-like form that :func:`dirac_ham.frontend.parse_expr`
reads back; ``expr_sexpr`` is a fully explicit S-expression used by golden files.
"""

from __future__ import annotations

from fractions import Fraction

from .atoms import Atom, Kind
from .coefficient import mono_text


def _ix(ix) -> str:
    return str(ix)


def atom_text(a: Atom, default_point: str = "x") -> str:
    if a.kind == Kind.EPSILON:
        return "eps[" + ",".join(map(_ix, a.indices)) + "]"
    if a.kind == Kind.KRONECKER:
        return "delta[" + ",".join(map(_ix, a.indices)) + "]"
    if a.kind == Kind.DELTA:
        core = f"ddelta({a.points[0]},{a.points[1]})"
    else:
        core = a.name
        if a.indices:
            core += "[" + ",".join(map(_ix, a.indices)) + "]"
    for _ in range(a.tderiv):
        core = f"dt({core})"
    for d in reversed(a.derivs):
        core = f"d[{_ix(d)}]({core})"
    if a.kind != Kind.DELTA and a.points and a.point != default_point:
        core += "@" + a.point
    return core


def coeff_text(value: Fraction, mono) -> str:
    parts = mono_text(mono)
    out = []
    if value != 1 or not parts:
        out.append(str(value))
    out.extend(parts)
    return "*".join(out)


def term_text(value: Fraction, mono, atoms) -> str:
    parts = []
    c = coeff_text(value, mono)
    if c != "1" or not atoms:
        parts.append(c)
    parts.extend(atom_text(a) for a in atoms)
    return "*".join(parts)


def expr_text(e) -> str:
    terms = list(e.terms)
    if not terms:
        return "0"
    out = ""
    for n, (v, m, at) in enumerate(terms):
        neg = v < 0
        t = term_text(-v if neg else v, m, at)
        if n == 0:
            out = ("-" if neg else "") + t
        else:
            out += (" - " if neg else " + ") + t
    return out


def _atom_sexpr(a: Atom) -> str:
    kind = a.kind.name.lower()
    idx = " ".join(map(_ix, a.indices))
    der = " ".join(map(_ix, a.derivs))
    pts = " ".join(a.points)
    name = a.name or "_"
    return f"({kind} {name} ({idx}) ({der}) {a.tderiv} ({pts}))"


def expr_sexpr(e) -> str:
    terms = []
    for v, m, at in e.terms:
        mono = " ".join(f"({k} {p})" for k, p in m)
        atoms = " ".join(_atom_sexpr(a) for a in at)
        terms.append(f"(* {v} ({mono}) ({atoms}))")
    return "(+" + "".join(" " + t for t in terms) + ")"
