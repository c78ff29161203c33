"""Differential and distributional calculus on :class:`Expr`.

Spatial derivatives follow the Leibniz rule; a derivative of ``ddelta(p, q)``
is always stored on the first point label, so differentiating with respect
to the second label costs a sign.  Integrals are only ever taken against a
delta distribution (``integrate_point``) or kept formal as a
:class:`Functional` whose surface terms are dropped by policy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .atoms import DIM, Atom, Kind, dirac, fresh_names, kron
from .expr import Expr, _rename_dummies_away, _symbols_of, canonicalize
from .errors import NotAFunctional

_DYNAMIC = (Kind.FIELD, Kind.MOMENTUM, Kind.MULTIPLIER, Kind.CONSTRAINT)


def _single_point(e: Expr) -> str:
    pts = set()
    for _, _, atoms in e.terms:
        for a in atoms:
            if a.kind != Kind.DELTA:
                pts.update(a.points)
    if len(pts) > 1:
        raise ValueError(f"expression lives at several points {sorted(pts)}; name one")
    return pts.pop() if pts else "x"


def D(e: Expr, idx, point: str = None) -> Expr:
    """Spatial derivative with respect to coordinate ``idx`` of ``point``."""
    if point is None:
        point = _single_point(e)
    e = canonicalize(e)
    if isinstance(idx, str):
        e = _rename_dummies_away(e, {idx})
    out = []
    for atoms, mono, val in e._terms:
        for n, a in enumerate(atoms):
            if a.kind == Kind.DELTA:
                if a.points[0] == point:
                    sign = 1
                elif a.points[1] == point:
                    sign = -1
                else:
                    continue
                new = a.with_deriv(idx)
                out.append((atoms[:n] + (new,) + atoms[n + 1:], mono, val * sign))
            elif a.kind in _DYNAMIC and a.point == point:
                out.append((atoms[:n] + (a.with_deriv(idx),) + atoms[n + 1:], mono, val))
    return canonicalize(Expr(tuple(out)))


def Dt(e: Expr) -> Expr:
    """Total time derivative (multipliers and constraints included)."""
    out = []
    for val, mono, atoms in e.terms:
        for n, a in enumerate(atoms):
            if a.kind in _DYNAMIC:
                new = Atom(a.kind, a.name, a.indices, a.derivs, a.tderiv + 1, a.points)
                out.append((atoms[:n] + (new,) + atoms[n + 1:], mono, val))
    return canonicalize(Expr(tuple(out)))


def apply_derivs(e: Expr, derivs, point: str = None, tderiv: int = 0, sign: int = 1) -> Expr:
    """Apply ``(sign*D)^J (sign*Dt)^t`` to ``e``."""
    for _ in range(tderiv):
        e = Dt(e) * sign
    for d in derivs:
        e = D(e, d, point) * sign
    return e


def _kron_product(src, dst) -> Expr:
    out = Expr.number(1)
    for a, b in zip(src, dst):
        out = out * Expr.atom(kron(a, b))
    return out


def _matches(a: Atom, kind, name) -> bool:
    return a.kind == kind and a.name == name


def variation(e: Expr, kind: Kind, name: str, out_indices=(), tderiv=0, with_time: bool = False) -> Expr:
    """Euler operator of a density with respect to one atom family.

    Sums ``(-D)^J [rest * delta(a, out)]`` over occurrences with time order
    ``tderiv``.  With ``with_time`` every time order contributes and the
    time derivatives are moved off as well (Euler-Lagrange form).
    """
    out_indices = tuple(out_indices)
    e = _rename_dummies_away(canonicalize(e), {i for i in out_indices if isinstance(i, str)})
    total = Expr.zero()
    for atoms, mono, val in e._terms:
        for n, a in enumerate(atoms):
            if not _matches(a, kind, name):
                continue
            if not with_time and a.tderiv != tderiv:
                continue
            if len(a.indices) != len(out_indices):
                raise ValueError(f"{name} has rank {len(a.indices)}, got {len(out_indices)} output indices")
            rest = Expr((((atoms[:n] + atoms[n + 1:]), mono, val),))
            piece = canonicalize(rest) * _kron_product(a.indices, out_indices)
            piece = apply_derivs(piece, a.derivs, a.point, a.tderiv if with_time else 0, sign=-1)
            total = total + piece
    return total


def local_variation(e: Expr, kind: Kind, name: str, out_indices, point: str) -> Expr:
    """Functional derivative of the local quantity ``e`` with respect to the
    family member at ``point``: a kernel in ``ddelta``."""
    out_indices = tuple(out_indices)
    e = _rename_dummies_away(canonicalize(e), {i for i in out_indices if isinstance(i, str)})
    total = Expr.zero()
    for atoms, mono, val in e._terms:
        for n, a in enumerate(atoms):
            if not _matches(a, kind, name) or a.tderiv:
                continue
            rest = Expr(((atoms[:n] + atoms[n + 1:], mono, val),))
            ker = Expr.atom(dirac(a.point, point, a.derivs))
            total = total + canonicalize(rest) * _kron_product(a.indices, out_indices) * ker
    return total


def partial(e: Expr, kind: Kind, name: str, out_indices=(), tderiv: int = 0) -> Expr:
    """Ordinary partial derivative with respect to an underived jet variable."""
    out_indices = tuple(out_indices)
    e = _rename_dummies_away(canonicalize(e), {i for i in out_indices if isinstance(i, str)})
    total = Expr.zero()
    for atoms, mono, val in e._terms:
        for n, a in enumerate(atoms):
            if _matches(a, kind, name) and a.tderiv == tderiv and not a.derivs:
                rest = Expr(((atoms[:n] + atoms[n + 1:], mono, val),))
                total = total + canonicalize(rest) * _kron_product(a.indices, out_indices)
    return total


def substitute(e: Expr, kind: Kind, name: str, replacement: Expr, slots=None, tderiv: int = None) -> Expr:
    """Replace every atom of one family by ``replacement``.

    ``replacement`` is written at point ``x`` with free indices ``slots``
    (default ``i, j, ...`` by rank).  Derivatives and time derivatives on
    the replaced atom are applied to the replacement.  With ``tderiv`` only
    atoms of exactly that time order are replaced (a velocity, say) and the
    replacement stands for the whole time-differentiated atom.
    """
    total = Expr.zero()
    for val, mono, atoms in e.terms:
        hit = [n for n, a in enumerate(atoms)
               if _matches(a, kind, name) and (tderiv is None or a.tderiv == tderiv)]
        if not hit:
            total = total + Expr(((atoms, mono, val),), canonical=False)
            continue
        piece = Expr(((tuple(a for n, a in enumerate(atoms) if n not in hit), mono, val),))
        piece = canonicalize(piece)
        for n in hit:
            a = atoms[n]
            names = tuple(slots) if slots is not None else tuple("ijklmn"[: len(a.indices)])
            used = set(_symbols_of(atoms))
            r = canonicalize(replacement)
            r = _rename_dummies_away(r, used | set(a.indices) | set(a.derivs))
            tmp = fresh_names(len(names), used | r.all_symbols() | set(names))
            r = r.rename_indices(dict(zip(names, tmp))).rename_indices(dict(zip(tmp, a.indices)))
            if r.points():
                r = r.at({"x": a.point}) if a.point != "x" else r
            r = apply_derivs(r, a.derivs, a.point, a.tderiv if tderiv is None else 0)
            piece = piece * r
        total = total + piece
    return total


def integrate_point(e: Expr, p: str) -> Expr:
    """Integrate over the point ``p`` using one delta distribution per term."""
    total = Expr.zero()
    for val, mono, atoms in e.terms:
        deltas = [n for n, a in enumerate(atoms) if a.kind == Kind.DELTA and p in a.points]
        if not deltas:
            if any(p in a.points for a in atoms):
                raise NotAFunctional(f"no delta to integrate over {p}")
            raise NotAFunctional(f"integrand is independent of {p}")
        n = deltas[0]
        dl = atoms[n]
        other = atoms[:n] + atoms[n + 1:]
        dep = tuple(a for a in other if p in a.points)
        indep = tuple(a for a in other if p not in a.points)
        if dl.points[1] == p:
            target = dl.points[0]
            f = canonicalize(Expr(((dep, (), Fraction(1)),))).at({p: target})
            f = apply_derivs(f, dl.derivs, target)
        else:
            target = dl.points[1]
            f = canonicalize(Expr(((dep, (), Fraction(1)),))).at({p: target})
            f = apply_derivs(f, dl.derivs, target, sign=-1)
        total = total + canonicalize(Expr(((indep, mono, val),))) * f
    return total


def localize(e: Expr) -> Expr:
    """Normal form for two-point kernels: ``f(q) d^J delta(p-q)`` becomes
    ``d^J_p [f(p) delta(p-q)]`` so every non-delta factor sits at the first label."""
    total = Expr.zero()
    for val, mono, atoms in e.terms:
        deltas = [n for n, a in enumerate(atoms) if a.kind == Kind.DELTA]
        if len(deltas) != 1:
            total = total + Expr(((atoms, mono, val),))
            continue
        dl = atoms[deltas[0]]
        p, q = dl.points
        other = tuple(a for n, a in enumerate(atoms) if n != deltas[0])
        at_q = tuple(a for a in other if q in a.points)
        rest = tuple(a for a in other if q not in a.points)
        if not at_q:
            total = total + Expr(((atoms, mono, val),))
            continue
        moved = canonicalize(Expr(((at_q, (), Fraction(1)),))).at({q: p})
        ker = moved * Expr.atom(dirac(p, q))
        ker = apply_derivs(ker, dl.derivs, p)
        total = total + canonicalize(Expr(((rest, mono, val),))) * ker
    return total


@dataclass(frozen=True)
class Functional:
    """The spatial integral of a single-point density."""

    density: Expr
    point: str = "x"

    def __post_init__(self):
        for _, _, atoms in self.density.terms:
            for a in atoms:
                if a.kind == Kind.DELTA or (a.points and a.point != self.point):
                    raise NotAFunctional("a functional density must live at its integration point")

    def __add__(self, other: "Functional") -> "Functional":
        return Functional(self.density + other.density.at({other.point: self.point}), self.point)

    def __sub__(self, other: "Functional") -> "Functional":
        return self + other.scale(-1)

    def scale(self, value, mono=()) -> "Functional":
        return Functional(self.density.scale(value, mono), self.point)

    def families(self) -> list:
        return families(self.density)

    def derivative(self, kind: Kind, name: str, out_indices, point: str) -> Expr:
        """delta F / delta q(point) as a local expression at ``point``."""
        return variation(self.density, kind, name, out_indices).at({self.point: point})

    def is_null(self) -> bool:
        return is_null_density(self.density)

    def __str__(self) -> str:
        return f"int[{self.point}]({self.density})"


def families(e: Expr) -> list:
    """Sorted (kind, name, rank) of every dynamical atom family in ``e``."""
    out = set()
    for _, _, atoms in e.terms:
        for a in atoms:
            if a.kind in _DYNAMIC or a.kind == Kind.FDERIV:
                out.add((a.kind, a.name, len(a.indices)))
    return sorted(out, key=lambda t: (int(t[0]), t[1], t[2]))


def is_null_density(e: Expr) -> bool:
    """True when the integral of ``e`` vanishes for all configurations with
    vanishing surface terms: no constant part and every Euler operator zero."""
    e = canonicalize(e)
    for _, _, atoms in e.terms:
        if not any(a.kind in _DYNAMIC for a in atoms):
            return False
    for kind, name, rank in families(e):
        if kind == Kind.FDERIV:
            return False
        names = fresh_names(rank, e.all_symbols())
        if not variation(e, kind, name, names, with_time=True).is_zero():
            return False
    return True


def integrate_by_parts(e: Expr, kind: Kind, name: str = None, log: list = None) -> Expr:
    """Move spatial derivatives off atoms of ``kind`` (optionally one name).

    Works on densities; each discarded total derivative is appended to
    ``log`` as text.  A product with more than one target factor is left
    as it is: moving a derivative off one target only lands it on another.
    """
    e = canonicalize(e)
    for _ in range(64):
        out = Expr.zero()
        moved = False
        for val, mono, atoms in e.terms:
            targets = [n for n, a in enumerate(atoms) if a.kind == kind and (name is None or a.name == name)]
            heavy = [n for n in targets if atoms[n].derivs]
            if not heavy or len(targets) > 1:
                out = out + Expr(((atoms, mono, val),))
                continue
            n, = heavy
            a = atoms[n]
            d = a.derivs[-1]
            lighter = Atom(a.kind, a.name, a.indices, a.derivs[:-1], a.tderiv, a.points)
            rest = canonicalize(Expr(((atoms[:n] + atoms[n + 1:], mono, val),)))
            t = Expr.atom(lighter)
            surface = rest * t
            if log is not None and not surface.is_zero():
                log.append(f"d[{d}]({surface.to_text()})")
            out = out - D(rest, d, a.point) * t
            moved = True
        e = out
        if not moved:
            return e
    raise RuntimeError("integration by parts did not terminate")


def components_of_family(rank: int):
    """All index tuples of a rank-r family."""
    return list(itertools.product(range(1, DIM + 1), repeat=rank))
