"""Canonical Poisson brackets of local quantities and functionals."""

from __future__ import annotations

from ..symcore import Expr, Functional, Kind, fresh_names, fresh_point, integrate_point, localize
from ..symcore.calculus import local_variation
from ..symcore.names import momentum_name


def _derivative(F, kind, name, idx, z, log):
    if isinstance(F, Functional):
        if log is not None:
            _log_moves(F, kind, name, log)
        return F.derivative(kind, name, idx, z)
    return local_variation(F, kind, name, idx, z)


def _log_moves(F: Functional, kind, name, log: list) -> None:
    for val, mono, atoms in F.density.terms:
        for a in atoms:
            if a.kind == kind and a.name == name and a.derivs:
                entry = f"d[{','.join(map(str, a.derivs))}] moved off {a.name} in {F.density.to_text()}"
                if entry not in log:
                    log.append(entry)


def _expr_of(F):
    return F.density if isinstance(F, Functional) else F


def poisson_bracket(F, G, fields, log: list = None):
    """``{F, G}`` for the canonical pairs ``(field, Pi_field)``.

    ``fields`` is a sequence of (name, rank).  Local arguments give a local
    result (a kernel when both carry their own points); two functionals give
    a :class:`Functional`.
    """
    fe, ge = _expr_of(F), _expr_of(G)
    shared = fe.free_indices() & ge.free_indices()
    if shared:
        raise ValueError(f"bracket arguments share free indices {sorted(shared)}")
    points = fe.points() | ge.points()
    if isinstance(F, Functional):
        points.add(F.point)
    if isinstance(G, Functional):
        points.add(G.point)
    z = fresh_point(points)
    total = Expr.zero()
    used = fe.all_symbols() | ge.all_symbols()
    for name, rank in fields:
        idx = tuple(fresh_names(rank, used))
        p = momentum_name(name)
        dFq = _derivative(F, Kind.FIELD, name, idx, z, log)
        dGp = _derivative(G, Kind.MOMENTUM, p, idx, z, log)
        dFp = _derivative(F, Kind.MOMENTUM, p, idx, z, log)
        dGq = _derivative(G, Kind.FIELD, name, idx, z, log)
        total = total + dFq * dGp - dFp * dGq
    if isinstance(F, Functional) and isinstance(G, Functional):
        return Functional(total.at({z: F.point}) if not total.is_zero() else total, F.point)
    if total.is_zero():
        return total
    return localize(integrate_point(total, z))
