"""Functional-Schrodinger form of a momentum-linear Hamiltonian.

Momenta become ``-I * delta/delta field`` (hbar = 1) with field
coefficients to the left.  States are exponentials ``exp(alpha * I[fields])``
of a local functional, so acting with a first-order operator reduces to
the chain rule and the eigenvalue test to a null-density test.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .frontend.model import LagrangianModel
from .symcore import (
    Expr,
    Functional,
    Kind,
    canonicalize,
    eps,
    fderiv,
    families,
    fresh_names,
    is_null_density,
    substitute,
    variation,
)
from .symcore.atoms import ALPHABET, Atom
from .symcore.names import fderiv_name, field_of, momentum_name

ANNOTATION = ("interpretive remark, not computed: the exponent behaves as a gauge theory in its own "
              "right although the fields of the action are not gauge fields, which argues against "
              "this state as a physical vacuum")


class NonlinearMomenta(ValueError):
    pass


class NotCurlForm(ValueError):
    pass


@dataclass(frozen=True)
class DerivativeTerm:
    """``coefficient * delta/delta field[indices]``; the coefficient carries
    the same free indices."""

    coefficient: Expr
    field: str
    indices: tuple

    def to_expr(self) -> Expr:
        return self.coefficient * Expr.atom(fderiv(fderiv_name(self.field), *self.indices))


@dataclass(frozen=True)
class OperatorExpr:
    """Spatial integral of first-order functional-derivative terms plus a
    multiplicative part."""

    terms: tuple
    multiplication: Expr = dc_field(default_factory=Expr.zero)

    def to_expr(self) -> Expr:
        """Density with ``fd_`` atoms, which canonical order keeps rightmost."""
        total = self.multiplication
        for t in self.terms:
            total = total + t.to_expr()
        return total

    def to_text(self) -> str:
        return self.to_expr().to_text()

    def classical_symbol(self) -> Expr:
        """Replace each ``delta/delta f`` by ``Pi_f``: ``-I`` times the classical density."""
        total = self.multiplication
        for t in self.terms:
            total = total + t.coefficient * Expr.atom(Atom(Kind.MOMENTUM, momentum_name(t.field), t.indices))
        return total

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        return OperatorExpr(self.terms + other.terms, self.multiplication + other.multiplication)

    def scale(self, value, mono=()) -> "OperatorExpr":
        terms = tuple(DerivativeTerm(t.coefficient.scale(value, mono), t.field, t.indices) for t in self.terms)
        return OperatorExpr(terms, self.multiplication.scale(value, mono))


@dataclass(frozen=True)
class StateAnsatz:
    """``exp(coefficient * integral(exponent))``."""

    exponent: Expr
    coefficient: str = "alpha"

    def __post_init__(self):
        Functional(self.exponent)
        for a in self.exponent.atoms():
            if a.kind in (Kind.FIELD,) and (len(a.derivs) > 1 or a.tderiv):
                raise ValueError("the exponent may contain at most first spatial derivatives")
            if a.kind not in (Kind.FIELD, Kind.EPSILON, Kind.KRONECKER):
                raise ValueError(f"{a.name or a.kind.name} is not allowed in a state exponent")

    def to_text(self) -> str:
        return f"exp({self.coefficient}*int({self.exponent.to_text()}))"


def quantize(h: Expr) -> OperatorExpr:
    """Replace momenta by ``-I delta/delta field`` in a momentum-linear density."""
    h = canonicalize(h)
    terms = []
    free_part = h.map_terms(
        lambda v, m, at: Expr.zero() if any(a.kind == Kind.MOMENTUM for a in at) else Expr(((at, m, v),))
    )
    for kind, name, rank in families(h):
        if kind != Kind.MOMENTUM:
            continue
        out = ALPHABET[:rank]
        coef = variation(h, Kind.MOMENTUM, name, out)
        if any(a.kind == Kind.MOMENTUM for a in coef.atoms()):
            raise NonlinearMomenta(f"{name} enters nonlinearly; operator ordering is ambiguous")
        if not coef.is_zero():
            terms.append(DerivativeTerm(coef * Expr.symbol("I").scale(-1), field_of(name), out))
    return OperatorExpr(tuple(terms), free_part)


def apply_operator(op: OperatorExpr, state: StateAnsatz) -> Expr:
    """``(op psi) / psi`` as a canonical density; zero when psi is an eigenstate of zero energy.

    A density whose integral vanishes identically counts as zero.
    """
    alpha = Expr.symbol(state.coefficient) if state.coefficient else Expr.number(1)
    total = op.multiplication
    for t in op.terms:
        dI = variation(state.exponent, Kind.FIELD, t.field, t.indices)
        total = total + t.coefficient * alpha * dI
    total = canonicalize(total)
    if total.is_zero() or is_null_density(total):
        return Expr.zero()
    return total


def _field_ranks(e: Expr) -> dict:
    return {name: rank for kind, name, rank in families(e) if kind == Kind.FIELD}


def _eps_template(name: str, rank: int, curl: bool) -> Expr:
    """``eps[i,j,k] f[i,..] d[j](f[k,..])``, or the same with the curvature
    ``d[j](f[k,..]) - d[k](f[j,..])`` when ``curl``."""
    rest = tuple(fresh_names(rank - 1, {"i", "j", "k"}))
    f = lambda a, d=(): Expr.atom(Atom(Kind.FIELD, name, (a,) + rest, tuple(d)))
    grad = f("k", ("j",))
    if curl:
        grad = grad - f("j", ("k",))
    return Expr.atom(eps("i", "j", "k")) * f("i") * grad


@dataclass(frozen=True)
class CurvatureForm:
    coefficients: dict
    ranks: dict
    expr: Expr

    def to_text(self) -> str:
        parts, defs = [], []
        for name, k in self.coefficients.items():
            rest = "".join("," + r for r in ALPHABET[3:3 + self.ranks[name] - 1])
            parts.append(f"{k / 4}*eps[i,j,k]*{name}[i{rest}]*R_{name}[j,k{rest}]")
            defs.append(f"R_{name}[j,k{rest}] = d[j]({name}[k{rest}]) - d[k]({name}[j{rest}])")
        return " + ".join(parts) + "; " + "; ".join(defs)


def curvature_form(I: Expr) -> CurvatureForm:
    """Write ``I`` as ``sum_f (k_f/4) eps f R(f)`` with ``R(f)`` the curl
    of ``f``; raises NotCurlForm when that is not an exact rewrite."""
    I = canonicalize(I)
    coefficients = {}
    rebuilt = Expr.zero()
    for name, rank in sorted(_field_ranks(I).items()):
        if rank == 0:
            continue
        (v0, m0, atoms0), = _eps_template(name, rank, curl=False).terms
        hits = [(v, m) for v, m, at in I.terms if at == atoms0]
        if not hits:
            continue
        (v, m), = hits
        if m != m0:
            raise NotCurlForm(f"coefficient of the {name} curl term is not numeric")
        k = 2 * v / v0
        coefficients[name] = k
        rebuilt = rebuilt + _eps_template(name, rank, curl=True).scale(k / 4)
    if not coefficients or not (I - rebuilt).is_zero():
        raise NotCurlForm("the functional is not a sum of field-times-curvature terms")
    return CurvatureForm(coefficients, {n: r for n, r in _field_ranks(I).items() if n in coefficients}, rebuilt)


@dataclass(frozen=True)
class GaugeVerdict:
    shifted: tuple
    invariant: bool
    residual: Expr

    @property
    def verdict(self) -> str:
        return "INVARIANT" if self.invariant else "NOT_INVARIANT"


def gauge_shift(I: Expr, shifted, scale=1, parameter: str = "theta") -> Expr:
    """``I`` with each named field ``f[i,..] -> f[i,..] + scale * d[i](theta[..])``."""
    ranks = _field_ranks(I)
    out = I
    for name in shifted:
        rank = ranks.get(name)
        if not rank:
            continue
        slots = ALPHABET[:rank]
        theta = Expr.atom(Atom(Kind.FIELD, parameter, slots[1:], (slots[0],)))
        replacement = Expr.atom(Atom(Kind.FIELD, name, slots)) + theta.scale(scale)
        out = substitute(out, Kind.FIELD, name, replacement, slots=slots)
    return canonicalize(out)


def gauge_shift_check(I: Expr, shifted, scale=1, parameter: str = "theta") -> GaugeVerdict:
    residual = gauge_shift(I, shifted, scale, parameter) - canonicalize(I)
    invariant = residual.is_zero() or is_null_density(residual)
    return GaugeVerdict(tuple(shifted), invariant, Expr.zero() if invariant else residual)


def vacuum_exponent(model: LagrangianModel) -> Expr:
    """Half the sum of ``eps f d f`` over the vector-like fields of ``model``."""
    total = Expr.zero()
    for f in model.fields:
        if f.rank:
            total = total + _eps_template(f.name, f.rank, curl=False)
    return total.scale(Fraction(1, 2))


def vacuum_report(h_e: Expr, model: LagrangianModel) -> dict:
    """Zero-energy check of ``exp(alpha I)`` for the extended Hamiltonian."""
    I = vacuum_exponent(model)
    state = StateAnsatz(I)
    out = {"state": state.to_text()}
    try:
        op = quantize(h_e)
    except NonlinearMomenta as exc:
        out.update(residual=None, eigenstate=False, error=str(exc), gaugeInvariant=None)
        return out
    residual = apply_operator(op, state)
    out["operator"] = op.to_text()
    out["residual"] = residual.to_text()
    out["eigenstate"] = residual.is_zero()
    try:
        out["curvatureForm"] = curvature_form(I).to_text()
    except NotCurlForm:
        out["curvatureForm"] = None
    names = [f.name for f in model.fields if f.rank]
    shifts = [(n,) for n in names] + ([tuple(names)] if len(names) > 1 else [])
    checks = [gauge_shift_check(I, s) for s in shifts]
    out["gaugeShifts"] = [{"fields": list(g.shifted), "verdict": g.verdict, "residual": g.residual.to_text()}
                          for g in checks]
    out["gaugeInvariant"] = all(g.invariant for g in checks)
    out["annotation"] = ANNOTATION
    return out
