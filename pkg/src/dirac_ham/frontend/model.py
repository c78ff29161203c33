"""Validated Lagrangian models, their Euler-Lagrange equations and parity."""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field
from importlib import resources

import sympy

from ..symcore import Expr, Kind, is_null_density, partial, variation
from ..symcore.atoms import ALPHABET, Atom
from ..symcore.bridge import from_sympy, to_sympy
from ..symcore.tensor import isotropic_scalar
from .parser import Parser, Scope, ValidationError

PRESETS = ("eb-maxwell", "maxwell-a", "eb-gravity")


@dataclass(frozen=True)
class FieldDecl:
    name: str
    rank: int
    parity: int = 1
    dynamical: bool = True

    def indices(self, offset: int = 0) -> tuple:
        """Canonical index names for this field's slots."""
        return ALPHABET[offset:offset + self.rank]


@dataclass(frozen=True)
class LagrangianModel:
    name: str
    fields: tuple
    density: Expr
    auxiliary: tuple = ()
    constants: tuple = ()
    notes: tuple = dc_field(default=(), compare=False)

    def field(self, name: str) -> FieldDecl:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def ranks(self) -> dict:
        return {f.name: f.rank for f in self.fields}

    @property
    def components(self) -> int:
        return sum(3 ** f.rank for f in self.fields)

    def to_source(self) -> str:
        lines = [f"model {self.name} {{"]
        for f in self.fields:
            lines.append(f"  field {f.name} rank {f.rank} parity {'+' if f.parity > 0 else '-'};")
        for c in self.constants:
            lines.append(f"  constant {c};")
        lines.append(f"  density = {self.density.to_text()};")
        for a in self.auxiliary:
            lines.append(f"  auxiliary {a.to_text()};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def parse_model(source: str) -> LagrangianModel:
    p = Parser(source)
    p.expect("model")
    name = p.ident()
    while p.accept("-"):
        name += "-" + p.ident()
    p.expect("{")
    fields: list[FieldDecl] = []
    constants: list[str] = []
    while p.tok.text in ("field", "constant"):
        tok = p.tok
        if p.accept("field"):
            fname = p.ident()
            p.expect("rank")
            rank_tok = p.tok
            rank = p.integer()
            if rank not in (0, 1, 2):
                p.error("rank must be 0, 1 or 2", rank_tok)
            p.expect("parity")
            if p.accept("+"):
                parity = 1
            elif p.accept("-"):
                parity = -1
            else:
                p.error("parity must be + or -")
            p.expect(";")
            if any(f.name == fname for f in fields) or fname in constants:
                raise ValidationError(f"duplicate name {fname!r} at line {tok.line}")
            fields.append(FieldDecl(fname, rank, parity))
        else:
            p.accept("constant")
            cname = p.ident()
            p.expect(";")
            if cname in constants or any(f.name == cname for f in fields):
                raise ValidationError(f"duplicate name {cname!r} at line {tok.line}")
            constants.append(cname)
    p.scope = Scope({f.name: f.rank for f in fields}, frozenset(constants))
    p.expect("density")
    p.expect("=")
    density = p.expr()
    p.expect(";")
    aux = []
    while p.accept("auxiliary"):
        aux.append(p.expr())
        p.expect(";")
    p.expect("}")
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after model")
    model = LagrangianModel(name, tuple(fields), density, tuple(aux), tuple(constants))
    validate(model)
    return model


def validate(model: LagrangianModel) -> None:
    free = model.density.free_indices()
    if free:
        raise ValidationError(f"density has free indices {sorted(free)}")
    known = {f.name for f in model.fields}
    for e in (model.density,) + tuple(model.auxiliary):
        for a in e.atoms():
            if a.kind in (Kind.FIELD,) and a.name not in known:
                raise ValidationError(f"unknown field {a.name!r}")
            if a.kind not in (Kind.FIELD, Kind.EPSILON, Kind.KRONECKER):
                raise ValidationError(f"{a.name or a.kind.name} is not allowed in a model")
            if a.tderiv > 1:
                raise ValidationError(f"second-order time derivative of {a.name}")
            if a.kind == Kind.FIELD and a.points != ("x",):
                raise ValidationError("model expressions live at a single point")


def load_preset(name: str) -> LagrangianModel:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return parse_model(preset_source(name))


def preset_source(name: str) -> str:
    return resources.files("dirac_ham.frontend.presets").joinpath(f"{name}.lag").read_text(encoding="utf-8")


def load_model(source: str) -> LagrangianModel:
    """Preset name, path to a ``.lag`` file, or model text."""
    if source in PRESETS:
        return load_preset(source)
    if "{" in source:
        return parse_model(source)
    if not os.path.exists(source):
        raise ValidationError(f"{source!r} is neither a preset ({', '.join(PRESETS)}) nor a model file")
    with open(source, encoding="utf-8") as fh:
        return parse_model(fh.read())


# -- equations of motion -----------------------------------------------------

@dataclass(frozen=True)
class Equation:
    lhs: Expr
    rhs: Expr

    def __str__(self) -> str:
        return f"{self.lhs.to_text()} = {self.rhs.to_text()}"

    def residual(self) -> Expr:
        return self.lhs - self.rhs


def velocity_atom(f: FieldDecl, indices) -> Expr:
    return Expr.atom(Atom(Kind.FIELD, f.name, tuple(indices), (), 1))


def _velocity_free(e: Expr) -> Expr:
    return e.map_terms(lambda v, m, at: Expr.zero() if any(a.tderiv for a in at) else Expr(((at, m, v),)))


def euler_lagrange(model: LagrangianModel) -> list:
    """One equation per field family.

    When the velocity coefficients form an invertible constant matrix of
    isotropic blocks the equations are returned solved for ``dt(field)``;
    otherwise each is the implicit ``EL = 0``.
    """
    fields = model.fields
    raw = [variation(model.density, Kind.FIELD, f.name, f.indices(), with_time=True) for f in fields]
    implicit = [Equation(e, Expr.zero()) for e in raw]
    for e in raw:
        for a in e.atoms():
            if a.tderiv > 1 or (a.tderiv == 1 and a.derivs):
                return implicit
    n = len(fields)
    M = sympy.zeros(n, n)
    for r, (f, e) in enumerate(zip(fields, raw)):
        rows = f.indices()
        for c, g in enumerate(fields):
            cols = g.indices(len(rows))
            block = partial(e, Kind.FIELD, g.name, cols, tderiv=1)
            if block.is_zero():
                continue
            s = isotropic_scalar(block, rows, cols)
            if s is None or s.constant_value() is None:
                return implicit
            M[r, c] = to_sympy(s)
    if M.det() == 0:
        return implicit
    Minv = M.inv()
    rests = [_velocity_free(e) for e in raw]
    out = []
    for g_row, g in enumerate(fields):
        rhs = Expr.zero()
        for f_col, f in enumerate(fields):
            coef = Minv[g_row, f_col]
            if coef == 0 or rests[f_col].is_zero():
                continue
            if f.rank != g.rank:
                return implicit
            term = rests[f_col].rename_indices(dict(zip(f.indices(), g.indices())))
            rhs = rhs - from_sympy(coef) * term
        out.append(Equation(velocity_atom(g, g.indices()), rhs))
    return out


# -- parity ------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryVerdict:
    invariant: bool
    residual: Expr

    @property
    def verdict(self) -> str:
        return "INVARIANT" if self.invariant else "NOT_INVARIANT"


def parity_transform(model: LagrangianModel, e: Expr) -> Expr:
    """x -> -x: each field picks up its declared parity, each spatial derivative a sign."""
    parity = {f.name: f.parity for f in model.fields}

    def flip(v, m, atoms):
        sign = 1
        for a in atoms:
            if a.kind == Kind.FIELD:
                sign *= parity.get(a.name, 1) * (-1) ** len(a.derivs)
        return Expr(((atoms, m, v * sign),))

    return e.map_terms(flip)


def check_discrete_symmetry(model: LagrangianModel, transform: str = "parity", density: Expr = None) -> SymmetryVerdict:
    if transform != "parity":
        raise ValueError(f"unsupported transform {transform!r}")
    density = model.density if density is None else density
    residual = parity_transform(model, density) - density
    invariant = residual.is_zero() or is_null_density(residual)
    return SymmetryVerdict(invariant, residual)
