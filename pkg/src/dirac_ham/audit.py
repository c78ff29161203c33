"""Comparison of an analysis against published reference values.

Each expectation names the published result it encodes in ``anchor``.
Rows whose published value is known to disagree with a direct
computation carry ``disputed=True`` and are reported as DISPUTED rather
than MISMATCH when they differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .frontend.parser import parse_expr
from .symcore import Expr

MATCH = "MATCH"
MISMATCH = "MISMATCH"
DISPUTED = "DISPUTED"


@dataclass(frozen=True)
class PaperExpectation:
    item: str
    expected: object  # expression text, int or verdict string
    anchor: str
    extract: Callable
    disputed: bool = False

    def __post_init__(self):
        if not self.anchor:
            raise ValueError(f"expectation {self.item!r} has no anchor")


@dataclass(frozen=True)
class AuditRow:
    item: str
    status: str
    computed: str
    expected: str
    anchor: str

    def to_dict(self) -> dict:
        return {"item": self.item, "status": self.status, "computed": self.computed,
                "expected": self.expected, "anchor": self.anchor}


def _same(computed, expected) -> bool:
    if isinstance(computed, Expr):
        return computed == parse_expr(expected)
    return computed == expected


def _text(v) -> str:
    return v.to_text() if isinstance(v, Expr) else str(v)


def audit(report, expectations, vacuum: dict = None) -> list:
    """One row per expectation: MATCH, MISMATCH or DISPUTED."""
    rows = []
    for ex in expectations:
        try:
            computed = ex.extract(report, vacuum or {})
        except (KeyError, IndexError, StopIteration):
            computed = None
        ok = computed is not None and _same(computed, ex.expected)
        status = MATCH if ok else (DISPUTED if ex.disputed else MISMATCH)
        rows.append(AuditRow(ex.item, status, _text(computed), str(ex.expected), ex.anchor))
    return rows


def has_mismatch(rows) -> bool:
    return any(r.status == MISMATCH for r in rows)


# -- extractors --------------------------------------------------------------

def _momentum(name):
    return lambda r, v: next(p.expr for p in r.momenta if p.momentum == name)


def _constraint(label):
    return lambda r, v: next(c.expr for c in r.constraints if c.label == label)


def _multiplier(name):
    return lambda r, v: next(m.expr for m in r.multipliers if m.multiplier == name)


def _bracket(left, right):
    return lambda r, v: next(b.value for b in r.diracBrackets if (b.left, b.right) == (left, right))


def _w_entry(row, col):
    def get(r, v):
        labels = [c.label for c in r.W.constraints]
        return r.W.entries[labels.index(row), labels.index(col)]
    return get


def _audit_combination(label):
    return lambda r, v: next(a.combination for a in r.firstClassAudit if a.label == label)


def _eom(variation):
    def get(r, v):
        e = next(e for e in r.eom if e.variation == variation)
        return e.equation.rhs
    return get


def _count(cls):
    return lambda r, v: r.counts[cls]


def _stage(stage):
    return lambda r, v: sum(c.components for c in r.constraints if c.stage == stage)


E_B = "1/8*c^-1*pi^-1"

EB_MAXWELL = (
    PaperExpectation("momentum Pi_E", f"{E_B}*B[i]", "published momentum conjugate to E", _momentum("Pi_E")),
    PaperExpectation("momentum Pi_B", f"-{E_B}*E[i]", "published momentum conjugate to B", _momentum("Pi_B")),
    PaperExpectation("Hessian rank", 0, "published statement: the Lagrangian is singular",
                     lambda r, v: r.hessian.rank),
    PaperExpectation("primary constraint phi_E", f"Pi_E[i] - {E_B}*B[i]", "published primary constraints",
                     _constraint("phi_E")),
    PaperExpectation("primary constraint phi_B", f"Pi_B[i] + {E_B}*E[i]", "published primary constraints",
                     _constraint("phi_B")),
    PaperExpectation("primary constraint count", 6, "published primary constraints", _stage("primary")),
    PaperExpectation("constraint Jacobian rank", 6, "published primary constraints are independent",
                     lambda r, v: r.jacobian.rank),
    PaperExpectation("canonical Hamiltonian",
                     "1/8*pi^-1*(B[i]*eps[i,j,k]*d[j](B[k]) + E[i]*eps[i,j,k]*d[j](E[k]))",
                     "published canonical Hamiltonian", lambda r, v: r.canonicalH),
    PaperExpectation("W entry {phi_E, phi_B}", "-1/4*c^-1*pi^-1*delta[i,j]*ddelta(x,y)",
                     "published constraint bracket", _w_entry("phi_E", "phi_B")),
    PaperExpectation("W rank", 6, "published: rank 6 and no null vectors", lambda r, v: r.W.rank),
    PaperExpectation("multiplier of phi_E", "c*eps[i,j,k]*d[j](B[k])", "published multiplier v",
                     _multiplier("u_phi_E")),
    PaperExpectation("multiplier of phi_B", "-c*eps[i,j,k]*d[j](E[k])", "published multiplier u",
                     _multiplier("u_phi_B")),
    PaperExpectation("secondary constraints", 0, "published: no further constraints", _stage("secondary")),
    PaperExpectation("second-class constraints", 6, "published classification", _count("second")),
    PaperExpectation("first-class constraints", 0, "published classification", _count("first")),
    PaperExpectation("reducibility relations", 2, "published reducibility conditions",
                     lambda r, v: r.reducibility.counted),
    PaperExpectation("naive degrees of freedom", 3, "published count before reducibility",
                     lambda r, v: int(r.dof.naive)),
    PaperExpectation("degrees of freedom", 4, "published: the physical degrees of freedom are four",
                     lambda r, v: int(r.dof.corrected)),
    PaperExpectation("Dirac bracket {E, Pi_E}", "1/3*delta[i,j]*ddelta(x,y)", "published Dirac bracket of E and Pi_E",
                     _bracket("E[i]", "Pi_E[j]@y"), disputed=True),
    PaperExpectation("Dirac bracket {E, B}", "4*pi*c*delta[i,j]*ddelta(x,y)", "published Dirac bracket of E and B",
                     _bracket("E[i]", "B[j]@y")),
    PaperExpectation("Dirac bracket {div E, B}", "4*pi*c*d[k](ddelta(x,y))",
                     "published Dirac bracket of div E and B", _bracket("d[i](E[i])", "B[k]@y")),
    PaperExpectation("Dirac bracket {B, Pi_B}", "1/3*delta[i,j]*ddelta(x,y)", "published Dirac bracket of B and Pi_B",
                     _bracket("B[i]", "Pi_B[j]@y"), disputed=True),
    PaperExpectation("Dirac bracket {div Pi_E, B}", "0", "published Dirac bracket of div Pi_E and B",
                     _bracket("d[i](Pi_E[i])", "B[k]@y")),
    PaperExpectation("Dirac bracket {div Pi_B, E}", "0", "published Dirac bracket of div Pi_B and E",
                     _bracket("d[i](Pi_B[i])", "E[k]@y")),
    PaperExpectation("extended Hamiltonian",
                     "c*Pi_E[i]*eps[i,j,k]*d[j](B[k]) - c*Pi_B[i]*eps[i,j,k]*d[j](E[k])",
                     "published extended Hamiltonian", lambda r, v: r.extendedH),
    PaperExpectation("{phi_E, H_E}", "c*eps[i,j,k]*d[j](phi_B[k])", "published first-class check of H_E",
                     _audit_combination("phi_E")),
    PaperExpectation("{phi_B, H_E}", "-c*eps[i,j,k]*d[j](phi_E[k])", "published first-class check of H_E",
                     _audit_combination("phi_B")),
    PaperExpectation("equation for E", "c*eps[i,j,k]*d[j](B[k])", "published extended equations of motion",
                     _eom("Pi_E")),
    PaperExpectation("equation for B", "-c*eps[i,j,k]*d[j](E[k])", "published extended equations of motion",
                     _eom("Pi_B")),
    PaperExpectation("equation for Pi_E", "c*eps[i,j,k]*d[j](Pi_B[k])", "published extended equations of motion",
                     _eom("E")),
    PaperExpectation("equation for Pi_B", "-c*eps[i,j,k]*d[j](Pi_E[k])", "published extended equations of motion",
                     _eom("B")),
    PaperExpectation("parity", "NOT_INVARIANT", "published: the action is not parity invariant",
                     lambda r, v: r.parity.verdict),
    PaperExpectation("quantized Hamiltonian",
                     "-I*c*eps[i,j,k]*d[j](B[k])*fd_E[i] + I*c*eps[i,j,k]*d[j](E[k])*fd_B[i]",
                     "published functional Schrodinger Hamiltonian", lambda r, v: parse_expr(v["operator"])),
    PaperExpectation("zero-energy residual", "0", "published zero-energy state", lambda r, v: parse_expr(v["residual"])),
    PaperExpectation("exponent gauge invariance", True, "published gradient-shift invariance",
                     lambda r, v: v["gaugeInvariant"]),
)

MAXWELL_A = (
    PaperExpectation("first-class constraints", 2, "textbook Maxwell analysis", _count("first")),
    PaperExpectation("second-class constraints", 0, "textbook Maxwell analysis", _count("second")),
    PaperExpectation("secondary constraint count", 1, "textbook Maxwell analysis: Gauss law", _stage("secondary")),
    PaperExpectation("degrees of freedom", 2, "published: Maxwell theory has two physical degrees of freedom",
                     lambda r, v: int(r.dof.corrected)),
)

EB_GRAVITY = (
    PaperExpectation("primary constraint count", 18, "published tensor model: two families of nine",
                     _stage("primary")),
    PaperExpectation("secondary constraints", 0, "published tensor model: no further constraints",
                     _stage("secondary")),
    PaperExpectation("second-class constraints", 18, "published tensor model: all second class", _count("second")),
)

EXPECTATIONS = {"eb-maxwell": EB_MAXWELL, "maxwell-a": MAXWELL_A, "eb-gravity": EB_GRAVITY}


def expectations_for(model_name: str) -> tuple:
    return EXPECTATIONS.get(model_name, ())
