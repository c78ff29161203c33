import pytest

from dirac_ham import quantum as Q
from dirac_ham.frontend import parse_expr

E = parse_expr
CS = E("1/2*(E[i]*eps[i,j,k]*d[j](E[k]) + B[i]*eps[i,j,k]*d[j](B[k]))")


@pytest.fixture(scope="module")
def operator(maxwell):
    return Q.quantize(maxwell.extendedH)


def test_classical_symbol_recovers_hamiltonian(maxwell, operator):
    assert operator.classical_symbol() == maxwell.extendedH * E("-I")


def test_operator_text(operator):
    assert E(operator.to_text()) == E("-I*c*eps[i,j,k]*d[j](B[k])*fd_E[i] + I*c*eps[i,j,k]*d[j](E[k])*fd_B[i]")


def test_nonlinear_momenta_are_rejected():
    with pytest.raises(Q.NonlinearMomenta):
        Q.quantize(E("1/2*Pi_A[i]*Pi_A[i]"))


def test_multiplicative_part_is_kept():
    op = Q.quantize(E("Pi_E[i]*B[i] + E[i]*E[i]"))
    assert op.multiplication == E("E[i]*E[i]")
    assert op.scale(2).multiplication == E("2*E[i]*E[i]")


def test_zero_energy_state(operator):
    assert Q.apply_operator(operator, Q.StateAnsatz(CS)).is_zero()


def test_non_eigenstate_residual(operator):
    residual = Q.apply_operator(operator, Q.StateAnsatz(E("E[i]*E[i]")))
    assert residual == E("-2*I*alpha*c*eps[i,j,k]*d[i](B[j])*E[k]")


def test_state_ansatz_validation():
    with pytest.raises(ValueError):
        Q.StateAnsatz(E("Pi_E[i]*E[i]"))
    with pytest.raises(ValueError):
        Q.StateAnsatz(E("d[i](d[j](E[j]))*E[i]"))


def test_curvature_form(maxwell):
    form = Q.curvature_form(CS)
    assert form.coefficients == {"B": 1, "E": 1}
    assert form.expr == E("1/4*eps[i,j,k]*E[i]*(d[j](E[k]) - d[k](E[j])) + 1/4*eps[i,j,k]*B[i]*(d[j](B[k]) - d[k](B[j]))")
    assert "R_E[j,k] = d[j](E[k]) - d[k](E[j])" in form.to_text()


def test_curvature_form_rank_two():
    I = E("1/2*eps[i,j,k]*E[i,l]*d[j](E[k,l])")
    form = Q.curvature_form(I)
    assert form.ranks == {"E": 2}
    assert "R_E[j,k,l] = d[j](E[k,l]) - d[k](E[j,l])" in form.to_text()


def test_not_curl_form():
    with pytest.raises(Q.NotCurlForm):
        Q.curvature_form(E("E[i]*E[i]"))
    with pytest.raises(Q.NotCurlForm):
        Q.curvature_form(CS + E("E[i]*E[i]"))


@pytest.mark.parametrize("shifted", [("E",), ("B",), ("E", "B")])
def test_gradient_shifts_leave_exponent_invariant(shifted):
    assert Q.gauge_shift_check(CS, shifted).verdict == "INVARIANT"


def test_gradient_shift_changes_quadratic_functional():
    verdict = Q.gauge_shift_check(E("E[i]*E[i]"), ("E",))
    assert verdict.verdict == "NOT_INVARIANT"
    assert verdict.residual == E("2*E[i]*d[i](theta) + d[i](theta)*d[i](theta)")


def test_vacuum_report(maxwell):
    rep = Q.vacuum_report(maxwell.extendedH, maxwell.model)
    assert rep["residual"] == "0" and rep["eigenstate"] and rep["gaugeInvariant"]
    assert [g["fields"] for g in rep["gaugeShifts"]] == [["E"], ["B"], ["E", "B"]]
    assert rep["annotation"].startswith("interpretive remark")


def test_vacuum_report_rank_two(gravity):
    rep = Q.vacuum_report(gravity.extendedH, gravity.model)
    assert rep["eigenstate"] and rep["gaugeInvariant"]


def test_vacuum_report_for_quadratic_hamiltonian(potential):
    rep = Q.vacuum_report(potential.extendedH, potential.model)
    assert rep["eigenstate"] is False and "error" in rep
