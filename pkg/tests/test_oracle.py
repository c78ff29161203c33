import csv

import numpy as np
import pytest

from dirac_ham.engine import pipeline as P
from dirac_ham.frontend import parse_expr
from dirac_ham.oracle import (
    LatticeConfig,
    OracleUnsupported,
    UnstableStep,
    assemble_from_jacobian,
    evaluate,
    evolution_rhs,
    evolve,
    finite_difference_derivative,
    numeric_constraint_matrix,
    numeric_rank,
    per_mode_ranks,
    plane_wave,
    random_state,
    read_matrix,
    run_oracle,
    write_matrix,
    zero_state,
)
from dirac_ham.oracle.checks import derivative_check, matrix_check
from dirac_ham.symcore import Kind, variation

E = parse_expr
SMALL = LatticeConfig(grid=4)


def fields_of(report):
    return [(f.name, f.rank) for f in report.model.fields]


class TestConfig:
    def test_courant_limit(self):
        with pytest.raises(ValueError):
            LatticeConfig(grid=8, spacing=0.1, dt=0.1)

    def test_positive_parameters(self):
        with pytest.raises(ValueError):
            LatticeConfig(spacing=-1)


class TestConstraintMatrix:
    def test_eb_maxwell_full_rank(self, maxwell):
        num = numeric_constraint_matrix(maxwell.W, SMALL)
        assert num.size == 384 and num.rank == 384

    def test_jacobian_route_agrees(self, maxwell):
        num = numeric_constraint_matrix(maxwell.W, SMALL)
        other = assemble_from_jacobian(maxwell.W.constraints, fields_of(maxwell), SMALL)
        assert np.max(np.abs(num.matrix - other)) <= 1e-9
        assert np.allclose(num.matrix, -num.matrix.T)

    def test_eb_gravity_full_rank(self, gravity):
        out = matrix_check(gravity, LatticeConfig())
        assert out["rank"] == 18 * 64 and out["match"]

    def test_maxwell_a_matrix_vanishes(self, potential):
        num = numeric_constraint_matrix(potential.W, SMALL)
        assert num.rank == 0 and not num.matrix.any()
        other = assemble_from_jacobian(potential.W.constraints, fields_of(potential), SMALL)
        assert numeric_rank(other, SMALL.tol)[0] == 0

    def test_duplicated_constraint_shows_deficit(self, maxwell):
        phi = maxwell.W.constraints[0]
        cons = list(maxwell.W.constraints) + [P.Constraint("twin", phi.expr, "primary", phi.rank)]
        W = P.constraint_matrix(cons, maxwell.model)
        num = numeric_constraint_matrix(W, SMALL)
        assert num.size == 9 * 64 and num.deficit == 3 * 64

    def test_binary_round_trip(self, maxwell, tmp_path):
        M = numeric_constraint_matrix(maxwell.W, SMALL).matrix
        path = tmp_path / "m.bin"
        write_matrix(path, M)
        assert path.stat().st_size == 16 + M.size * 8
        assert np.array_equal(read_matrix(path), M)


class TestFunctionalDerivative:
    def test_curl_functional(self):
        cfg = LatticeConfig(grid=8)
        I = E("E[i]*eps[i,j,k]*d[j](E[k])")
        state = random_state({"E": 1}, cfg, np.random.default_rng(1))
        sym = variation(I, Kind.FIELD, "E", ("a",))
        for comp, site in [((0,), (1, 2, 3)), ((2,), (7, 0, 5))]:
            exact = evaluate(sym, state, cfg, {"a": comp[0] + 1})[site]
            fd = finite_difference_derivative(I, state, cfg, "E", comp, site)
            assert fd == pytest.approx(exact, rel=1e-6)

    def test_report_check(self, maxwell):
        out = derivative_check(maxwell, LatticeConfig())
        assert out["match"] and out["maxRelativeError"] < 1e-6
        assert out["gaugeShiftRelativeChange"] < 1e-9
        assert out["totalDerivativeIntegral"] < 1e-9


@pytest.fixture(scope="module")
def rhs(maxwell):
    return evolution_rhs(maxwell)


class TestEvolution:
    def test_rhs_from_equations(self, rhs):
        assert rhs == {"E": E("c*eps[i,j,k]*d[j](B[k])"), "B": E("-c*eps[i,j,k]*d[j](E[k])")}

    def test_multiplier_in_equations_is_unsupported(self, potential):
        with pytest.raises(OracleUnsupported):
            evolution_rhs(potential)

    def test_zero_state_stays_zero(self, rhs):
        cfg = LatticeConfig(grid=4, steps=20)
        traj = evolve(rhs, {"E": 1, "B": 1}, zero_state({"E": 1, "B": 1}, cfg), cfg)
        assert traj.final.norm() == 0
        assert traj.monitor_drift == 0

    def test_divergence_and_monitor(self, rhs):
        cfg = LatticeConfig(grid=6, steps=200)
        state = random_state({"E": 1, "B": 1}, cfg, np.random.default_rng(2), transverse=True)
        traj = evolve(rhs, {"E": 1, "B": 1}, state, cfg)
        assert max(traj.max_div_step.values()) <= 1e-10
        assert traj.monitor_drift <= 1e-12

    def test_plane_wave_recurrence(self, rhs):
        cfg = LatticeConfig(grid=8)
        state, factor = plane_wave({"E": 1, "B": 1}, cfg)
        history = []
        evolve(rhs, {"E": 1, "B": 1}, state, cfg, steps=12, on_step=lambda n, s: history.append(s["E"][1].copy()))
        for n in range(1, len(history) - 1):
            assert np.allclose(history[n + 1] + history[n - 1], factor * history[n], atol=1e-12)

    def test_unstable_coupling(self):
        rhs = {"E": E("10*B[i]"), "B": E("10*E[i]")}
        cfg = LatticeConfig(grid=2, steps=1000)
        state = random_state({"E": 1, "B": 1}, cfg, np.random.default_rng(0))
        with pytest.raises(UnstableStep):
            evolve(rhs, {"E": 1, "B": 1}, state, cfg)

    def test_groups_must_split(self):
        cfg = LatticeConfig(grid=2, steps=1)
        with pytest.raises(ValueError):
            evolve({"E": E("E[i] + B[i]"), "B": E("E[i]")}, {"E": 1, "B": 1}, zero_state({"E": 1, "B": 1}, cfg), cfg)

    def test_csv(self, rhs, tmp_path):
        cfg = LatticeConfig(grid=4, steps=5)
        state = random_state({"E": 1, "B": 1}, cfg, np.random.default_rng(4), transverse=True)
        traj = evolve(rhs, {"E": 1, "B": 1}, state, cfg)
        path = tmp_path / "t.csv"
        traj.write_csv(path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["step", "t", "maxDivB", "maxDivE", "quadMonitor"]
        assert len(rows) == 7
        assert float(rows[-1][4]) == pytest.approx(float(rows[1][4]), rel=1e-12)

    def test_per_mode_ranks(self, rhs):
        out = per_mode_ranks(rhs, {"E": 1, "B": 1}, LatticeConfig(grid=8))
        # central differences see no wave vector at k = 0 or pi on every axis
        assert out["static"] == {0: 8}
        assert max(out["propagating"], key=out["propagating"].get) == 4


def test_run_oracle_is_deterministic(maxwell, tmp_path):
    cfg = LatticeConfig(grid=4, steps=30, seed=7)
    a = run_oracle(maxwell, cfg, str(tmp_path))
    b = run_oracle(maxwell, cfg)
    assert a == b
    assert (tmp_path / "constraint_matrix.bin").exists()
    assert (tmp_path / "trajectory.csv").exists()


def test_run_oracle_skips_gauge_model(potential):
    out = run_oracle(potential, LatticeConfig(grid=4, steps=10))
    assert "skipped" in out["evolution"]
    assert out["constraintMatrix"]["match"]
