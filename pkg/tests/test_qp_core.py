import numpy as np
import pytest

from fxtsafe.qp_core import (QpProblem, QpStatus, active_set_oracle,
                             check_point, format_problem, solve_qp)


def make_problem(h, f, a, b):
    return QpProblem(h_diag=h, f_lin=f, a_mat=a, b_vec=b)


def random_problem(rng, n_max=7, k_max=12, feasible_bias=0.8):
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    h = rng.uniform(0.1, 10.0, n)
    f = rng.uniform(-5.0, 5.0, n)
    a = rng.uniform(-5.0, 5.0, (k, n))
    if rng.uniform() < feasible_bias:
        z0 = rng.uniform(-1.0, 1.0, n)
        b = a @ z0 + rng.uniform(0.0, 3.0, k)
    else:
        b = rng.uniform(-5.0, 5.0, k)
    return make_problem(h, f, a, b)


class TestValidation:
    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ValueError):
            make_problem([0.0], [0.0], [[1.0]], [1.0])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            make_problem([1.0, 1.0], [0.0, 0.0], [[1.0, 0.0]], [1.0, 2.0])


class TestSolveQp:
    def test_projection_onto_halfline(self):
        # min 1/2 z^2 s.t. z <= -1
        sol = solve_qp(make_problem([1.0], [0.0], [[1.0]], [-1.0]))
        assert sol.status is QpStatus.OPTIMAL
        assert sol.z_star[0] == pytest.approx(-1.0, abs=1e-12)
        assert sol.objective == pytest.approx(0.5, abs=1e-12)

    def test_detects_empty_constraint_set(self):
        # z <= -1 stacked with z >= 1 on the first coordinate
        prob = make_problem([1.0, 1.0], [1.0, 0.0],
                            [[1.0, 0.0], [-1.0, 0.0]], [-1.0, -1.0])
        sol = solve_qp(prob)
        assert sol.status is QpStatus.INFEASIBLE
        assert sol.infeasibility > 1e-9
        # least achievable max violation of {z <= -1} /\ {z >= 1} is 1
        assert sol.infeasibility == pytest.approx(1.0, abs=1e-6)

    def test_unconstrained_optimum_inside(self):
        sol = solve_qp(make_problem([2.0], [-2.0], [[1.0]], [5.0]))
        assert sol.status is QpStatus.OPTIMAL
        assert sol.z_star[0] == pytest.approx(1.0, abs=1e-12)

    def test_matches_oracle_on_small_instance(self):
        rng = np.random.default_rng(7)
        prob = random_problem(rng, n_max=5, k_max=8)
        sol = solve_qp(prob)
        ora = active_set_oracle(prob)
        assert sol.status is QpStatus.OPTIMAL
        assert abs(sol.objective - ora.objective) <= 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        prob = random_problem(rng)
        a = solve_qp(prob)
        b = solve_qp(prob)
        assert np.array_equal(a.z_star, b.z_star)
        assert a.objective == b.objective
        assert a.status == b.status

    def test_cost_scaling_leaves_minimizer_unchanged(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            prob = random_problem(rng)
            sol = solve_qp(prob)
            if sol.status is not QpStatus.OPTIMAL:
                continue
            scaled = make_problem(137.0 * prob.h_diag, 137.0 * prob.f_lin,
                                  prob.a_mat, prob.b_vec)
            sol_scaled = solve_qp(scaled)
            assert sol_scaled.status is QpStatus.OPTIMAL
            assert np.max(np.abs(sol.z_star - sol_scaled.z_star)) <= 1e-8

    def test_warm_start_agrees_with_cold(self):
        rng = np.random.default_rng(5)
        prob = random_problem(rng)
        cold = solve_qp(prob)
        warm = solve_qp(prob, warm_start=cold.z_star)
        assert warm.status is QpStatus.OPTIMAL
        assert abs(warm.objective - cold.objective) <= 1e-10

    def test_never_reports_infeasible_point_as_optimal(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            prob = random_problem(rng)
            sol = solve_qp(prob)
            if sol.status is QpStatus.OPTIMAL:
                assert sol.max_violation <= 1e-9
                assert sol.stationarity_residual <= 1e-8


class TestOracle:
    def test_inactive_constraint(self):
        sol = active_set_oracle(make_problem([1.0], [0.0], [[1.0]], [5.0]))
        assert sol.status is QpStatus.OPTIMAL
        assert sol.z_star[0] == pytest.approx(0.0, abs=1e-12)

    def test_active_constraint(self):
        sol = active_set_oracle(make_problem([1.0], [0.0], [[1.0]], [-1.0]))
        assert sol.status is QpStatus.OPTIMAL
        assert sol.z_star[0] == pytest.approx(-1.0, abs=1e-12)

    def test_box_plus_coupling_row_matches_solver(self):
        # 3 variables in a box with one coupling constraint
        h = [1.0, 2.0, 3.0]
        f = [-1.0, -2.0, 3.0]
        a = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
             [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
             [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
             [1.0, 1.0, 1.0]]
        b = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.4]
        prob = make_problem(h, f, a, b)
        sol = solve_qp(prob)
        ora = active_set_oracle(prob)
        assert sol.status is QpStatus.OPTIMAL
        assert ora.status is QpStatus.OPTIMAL
        assert np.max(np.abs(sol.z_star - ora.z_star)) <= 1e-8

    def test_rejects_oversized_instances(self):
        k = 15
        prob = make_problem([1.0], [0.0], np.ones((k, 1)), np.ones(k))
        with pytest.raises(ValueError):
            active_set_oracle(prob)

    def test_confirms_emptiness(self):
        prob = make_problem([1.0], [0.5], [[1.0], [-1.0]], [-2.0, -3.0])
        sol = active_set_oracle(prob)
        assert sol.status is QpStatus.INFEASIBLE
        assert sol.infeasibility > 0.0


class TestCheckPoint:
    def test_interior_point_has_zero_violation(self):
        prob = make_problem([1.0, 1.0], [0.0, 0.0],
                            [[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
        viol, obj = check_point(prob, [0.2, -0.3])
        assert viol == 0.0
        assert obj == pytest.approx(0.5 * (0.04 + 0.09), abs=1e-15)

    def test_single_row_violation_is_reported_exactly(self):
        prob = make_problem([1.0], [0.0], [[1.0]], [1.0])
        viol, _ = check_point(prob, [1.3])
        assert viol == pytest.approx(0.3, abs=1e-12)

    def test_dimension_mismatch(self):
        prob = make_problem([1.0], [0.0], [[1.0]], [1.0])
        with pytest.raises(ValueError):
            check_point(prob, [1.0, 2.0])


def test_format_problem_round_trips_values():
    prob = make_problem([1.5], [-0.25], [[2.0]], [0.125])
    text = format_problem(prob)
    lines = text.strip().splitlines()
    assert lines[0] == "1 1"
    assert float(lines[1]) == 1.5
    assert float(lines[2]) == -0.25
    row = [float(tok) for tok in lines[3].split()]
    assert row == [2.0, 0.125]
