import time

import numpy as np
import pytest

from iabplan import (AnchorSet, BudgetConfig, ConvergenceError, SolverConfig,
                     Variant, assemble, check_kkt, make_scenario, solve,
                     strictly_feasible_point, validate)
from iabplan.testkit import (analytic_chain_instance, analytic_single_instance,
                             links_from_caps, random_tiny_instance)

GAP = SolverConfig().duality_gap_tol


def solve_checked(prob, cfg=None):
    """Solve and assert the certificate holds (acceptance criterion 3)."""
    sol, cert = solve(prob, cfg)
    assert cert.converged
    assert cert.gap_rel <= (cfg or SolverConfig()).duality_gap_tol
    assert cert.max_primal_residual <= 1e-9
    kkt = check_kkt(prob, sol)
    assert kkt.ok, f"KKT failed: {kkt}"
    return sol, cert


class TestAnalyticOptima:
    def test_single_ue_half_capacity(self):
        t0 = time.monotonic()
        prob, c = analytic_single_instance(c_bps=4e9)
        sol, _ = solve_checked(prob)
        assert sol.gm_bps == pytest.approx(c / 2, rel=1e-6)
        assert sol.r_ul_bps[0] == pytest.approx(c / 2, rel=1e-5)
        assert sol.r_dl_bps[0] == pytest.approx(c / 2, rel=1e-5)
        assert time.monotonic() - t0 < 1.0

    def test_two_hop_chain_harmonic_rate(self):
        t0 = time.monotonic()
        prob, expected = analytic_chain_instance(3e9, 5e9)
        sol, _ = solve_checked(prob)
        assert sol.gm_bps == pytest.approx(expected, rel=1e-6)
        assert time.monotonic() - t0 < 1.0

    def test_equal_capacity_chain_quarter_rate(self):
        prob, expected = analytic_chain_instance(4e9, 4e9)
        assert expected == pytest.approx(1e9)
        sol, _ = solve_checked(prob)
        assert sol.gm_bps == pytest.approx(4e9 / 4, rel=1e-6)


class TestOptimality:
    def test_beats_any_feasible_candidate(self):
        for seed in (0, 3, 5):
            prob = random_tiny_instance(seed)
            sol, _ = solve_checked(prob)
            x_cand = strictly_feasible_point(prob)
            assert validate(prob, x_cand, tol=1e-9).ok
            assert sol.gm_bps >= prob.gm_bps(x_cand) * (1 - 2 * GAP)

    def test_objective_trace_nondecreasing(self):
        prob = random_tiny_instance(2)
        _, cert = solve_checked(prob)
        trace = np.asarray(cert.objective_trace)
        assert (np.diff(trace) >= -1e-9 * np.abs(trace[:-1])).all()

    def test_deterministic_repeat(self):
        prob = random_tiny_instance(4)
        sol_a, cert_a = solve(prob)
        sol_b, cert_b = solve(prob)
        assert np.array_equal(sol_a.x, sol_b.x)
        assert cert_a.inner_iters == cert_b.inner_iters
        assert sol_a.gm_bps == sol_b.gm_bps


class TestInvariants:
    def test_scale_covariance(self):
        # multiplying every capacity (and the fiber pipe) by k scales GM by k
        base = dict(cap_ub=[[0.0, 3.1e9]], cap_bu=[[0.0], [2.7e9]],
                    cap_bb=[[0.0, 4.3e9], [4.3e9, 0.0]])
        k = 1.7
        gms = []
        for factor in (1.0, k):
            cfg = BudgetConfig(fiber_capacity_bps=200e9 * factor)
            links = links_from_caps(
                np.asarray(base["cap_ub"]) * factor,
                np.asarray(base["cap_bu"]) * factor,
                np.asarray(base["cap_bb"]) * factor, cfg)
            anchors = AnchorSet(np.array([True, False]))
            pattern = make_scenario(Variant.IAB_ST, links, anchors, seed=0)
            sol, _ = solve_checked(assemble(links, pattern, anchors, cfg))
            gms.append(sol.gm_bps)
        assert gms[1] == pytest.approx(k * gms[0], rel=1e-6)

    def test_ul_dl_swap_symmetry(self):
        cap_ub = np.array([[0.0, 3.5e9], [2.0e9, 2.5e9]])
        cap_bu = np.array([[0.0, 1.8e9], [4.0e9, 3.0e9]]).T
        cap_bb = np.array([[0.0, 5e9], [5e9, 0.0]])
        anchors = AnchorSet(np.array([True, False]))
        gms = []
        for ub, bu in ((cap_ub, cap_bu), (cap_bu.T, cap_ub.T)):
            links = links_from_caps(ub, bu, cap_bb)
            pattern = make_scenario(Variant.IAB_MESH_LB, links, anchors, seed=0)
            sol, _ = solve_checked(assemble(links, pattern, anchors))
            gms.append(sol.gm_bps)
        assert gms[0] == pytest.approx(gms[1], rel=1e-6)


class TestCheckKkt:
    def test_perturbed_solution_fails_stationarity(self):
        prob, _ = analytic_single_instance()
        sol, _ = solve(prob)
        bad = np.array(sol.x)
        cls = prob.flow_class_slices()
        k = cls["ul_access"].start
        delta = 0.01 * bad[k]
        bad[k] -= delta                  # shrink the UL flow 1%
        m_ul = 2 * prob.n_flow + [i for i, (_b, d) in enumerate(prob.m_vars)
                                  if d == "U"][0]
        bad[m_ul] -= delta               # keep conservation intact
        from dataclasses import replace
        report = check_kkt(prob, replace(sol, x=bad))
        assert not report.ok
        assert report.stationarity > 1e-6

    def test_boundary_infeasible_point_fails_primal(self):
        prob, _ = analytic_single_instance()
        sol, _ = solve(prob)
        bad = np.array(sol.x)
        bad[prob.sl_time] = 0.8          # resource row sums to 1.6
        from dataclasses import replace
        report = check_kkt(prob, replace(sol, x=bad))
        assert not report.ok
        assert report.primal_ineq > 1e-9


class TestFailureModes:
    def test_iteration_cap_carries_best_iterate(self):
        prob, _ = analytic_single_instance()
        cfg = SolverConfig(max_outer_iters=2)
        with pytest.raises(ConvergenceError) as err:
            solve(prob, cfg)
        assert err.value.best_x is not None
        assert err.value.gap is not None
        assert validate(prob, err.value.best_x, tol=1e-9).ok
