import warnings

import numpy as np
import pytest

import remest
from remest import (
    HarqModel,
    LtiSystem,
    SimConfig,
    arq_baseline_policy,
    build_mdp,
    psi_policy,
    riccati_steady_state,
    simulate_chain,
    simulate_trajectory,
    solve,
)
from remest.simulate import report_summary, write_report_csv

Q_MAX = 20


def reference_chain(policy, model, sk, cfg):
    """Slow dictionary-based reference simulator, used as an exact oracle.

    Consumes the same per-run uniform streams as the production kernels and
    additionally asserts the structural invariants (r <= q and the age
    identity age == previous q + 1) at every step.
    """
    table = list(sk.cost_table)
    table_end = len(table) - 1
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    step_mse = np.zeros(cfg.horizon)
    step_aoi = np.zeros(cfg.horizon)
    run_mse = np.zeros(cfg.runs)
    run_aoi = np.zeros(cfg.runs)
    for i in range(cfg.runs):
        u = np.random.Generator(np.random.Philox(children[i])).random(cfg.horizon)
        r, q = 0, cfg.initial_q
        totals = [0.0, 0.0]
        for k in range(cfg.horizon):
            assert r <= q
            age = q + 1  # identity: age at step k equals previous q + 1
            cost = table[q]
            step_mse[k] += cost
            step_aoi[k] += age
            totals[0] += cost
            totals[1] += age
            action = policy.actions[min(r, policy.q_max), min(q, policy.q_max)]
            r = 0 if action == 0 else min(r + 1, policy.q_max)
            if u[k] < model.failure_prob_clamped(r):
                q = min(q + 1, table_end)
            else:
                q = r
        run_mse[i] = totals[0] / cfg.horizon
        run_aoi[i] = totals[1] / cfg.horizon
    steps = np.arange(1, cfg.horizon + 1)
    return (np.cumsum(step_mse / cfg.runs) / steps,
            np.cumsum(step_aoi / cfg.runs) / steps, run_mse, run_aoi)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(horizon=0, runs=1, seed=0)
        with pytest.raises(ValueError):
            SimConfig(horizon=1, runs=0, seed=0)
        with pytest.raises(ValueError):
            SimConfig(horizon=1, runs=1, seed=0, mode="magic")
        with pytest.raises(ValueError):
            SimConfig(horizon=1, runs=1, seed=0, initial_q=-1)


class TestChainSim:
    def test_perfect_channel_pins_base_cost(self, sk):
        channel = HarqModel(1.0, 0.5, r_cap=Q_MAX)
        cfg = SimConfig(horizon=300, runs=20, seed=5)
        report = simulate_chain(psi_policy(Q_MAX), channel, sk, cfg)
        base = sk.cost_table[0]
        assert np.abs(report.avg_mse_vs_k - base).max() < 1e-9
        assert report.final_avg_mse == pytest.approx(9.2, abs=0.02)
        assert np.abs(report.avg_aoi_vs_k - 1.0).max() < 1e-12

    def test_matches_reference_simulator_exactly(self, sk, channel):
        cfg = SimConfig(horizon=80, runs=7, seed=123)
        grid = psi_policy(Q_MAX)
        report = simulate_chain(grid, channel, sk, cfg)
        ref_mse, ref_aoi, ref_run_mse, ref_run_aoi = reference_chain(grid, channel, sk, cfg)
        assert np.array_equal(report.avg_mse_vs_k, ref_mse)
        assert np.array_equal(report.avg_aoi_vs_k, ref_aoi)
        assert np.array_equal(report.run_final_mse, ref_run_mse)
        assert np.array_equal(report.run_final_aoi, ref_run_aoi)

    def test_custom_initial_q(self, sk, channel):
        cfg = SimConfig(horizon=5, runs=3, seed=9, initial_q=4)
        report = simulate_chain(arq_baseline_policy(Q_MAX), channel, sk, cfg)
        # first step accrues the staleness cost of q = 4
        assert report.avg_mse_vs_k[0] == pytest.approx(sk.cost_table[4])
        assert report.avg_aoi_vs_k[0] == pytest.approx(5.0)

    def test_determinism(self, sk, channel):
        cfg = SimConfig(horizon=200, runs=40, seed=77)
        grid = arq_baseline_policy(Q_MAX)
        r1 = simulate_chain(grid, channel, sk, cfg)
        r2 = simulate_chain(grid, channel, sk, cfg)
        assert np.array_equal(r1.avg_mse_vs_k, r2.avg_mse_vs_k)
        assert np.array_equal(r1.run_final_mse, r2.run_final_mse)

    def test_thread_count_does_not_change_results(self, sk, channel):
        cfg = SimConfig(horizon=150, runs=300, seed=13)
        grid = psi_policy(Q_MAX)
        r1 = simulate_chain(grid, channel, sk, cfg, threads=1)
        r3 = simulate_chain(grid, channel, sk, cfg, threads=3)
        assert np.array_equal(r1.avg_mse_vs_k, r3.avg_mse_vs_k)
        assert np.array_equal(r1.run_final_mse, r3.run_final_mse)

    def test_threads_env_var(self, sk, channel, monkeypatch):
        cfg = SimConfig(horizon=100, runs=260, seed=14)
        grid = psi_policy(Q_MAX)
        baseline = simulate_chain(grid, channel, sk, cfg, threads=1)
        monkeypatch.setenv("REMEST_THREADS", "2")
        bounded = simulate_chain(grid, channel, sk, cfg)
        assert np.array_equal(baseline.avg_mse_vs_k, bounded.avg_mse_vs_k)

    def test_backend_equivalence(self, sk, channel):
        if not remest.has_compiled():
            pytest.skip("compiled kernels not built")
        cfg = SimConfig(horizon=250, runs=60, seed=21)
        grid = psi_policy(Q_MAX)
        rp = simulate_chain(grid, channel, sk, cfg, backend="python")
        rc = simulate_chain(grid, channel, sk, cfg, backend="compiled")
        assert np.array_equal(rp.avg_mse_vs_k, rc.avg_mse_vs_k)
        assert np.array_equal(rp.avg_aoi_vs_k, rc.avg_aoi_vs_k)
        assert np.array_equal(rp.run_final_mse, rc.run_final_mse)
        assert np.array_equal(rp.run_final_aoi, rc.run_final_aoi)

    def test_mse_floor(self, sk, channel):
        cfg = SimConfig(horizon=500, runs=50, seed=3)
        for grid in (arq_baseline_policy(Q_MAX), psi_policy(Q_MAX)):
            report = simulate_chain(grid, channel, sk, cfg)
            assert report.final_avg_mse >= sk.cost_table[0] - 1e-12
            assert np.all(report.avg_mse_vs_k >= sk.cost_table[0] - 1e-12)

    def test_saturation_warns(self, system):
        sk_small = riccati_steady_state(system, q_max=2)
        channel = HarqModel(0.1, 1.0, r_cap=2)
        cfg = SimConfig(horizon=300, runs=10, seed=1)
        with pytest.warns(RuntimeWarning, match="saturated"):
            report = simulate_chain(arq_baseline_policy(2), channel, sk_small, cfg)
        assert report.saturation_events > 0

    def test_mode_checked(self, sk, channel):
        cfg = SimConfig(horizon=10, runs=2, seed=0, mode="trajectory")
        with pytest.raises(ValueError):
            simulate_chain(arq_baseline_policy(Q_MAX), channel, sk, cfg)

    def test_ci_halfwidth(self, sk, channel):
        cfg = SimConfig(horizon=100, runs=200, seed=8)
        report = simulate_chain(arq_baseline_policy(Q_MAX), channel, sk, cfg)
        expected = 1.96 * report.run_final_mse.std(ddof=1) / np.sqrt(200)
        assert report.mse_ci95 == pytest.approx(expected)


class TestTrajectorySim:
    def test_perfect_channel_matches_base_cost(self, system, sk):
        channel = HarqModel(1.0, 0.5, r_cap=Q_MAX)
        cfg = SimConfig(horizon=40, runs=800, seed=17, mode="trajectory")
        report = simulate_trajectory(arq_baseline_policy(Q_MAX), system, channel, sk, cfg)
        base = sk.cost_table[0]
        se = report.run_final_mse.std(ddof=1) / np.sqrt(report.runs)
        assert abs(report.final_avg_mse - base) <= 3 * se
        assert np.abs(report.analytic_avg_mse_vs_k - base).max() < 1e-9

    def test_noiseless_observable_system_has_zero_error(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            system = LtiSystem([[1.8, 0.2], [0.2, 0.8]], np.eye(2), np.zeros((2, 2)), 1e-12 * np.eye(2))
            sk = riccati_steady_state(system, q_max=5)
        channel = HarqModel(1.0, 0.5, r_cap=5)
        cfg = SimConfig(horizon=30, runs=50, seed=2, mode="trajectory")
        report = simulate_trajectory(arq_baseline_policy(5), system, channel, sk, cfg)
        assert report.final_avg_mse < 1e-8

    def test_empirical_matches_analytic_cost(self, system, sk, channel):
        grid = solve(build_mdp(sk, channel, Q_MAX, "mse")).policy
        cfg = SimConfig(horizon=40, runs=1500, seed=19, mode="trajectory")
        report = simulate_trajectory(grid, system, channel, sk, cfg)
        se_emp = report.run_final_mse.std(ddof=1) / np.sqrt(report.runs)
        se_ana = report.run_final_analytic_mse.std(ddof=1) / np.sqrt(report.runs)
        se = np.hypot(se_emp, se_ana)
        assert abs(report.final_avg_mse - report.final_analytic_mse) <= 3 * se

    def test_empirical_covariance_shape_and_trace(self, system, sk, channel):
        cfg = SimConfig(horizon=30, runs=400, seed=4, mode="trajectory")
        report = simulate_trajectory(arq_baseline_policy(Q_MAX), system, channel, sk, cfg)
        cov = report.empirical_error_cov
        assert cov.shape == (2, 2)
        mean_step_mse = report.avg_mse_vs_k[-1]
        # trace of the averaged outer products is the mean squared error
        assert np.trace(cov) == pytest.approx(mean_step_mse, rel=1e-9)

    def test_blowup_guard_names_step(self, system, sk, channel):
        cfg = SimConfig(horizon=2000, runs=4, seed=6, mode="trajectory")
        with pytest.raises(RuntimeError, match="at step"):
            simulate_trajectory(arq_baseline_policy(Q_MAX), system, channel, sk, cfg)

    def test_determinism(self, system, sk, channel):
        cfg = SimConfig(horizon=25, runs=60, seed=42, mode="trajectory")
        grid = psi_policy(Q_MAX)
        r1 = simulate_trajectory(grid, system, channel, sk, cfg)
        r2 = simulate_trajectory(grid, system, channel, sk, cfg)
        assert np.array_equal(r1.avg_mse_vs_k, r2.avg_mse_vs_k)
        assert np.array_equal(r1.run_final_mse, r2.run_final_mse)

    def test_mode_and_initial_q_checked(self, system, sk, channel):
        with pytest.raises(ValueError):
            simulate_trajectory(arq_baseline_policy(Q_MAX), system, channel, sk,
                                SimConfig(horizon=10, runs=2, seed=0, mode="analytic"))
        with pytest.raises(ValueError):
            simulate_trajectory(arq_baseline_policy(Q_MAX), system, channel, sk,
                                SimConfig(horizon=10, runs=2, seed=0, mode="trajectory", initial_q=1))


class TestReportOutputs:
    def test_csv_format(self, tmp_path, sk, channel):
        cfg = SimConfig(horizon=12, runs=3, seed=0)
        report = simulate_chain(arq_baseline_policy(Q_MAX), channel, sk, cfg)
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,avg_mse,avg_aoi"
        assert len(lines) == 13
        assert lines[1].startswith("1,")

    def test_summary_fields(self, sk, channel):
        cfg = SimConfig(horizon=12, runs=3, seed=0)
        report = simulate_chain(arq_baseline_policy(Q_MAX), channel, sk, cfg)
        summary = report_summary(report)
        assert summary["runs"] == 3
        assert summary["seed"] == 0
        assert "mse_ci95_halfwidth" in summary
