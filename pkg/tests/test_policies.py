import numpy as np
import pytest

from remest import (
    HarqModel,
    PolicyGrid,
    arq_baseline_policy,
    build_mdp,
    delay_optimal_policy,
    load_policy_csv,
    myopic_policy,
    psi_policy,
    save_policy_csv,
    solve,
    verify_switching,
)

Q_MAX = 20


def myopic_oracle(sk, m, q_max):
    """Independent comparator: expected next-step cost of each action."""
    ct = sk.cost_table
    grid = {}
    for q in range(q_max + 1):
        for r in range(q + 1):
            g0 = m.failure_prob(0)
            g1 = m.failure_prob_clamped(r + 1)
            fresh = g0 * ct[q + 1] + (1 - g0) * ct[0]
            retransmit = g1 * ct[q + 1] + (1 - g1) * ct[r + 1]
            grid[(r, q)] = 1 if retransmit < fresh else 0
    return grid


class TestPolicyGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            PolicyGrid(2, np.zeros((2, 2), dtype=np.int8))
        bad = np.zeros((3, 3), dtype=np.int8)
        bad[0, 1] = 7
        with pytest.raises(ValueError):
            PolicyGrid(2, bad)

    def test_action_accessor(self):
        grid = psi_policy(4)
        assert grid.action(2, 2) == 0
        assert grid.action(1, 4) == 1
        with pytest.raises(ValueError):
            grid.action(3, 2)

    def test_equality_ignores_label(self):
        a = arq_baseline_policy(4)
        b = a.relabeled("other")
        assert a == b
        assert a != psi_policy(4)

    def test_invalid_region_normalized(self):
        actions = np.ones((3, 3), dtype=np.int8)  # junk below the diagonal too
        grid = PolicyGrid(2, actions)
        assert grid.actions[2, 0] == 0  # r > q forced to zero


class TestMyopic:
    def test_matches_expected_cost_oracle(self, sk, channel):
        grid = myopic_policy(sk, channel, Q_MAX)
        oracle = myopic_oracle(sk, channel, Q_MAX)
        for (r, q), want in oracle.items():
            assert grid.action(r, q) == want, (r, q)

    def test_diagonal_always_fresh(self, sk, channel):
        grid = myopic_policy(sk, channel, Q_MAX)
        for q in range(Q_MAX + 1):
            assert grid.action(q, q) == 0

    def test_low_r_high_q_retransmits(self, sk, channel):
        grid = myopic_policy(sk, channel, Q_MAX)
        assert grid.action(0, 10) == 1

    def test_near_diagonal_fresh(self, sk, channel):
        # one step of staleness is not worth a retransmission here
        assert myopic_policy(sk, channel, Q_MAX).action(0, 1) == 0

    def test_arq_degeneration_all_fresh(self, sk):
        grid = myopic_policy(sk, HarqModel(0.8, 1.0, r_cap=Q_MAX), Q_MAX)
        assert grid == arq_baseline_policy(Q_MAX)

    def test_is_switching(self, sk, channel):
        assert verify_switching(myopic_policy(sk, channel, Q_MAX)).ok

    def test_table_coverage_required(self, sk, channel):
        with pytest.raises(ValueError):
            myopic_policy(sk, channel, sk.n_max)


class TestDelayOptimal:
    def test_perfect_channel(self, sk):
        grid = delay_optimal_policy(HarqModel(1.0, 0.5, r_cap=Q_MAX), Q_MAX)
        assert grid == arq_baseline_policy(Q_MAX)

    def test_arq_degeneration(self):
        grid = delay_optimal_policy(HarqModel(0.8, 1.0, r_cap=Q_MAX), Q_MAX)
        assert grid == arq_baseline_policy(Q_MAX)

    def test_more_fresh_states_than_mse_optimal(self, sk, channel):
        mse_grid = solve(build_mdp(sk, channel, Q_MAX, "mse")).policy
        delay_grid = delay_optimal_policy(channel, Q_MAX)
        assert len(delay_grid.zero_states()) > len(mse_grid.zero_states())


class TestFixedPolicies:
    def test_arq_baseline(self):
        grid = arq_baseline_policy(Q_MAX)
        assert grid.action(0, 0) == 0
        assert grid.action(3, 7) == 0
        assert all(grid.action(r, q) == 0 for (r, q) in grid.states())

    def test_psi(self):
        grid = psi_policy(Q_MAX)
        assert grid.action(2, 2) == 0
        assert grid.action(1, 4) == 1
        assert grid.action(0, 0) == 0
        for (r, q) in grid.states():
            assert grid.action(r, q) == (0 if r == q else 1)


class TestVerifySwitching:
    def test_constant_policy(self):
        assert verify_switching(arq_baseline_policy(Q_MAX)).ok

    def test_psi_is_switching(self):
        # fresh exactly on the diagonal satisfies both monotonicity conditions
        report = verify_switching(psi_policy(Q_MAX))
        assert report.ok
        assert report.violations == []

    def test_constructed_violation(self):
        actions = np.zeros((6, 6), dtype=np.int8)
        actions[0, 4] = 1  # but (0, 5) stays 0
        report = verify_switching(PolicyGrid(5, actions))
        assert not report.ok
        assert ((0, 4), (0, 5), "monotone-in-q") in report.violations

    def test_violation_in_r(self):
        actions = np.zeros((6, 6), dtype=np.int8)
        actions[1, 5] = 1
        actions[0, 5] = 0  # fresh below a retransmitting r: fine
        actions[2, 4] = 1
        actions[1, 4] = 0  # fresh at r=1 forces fresh at r=2: violated
        report = verify_switching(PolicyGrid(5, actions))
        assert ((1, 4), (2, 4), "monotone-in-r") in report.violations

    def test_optimal_policies_switching_and_zero_set_monotone_in_h(self, sk, channel):
        mse_model = build_mdp(sk, channel, Q_MAX, "mse")
        grid_h05 = solve(mse_model).policy
        channel_h09 = HarqModel(0.8, 0.9, r_cap=Q_MAX)
        grid_h09 = solve(build_mdp(sk, channel_h09, Q_MAX, "mse")).policy
        assert verify_switching(grid_h05).ok
        assert verify_switching(grid_h09).ok
        # worse combining: the fresh region can only grow
        assert grid_h05.zero_states() <= grid_h09.zero_states()


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path, sk, channel):
        grid = myopic_policy(sk, channel, Q_MAX)
        path = tmp_path / "policy.csv"
        save_policy_csv(grid, path)
        loaded = load_policy_csv(path, label="reloaded")
        assert loaded == grid
        assert loaded.label == "reloaded"

    def test_rejects_partial_grid(self, tmp_path):
        path = tmp_path / "partial.csv"
        path.write_text("r,q,action\n0,0,0\n0,1,1\n")  # (1,1) missing
        with pytest.raises(ValueError):
            load_policy_csv(path)

    def test_rejects_bad_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("r,q,action\n2,1,0\n")
        with pytest.raises(ValueError):
            load_policy_csv(path)
        path.write_text("r,q,action\n0,0,5\n")
        with pytest.raises(ValueError):
            load_policy_csv(path)
        path.write_text("x,y,z\n0,0,0\n")
        with pytest.raises(ValueError):
            load_policy_csv(path)

    def test_serialization_order(self, tmp_path):
        path = tmp_path / "psi.csv"
        save_policy_csv(psi_policy(2), path)
        rows = path.read_text().strip().splitlines()
        assert rows == ["r,q,action", "0,0,0", "0,1,1", "1,1,0", "0,2,1", "1,2,1", "2,2,0"]
