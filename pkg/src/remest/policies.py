"""Stationary decision policies on the truncated (r, q) grid and the
switching-structure verifier.

Action 0 sends a fresh estimate, action 1 retransmits the in-flight one.
States are all pairs with 0 <= r <= q <= q_max; grids serialize in
lexicographic (q, r) order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .harq import HarqModel
from .lti import SteadyKalman


@dataclass(frozen=True)
class SwitchingReport:
    ok: bool
    violations: list

    def __bool__(self):
        return self.ok


class PolicyGrid:
    """Total action map over the truncated state grid.

    Stored as a (q_max+1) x (q_max+1) int8 array indexed [r, q]; entries
    with r > q are unused and forced to zero so two grids compare equal
    exactly when they agree on the valid region. The label is reporting
    metadata only and never takes part in equality.
    """

    def __init__(self, q_max: int, actions, label: str = ""):
        if q_max < 0:
            raise ValueError("q_max must be non-negative")
        arr = np.array(actions, dtype=np.int8)
        if arr.shape != (q_max + 1, q_max + 1):
            raise ValueError(f"actions must have shape {(q_max + 1, q_max + 1)}, got {arr.shape}")
        valid = np.triu(np.ones_like(arr, dtype=bool))  # r <= q with [r, q] indexing
        if not np.isin(arr[valid], (0, 1)).all():
            raise ValueError("actions must be 0 or 1 on every state with r <= q")
        arr = np.where(valid, arr, 0).astype(np.int8)
        arr.flags.writeable = False
        self.q_max = int(q_max)
        self.actions = arr
        self.label = label

    def action(self, r: int, q: int) -> int:
        if not (0 <= r <= q <= self.q_max):
            raise ValueError(f"state ({r}, {q}) outside grid with q_max={self.q_max}")
        return int(self.actions[r, q])

    def states(self):
        """All (r, q) states in lexicographic (q, r) order."""
        return [(r, q) for q in range(self.q_max + 1) for r in range(q + 1)]

    def zero_states(self):
        """Set of states where a fresh transmission is chosen."""
        return {(r, q) for (r, q) in self.states() if self.actions[r, q] == 0}

    def relabeled(self, label: str) -> "PolicyGrid":
        return PolicyGrid(self.q_max, self.actions, label)

    def __eq__(self, other):
        if not isinstance(other, PolicyGrid):
            return NotImplemented
        return self.q_max == other.q_max and bool(np.all(self.actions == other.actions))

    def __repr__(self):
        ones = int(sum(self.actions[r, q] for (r, q) in self.states()))
        return f"PolicyGrid(q_max={self.q_max}, label={self.label!r}, retransmit_states={ones})"


def myopic_policy(sk: SteadyKalman, m: HarqModel, q_max: int) -> PolicyGrid:
    """One-step-lookahead policy: retransmit only when the expected
    next-step MSE of retransmitting beats that of sending fresh.

    With ct[n] the staleness cost table, the fresh/retransmit expected
    next-step costs at state (r, q) are
        g(0) * ct[q+1] + (1 - g(0)) * ct[0]
        g(r+1) * ct[q+1] + (1 - g(r+1)) * ct[r+1]
    and fresh wins exactly when
        ct[q+1] <= ((1 - g(r+1)) * ct[r+1] - (1 - g(0)) * ct[0]) / (g(0) - g(r+1)).
    When g(0) == g(r+1) (no combining gain) retransmission can never win
    and the action is 0.
    """
    if sk.n_max < q_max + 1:
        raise ValueError(f"cost table covers q up to {sk.n_max}, need {q_max + 1}")
    ct = sk.cost_table
    g0 = m.failure_prob(0)
    actions = np.zeros((q_max + 1, q_max + 1), dtype=np.int8)
    for q in range(q_max + 1):
        for r in range(q + 1):
            gr1 = m.failure_prob_clamped(r + 1)
            if g0 == gr1:
                continue
            threshold = ((1.0 - gr1) * ct[r + 1] - (1.0 - g0) * ct[0]) / (g0 - gr1)
            if ct[q + 1] > threshold:
                actions[r, q] = 1
    return PolicyGrid(q_max, actions, label="myopic")


def delay_optimal_policy(m: HarqModel, q_max: int, solver=None) -> PolicyGrid:
    """Policy minimizing the long-run average information age instead of MSE."""
    from . import mdp as _mdp

    model = _mdp.build_mdp(None, m, q_max, cost_kind="delay")
    solve = solver if solver is not None else _mdp.solve
    solution = solve(model)
    return solution.policy.relabeled("delay")


def arq_baseline_policy(q_max: int) -> PolicyGrid:
    """Always send the freshest estimate (optimal without combining gain)."""
    return PolicyGrid(q_max, np.zeros((q_max + 1, q_max + 1), dtype=np.int8), label="arq")


def psi_policy(q_max: int) -> PolicyGrid:
    """Retransmit everywhere except on the diagonal r == q."""
    actions = np.ones((q_max + 1, q_max + 1), dtype=np.int8)
    np.fill_diagonal(actions, 0)
    return PolicyGrid(q_max, actions, label="psi")


def verify_switching(p: PolicyGrid) -> SwitchingReport:
    """Exhaustively check the two switching monotonicity conditions.

    (i) action 0 at (r, q) forces action 0 at (r+z, q) for every in-grid z;
    (ii) action 1 at (r, q) forces action 1 at (r, q+z) for every in-grid z.
    Violations are reported as (state, state, condition) triples. States at
    the q = q_max boundary have no (ii)-successors and pass vacuously.
    """
    violations = []
    a = p.actions
    for q in range(p.q_max + 1):
        for r in range(q + 1):
            if a[r, q] == 0:
                for z in range(1, q - r + 1):
                    if a[r + z, q] != 0:
                        violations.append(((r, q), (r + z, q), "monotone-in-r"))
            else:
                for z in range(1, p.q_max - q + 1):
                    if a[r, q + z] != 1:
                        violations.append(((r, q), (r, q + z), "monotone-in-q"))
    return SwitchingReport(ok=not violations, violations=violations)


def save_policy_csv(p: PolicyGrid, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "q", "action"])
        for (r, q) in p.states():
            writer.writerow([r, q, int(p.actions[r, q])])


def load_policy_csv(path, label: str = "") -> PolicyGrid:
    """Read a policy grid back from its CSV form.

    The file must contain exactly one row per state of some complete
    truncated grid; q_max is inferred from the largest q present.
    """
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["r", "q", "action"]:
            raise ValueError(f"unexpected policy CSV header: {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"malformed policy CSV row: {row}")
            r, q, action = (int(v) for v in row)
            if not 0 <= r <= q:
                raise ValueError(f"invalid state ({r}, {q}) in policy CSV")
            if action not in (0, 1):
                raise ValueError(f"invalid action {action} at state ({r}, {q})")
            if (r, q) in entries:
                raise ValueError(f"duplicate state ({r}, {q}) in policy CSV")
            entries[(r, q)] = action
    if not entries:
        raise ValueError("policy CSV contains no states")
    q_max = max(q for (_, q) in entries)
    expected = {(r, q) for q in range(q_max + 1) for r in range(q + 1)}
    missing = expected - set(entries)
    if missing:
        raise ValueError(f"policy CSV is not total: missing states {sorted(missing)[:5]}...")
    actions = np.zeros((q_max + 1, q_max + 1), dtype=np.int8)
    for (r, q), action in entries.items():
        actions[r, q] = action
    return PolicyGrid(q_max, actions, label=label)
