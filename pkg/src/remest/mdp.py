"""Truncated average-cost decision model on the (r, q) grid and its
relative-value-iteration solver.

The state is (r, q): r consecutive retransmissions of the in-flight
packet, q the age of the newest estimate the receiver holds. Action 0
sends fresh, action 1 retransmits. Transitions follow the detection
probabilities of the channel model; q saturates at q_max and r at r_cap
so the grid is closed (a standard approximating construction).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .harq import HarqModel
from .lti import SteadyKalman
from .policies import PolicyGrid

COST_KINDS = ("mse", "delay")


class RviConvergenceError(RuntimeError):
    """Value iteration ran out of iterations; carries the last span."""

    def __init__(self, message, span):
        super().__init__(message)
        self.span = span


@dataclass(frozen=True)
class TruncatedMdp:
    q_max: int
    r_cap: int
    cost_kind: str
    states: tuple
    index: dict
    cost: np.ndarray
    succ_idx: np.ndarray  # (2, S) next-state index on detection success
    fail_idx: np.ndarray  # (2, S) next-state index on detection failure
    fail_prob: np.ndarray  # (2, S)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def transitions(self, state, action):
        """Outcome distribution {next_state: probability} for one (state, action)."""
        i = self.index[tuple(state)]
        out = {}
        pf = float(self.fail_prob[action, i])
        for idx, prob in ((self.succ_idx[action, i], 1.0 - pf), (self.fail_idx[action, i], pf)):
            key = self.states[idx]
            out[key] = out.get(key, 0.0) + prob
        return out


@dataclass(frozen=True)
class MdpSolution:
    gain: float
    bias: np.ndarray
    policy: PolicyGrid
    iterations: int
    span_residual: float
    q_max: int
    cost_kind: str
    states: tuple


def enumerate_states(q_max: int):
    """All (r, q) with 0 <= r <= q <= q_max, lexicographic in (q, r)."""
    return tuple((r, q) for q in range(q_max + 1) for r in range(q + 1))


def build_mdp(sk: SteadyKalman | None, m: HarqModel, q_max: int, cost_kind: str = "mse") -> TruncatedMdp:
    """Assemble the truncated decision model.

    Action 0 leads to (0, 0) on success and (0, min(q+1, q_max)) on
    failure, with failure probability g(0). Action 1 leads to
    (r', min(r+1, q_max)) on success and (r', min(q+1, q_max)) on failure
    with r' = min(r+1, r_cap, q_max) and failure probability g(min(r+1,
    r_cap)). The stage cost depends on the state only: the staleness MSE
    table at q, or q+1 for the age-minimizing variant.
    """
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    if cost_kind not in COST_KINDS:
        raise ValueError(f"cost_kind must be one of {COST_KINDS}, got {cost_kind!r}")
    if cost_kind == "mse":
        if sk is None:
            raise ValueError("the MSE cost needs a steady-state filter (sk)")
        if sk.n_max < q_max:
            raise ValueError(f"cost table covers q up to {sk.n_max}, need {q_max}")
    r_cap = min(m.r_cap, q_max)

    states = enumerate_states(q_max)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    cost = np.empty(n)
    succ = np.zeros((2, n), dtype=np.int32)
    fail = np.zeros((2, n), dtype=np.int32)
    pfail = np.zeros((2, n))
    g0 = m.failure_prob(0)
    for i, (r, q) in enumerate(states):
        cost[i] = sk.cost_table[q] if cost_kind == "mse" else q + 1.0
        succ[0, i] = index[(0, 0)]
        fail[0, i] = index[(0, min(q + 1, q_max))]
        pfail[0, i] = g0
        r_next = min(r + 1, r_cap)
        succ[1, i] = index[(r_next, min(r + 1, q_max))]
        fail[1, i] = index[(r_next, min(q + 1, q_max))]
        pfail[1, i] = m.failure_prob_clamped(r + 1)
    for arr in (cost, succ, fail, pfail):
        arr.flags.writeable = False
    return TruncatedMdp(
        q_max=q_max, r_cap=r_cap, cost_kind=cost_kind, states=states, index=index,
        cost=cost, succ_idx=succ, fail_idx=fail, fail_prob=pfail,
    )


def _greedy_policy(mdp: TruncatedMdp, h: np.ndarray, label: str) -> PolicyGrid:
    # ties break toward action 0 (fresh data preferred at equal cost)
    q0 = (1.0 - mdp.fail_prob[0]) * h[mdp.succ_idx[0]] + mdp.fail_prob[0] * h[mdp.fail_idx[0]]
    q1 = (1.0 - mdp.fail_prob[1]) * h[mdp.succ_idx[1]] + mdp.fail_prob[1] * h[mdp.fail_idx[1]]
    choose_retransmit = q1 < q0
    actions = np.zeros((mdp.q_max + 1, mdp.q_max + 1), dtype=np.int8)
    for i, (r, q) in enumerate(mdp.states):
        if choose_retransmit[i]:
            actions[r, q] = 1
    return PolicyGrid(mdp.q_max, actions, label=label)


def relative_value_iteration(
    mdp: TruncatedMdp,
    tol: float = 1e-9,
    max_iter: int = 100000,
    damping: float = 0.0,
    backend=None,
) -> MdpSolution:
    """Solve for the average-cost-optimal stationary deterministic policy.

    Iterates h <- Bellman(h) - Bellman(h)[ref] with reference state (0, 0),
    stopping when the span of the increments falls below tol. When the
    stage costs are large (the MSE table grows like rho^2(A) per step of
    staleness) the span cannot reach a tight tol in float64; the iteration
    then terminates at its exact numerical fixed point and reports the
    achieved span as span_residual. The gain estimate is accurate to about
    span_residual. Optional damping in (0, 1) breaks periodic oscillation.

    Raises RviConvergenceError when max_iter sweeps finish without either
    stopping condition.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must be in [0, 1)")
    kernel = _kernels.rvi_kernel(backend)
    h = np.zeros(mdp.n_states)
    ref = mdp.index[(0, 0)]
    gain, iterations, span, converged = kernel(
        mdp.cost, mdp.succ_idx[0], mdp.fail_idx[0], mdp.fail_prob[0],
        mdp.succ_idx[1], mdp.fail_idx[1], mdp.fail_prob[1],
        ref, tol, max_iter, damping, h,
    )
    if not converged:
        raise RviConvergenceError(
            f"value iteration did not converge within {max_iter} sweeps (span {span:.3e}); "
            "the chain may be periodic, retry with damping",
            span,
        )
    policy = _greedy_policy(mdp, h, label=f"optimal-{mdp.cost_kind}")
    h.flags.writeable = False
    return MdpSolution(
        gain=float(gain), bias=h, policy=policy, iterations=int(iterations),
        span_residual=float(span), q_max=mdp.q_max, cost_kind=mdp.cost_kind,
        states=mdp.states,
    )


def solve(mdp: TruncatedMdp, tol: float = 1e-9, max_iter: int = 100000, backend=None) -> MdpSolution:
    """relative_value_iteration with an automatic damped retry on oscillation."""
    try:
        return relative_value_iteration(mdp, tol=tol, max_iter=max_iter, backend=backend)
    except RviConvergenceError:
        return relative_value_iteration(mdp, tol=tol, max_iter=max_iter, damping=0.01, backend=backend)


def evaluate_policy(mdp: TruncatedMdp, policy: PolicyGrid) -> float:
    """Exact long-run average cost of the chain induced by a policy.

    Solves for the stationary distribution of the policy's transition
    matrix; the chain must be unichain (one recurrent class). Raises
    RuntimeError when the stationary solve fails or is inconsistent,
    which signals reducible or absorbing structure.
    """
    if policy.q_max != mdp.q_max:
        raise ValueError(f"policy grid q_max={policy.q_max} does not match model q_max={mdp.q_max}")
    n = mdp.n_states
    actions = np.array([policy.actions[r, q] for (r, q) in mdp.states])
    trans = np.zeros((n, n))
    rows = np.arange(n)
    pf = mdp.fail_prob[actions, rows]
    np.add.at(trans, (rows, mdp.succ_idx[actions, rows]), 1.0 - pf)
    np.add.at(trans, (rows, mdp.fail_idx[actions, rows]), pf)
    lhs = trans.T - np.eye(n)
    lhs[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("stationary distribution solve failed (reducible chain?)") from exc
    if pi.min() < -1e-9 or abs(pi.sum() - 1.0) > 1e-9:
        raise RuntimeError("no valid stationary distribution (reducible or absorbing structure)")
    residual = float(np.abs(trans.T @ pi - pi).max())
    if residual > 1e-8:
        raise RuntimeError(f"stationary distribution residual too large ({residual:.3e})")
    pi = np.clip(pi, 0.0, None)
    return float(pi @ mdp.cost)


def save_bias_csv(solution: MdpSolution, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "q", "bias"])
        for (r, q), value in zip(solution.states, solution.bias):
            writer.writerow([r, q, f"{value:.17g}"])


def solution_summary(solution: MdpSolution) -> dict:
    return {
        "gain": solution.gain,
        "iterations": solution.iterations,
        "span_residual": solution.span_residual,
        "q_max": solution.q_max,
        "cost_kind": solution.cost_kind,
    }


def save_solution_json(solution: MdpSolution, path):
    with open(path, "w") as fh:
        json.dump(solution_summary(solution), fh, indent=2)
        fh.write("\n")
