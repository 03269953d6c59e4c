"""Monte-Carlo evaluation of decision policies.

Two modes: the analytic chain mode walks the (r, q) state only and accrues
the exact per-step MSE from the staleness cost table; the trajectory mode
also draws the physical process, runs the sensor filter at its steady
state, applies the receiver's prediction estimator, and reports the
empirical squared error next to the analytic value for the same realized
staleness. Runs use independent counter-based streams split from the
master seed, so results are reproducible and independent of the number of
worker threads.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .harq import HarqModel
from .lti import LtiSystem, SteadyKalman
from .policies import PolicyGrid

CHUNK_RUNS = 128  # fixed chunk size keeps reductions independent of thread count


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    runs: int
    seed: int
    initial_q: int = 0
    mode: str = "analytic"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.initial_q < 0:
            raise ValueError("initial_q must be non-negative")
        if self.mode not in ("analytic", "trajectory"):
            raise ValueError(f"mode must be 'analytic' or 'trajectory', got {self.mode!r}")


@dataclass(frozen=True)
class SimReport:
    label: str
    mode: str
    horizon: int
    runs: int
    seed: int
    avg_mse_vs_k: np.ndarray  # running mean of the per-step MSE, averaged over runs
    avg_aoi_vs_k: np.ndarray
    final_avg_mse: float
    final_avg_aoi: float
    run_final_mse: np.ndarray  # per-run horizon averages, for confidence intervals
    run_final_aoi: np.ndarray
    mse_ci95: float
    aoi_ci95: float
    saturation_events: int = 0


@dataclass(frozen=True)
class TrajectoryReport(SimReport):
    """Chain statistics plus the empirical quantities from the drawn trajectories.

    avg_mse_vs_k / final_avg_mse hold the empirical squared error; the
    analytic_* fields hold the cost-table values for the same realized
    staleness states, and empirical_error_cov averages the receiver error
    outer products over all steps and runs.
    """

    analytic_avg_mse_vs_k: np.ndarray = None
    final_analytic_mse: float = float("nan")
    run_final_analytic_mse: np.ndarray = None
    empirical_error_cov: np.ndarray = None


def _ci95(per_run: np.ndarray) -> float:
    if len(per_run) < 2:
        return 0.0
    return float(1.96 * per_run.std(ddof=1) / np.sqrt(len(per_run)))


def _thread_count(threads):
    if threads is None:
        env = os.environ.get("REMEST_THREADS")
        threads = int(env) if env else min(8, os.cpu_count() or 1)
    return max(1, threads)


def _kernel_tables(policy: PolicyGrid, m: HarqModel, sk: SteadyKalman):
    # detection failure indexed by the grid's own r range, saturating at the
    # channel model's r_cap
    g_eff = np.array([m.failure_prob_clamped(r) for r in range(policy.q_max + 1)])
    return policy.actions, g_eff, sk.cost_table


def simulate_chain(policy: PolicyGrid, m: HarqModel, sk: SteadyKalman, cfg: SimConfig,
                   backend=None, threads=None) -> SimReport:
    """Analytic-mode Monte Carlo of the (r, q) chain under a policy.

    Per step the accrued MSE is the cost-table entry for the current q and
    the accrued age is q+1; then the policy acts, detection is drawn with
    probability 1 - g(r), and the state advances. q saturates at the end
    of the cost table (with a warning) mirroring the truncated decision
    model. Identical seed and config give bit-identical reports
    regardless of backend or thread count.
    """
    if cfg.mode != "analytic":
        raise ValueError("simulate_chain requires mode='analytic'")
    if cfg.initial_q > sk.n_max:
        raise ValueError(f"initial_q={cfg.initial_q} outside cost table range 0..{sk.n_max}")
    actions, g_eff, cost_table = _kernel_tables(policy, m, sk)
    kernel = _kernels.chain_kernel(backend)

    horizon, runs = cfg.horizon, cfg.runs
    children = np.random.SeedSequence(cfg.seed).spawn(runs)
    run_mse = np.zeros(runs)
    run_aoi = np.zeros(runs)
    chunks = [(start, min(start + CHUNK_RUNS, runs)) for start in range(0, runs, CHUNK_RUNS)]

    def work(bounds):
        start, stop = bounds
        uniforms = np.empty((stop - start, horizon))
        for i in range(start, stop):
            uniforms[i - start] = np.random.Generator(np.random.Philox(children[i])).random(horizon)
        step_mse = np.zeros(horizon)
        step_aoi = np.zeros(horizon)
        sat = kernel(actions, g_eff, cost_table, uniforms, cfg.initial_q,
                     step_mse, step_aoi, run_mse[start:stop], run_aoi[start:stop])
        return step_mse, step_aoi, sat

    n_threads = min(_thread_count(threads), len(chunks))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    step_mse = np.zeros(horizon)
    step_aoi = np.zeros(horizon)
    saturation = 0
    for part_mse, part_aoi, sat in results:  # fixed reduction order
        step_mse += part_mse
        step_aoi += part_aoi
        saturation += sat
    if saturation:
        warnings.warn(
            f"staleness exceeded the cost table range in {saturation} steps; "
            "values were saturated at the table end",
            RuntimeWarning,
            stacklevel=2,
        )
    steps = np.arange(1, horizon + 1)
    avg_mse = np.cumsum(step_mse / runs) / steps
    avg_aoi = np.cumsum(step_aoi / runs) / steps
    return SimReport(
        label=policy.label, mode="analytic", horizon=horizon, runs=runs, seed=cfg.seed,
        avg_mse_vs_k=avg_mse, avg_aoi_vs_k=avg_aoi,
        final_avg_mse=float(avg_mse[-1]), final_avg_aoi=float(avg_aoi[-1]),
        run_final_mse=run_mse, run_final_aoi=run_aoi,
        mse_ci95=_ci95(run_mse), aoi_ci95=_ci95(run_aoi),
        saturation_events=int(saturation),
    )


def _psd_factor(m: np.ndarray) -> np.ndarray:
    """F with F @ F.T = m for symmetric PSD m (eigen-based, tolerant of
    zero eigenvalues)."""
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def simulate_trajectory(policy: PolicyGrid, sys: LtiSystem, m: HarqModel, sk: SteadyKalman,
                        cfg: SimConfig, state_cap: float = 1e14) -> TrajectoryReport:
    """Trajectory-mode Monte Carlo: draw the physical process and compare
    empirical receiver error against the analytic staleness cost.

    Per run: x0 ~ N(0, p_bar0) with the sensor estimate starting at zero
    (so the sensor error starts in steady state), process/measurement
    noise drawn each step, the sensor running the converged-gain filter,
    and the receiver predicting from the newest delivered estimate, which
    is q+1 steps old. Detection and state bookkeeping match the analytic
    chain exactly.

    With an expansive process the raw state grows geometrically, so long
    horizons overflow float64 (and lose precision well before); the run
    aborts with RuntimeError naming the step once any state magnitude
    exceeds state_cap. Keep horizon * log(rho(A)) comfortably under
    log(state_cap).
    """
    if cfg.mode != "trajectory":
        raise ValueError("simulate_trajectory requires mode='trajectory'")
    if cfg.initial_q != 0:
        raise ValueError("trajectory mode starts from a just-delivered estimate (initial_q=0)")
    horizon, runs = cfg.horizon, cfg.runs
    n, m_dim = sys.n, sys.m
    actions, g_eff, cost_table = _kernel_tables(policy, m, sk)
    table_end = len(cost_table) - 1
    q_max = policy.q_max

    children = np.random.SeedSequence(cfg.seed).spawn(runs)
    z0 = np.empty((runs, n))
    zw = np.empty((runs, horizon, n))
    zv = np.empty((runs, horizon, m_dim))
    uniforms = np.empty((runs, horizon))
    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.Philox(child))
        z0[i] = rng.standard_normal(n)
        zw[i] = rng.standard_normal((horizon, n))
        zv[i] = rng.standard_normal((horizon, m_dim))
        uniforms[i] = rng.random(horizon)

    l0 = _psd_factor(sk.p_bar0)
    lq = _psd_factor(sys.Q)
    lr = _psd_factor(sys.R)
    a_pows = np.empty((table_end + 2, n, n))
    a_pows[0] = np.eye(n)
    for p in range(1, table_end + 2):
        a_pows[p] = sys.A @ a_pows[p - 1]

    x = z0 @ l0.T               # true state; sensor estimate starts at 0
    depth = table_end + 2
    hist = np.zeros((runs, depth, n))  # ring buffer of sensor estimates
    xs = np.zeros((runs, n))
    hist[:, 0] = xs
    r = np.zeros(runs, dtype=np.int64)
    q = np.full(runs, cfg.initial_q, dtype=np.int64)

    step_emp = np.zeros(horizon)
    step_ana = np.zeros(horizon)
    step_aoi = np.zeros(horizon)
    run_emp = np.zeros(runs)
    run_ana = np.zeros(runs)
    run_aoi = np.zeros(runs)
    err_cov = np.zeros((n, n))
    saturation = 0
    run_idx = np.arange(runs)

    for k in range(1, horizon + 1):
        w = zw[:, k - 1] @ lq.T
        x = x @ sys.A.T + w
        if float(np.abs(x).max()) > state_cap:
            raise RuntimeError(
                f"state magnitude exceeded {state_cap:g} at step {k}; "
                "shorten the horizon or raise state_cap"
            )
        v = zv[:, k - 1] @ lr.T
        y = x @ sys.C.T + v
        pred = xs @ sys.A.T
        xs = pred + (y - pred @ sys.C.T) @ sk.gain.T

        # receiver predicts from the estimate generated q+1 steps ago
        exponent = q + 1
        src = hist[run_idx, (k - exponent) % depth]
        xhat = np.einsum("rij,rj->ri", a_pows[exponent], src)
        err = x - xhat
        sq = np.einsum("ri,ri->r", err, err)
        err_cov += err.T @ err
        ana = cost_table[q]
        aoi = q + 1

        step_emp[k - 1] = sq.sum()
        step_ana[k - 1] = ana.sum()
        step_aoi[k - 1] = aoi.sum()
        run_emp += sq
        run_ana += ana
        run_aoi += aoi

        hist[:, k % depth] = xs

        a = actions[np.minimum(r, q_max), np.minimum(q, q_max)]
        r = np.where(a == 0, 0, np.minimum(r + 1, q_max))
        failed = uniforms[:, k - 1] < g_eff[r]
        q_next = np.where(failed, q + 1, r)
        over = q_next > table_end
        saturation += int(over.sum())
        q = np.minimum(q_next, table_end)

    if saturation:
        warnings.warn(
            f"staleness exceeded the cost table range in {saturation} steps; "
            "values were saturated at the table end",
            RuntimeWarning,
            stacklevel=2,
        )
    steps = np.arange(1, horizon + 1)
    avg_emp = np.cumsum(step_emp / runs) / steps
    avg_ana = np.cumsum(step_ana / runs) / steps
    avg_aoi = np.cumsum(step_aoi / runs) / steps
    run_emp /= horizon
    run_ana /= horizon
    run_aoi /= horizon
    return TrajectoryReport(
        label=policy.label, mode="trajectory", horizon=horizon, runs=runs, seed=cfg.seed,
        avg_mse_vs_k=avg_emp, avg_aoi_vs_k=avg_aoi,
        final_avg_mse=float(avg_emp[-1]), final_avg_aoi=float(avg_aoi[-1]),
        run_final_mse=run_emp, run_final_aoi=run_aoi,
        mse_ci95=_ci95(run_emp), aoi_ci95=_ci95(run_aoi),
        saturation_events=int(saturation),
        analytic_avg_mse_vs_k=avg_ana,
        final_analytic_mse=float(avg_ana[-1]),
        run_final_analytic_mse=run_ana,
        empirical_error_cov=err_cov / (runs * horizon),
    )


def write_report_csv(report: SimReport, path):
    """Plot-ready per-step running averages, one row per time step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "avg_mse", "avg_aoi"])
        for k in range(report.horizon):
            writer.writerow([k + 1, f"{report.avg_mse_vs_k[k]:.6g}", f"{report.avg_aoi_vs_k[k]:.6g}"])


def report_summary(report: SimReport) -> dict:
    out = {
        "label": report.label,
        "mode": report.mode,
        "horizon": report.horizon,
        "runs": report.runs,
        "seed": report.seed,
        "final_avg_mse": report.final_avg_mse,
        "final_avg_aoi": report.final_avg_aoi,
        "mse_ci95_halfwidth": report.mse_ci95,
        "aoi_ci95_halfwidth": report.aoi_ci95,
        "saturation_events": report.saturation_events,
    }
    if isinstance(report, TrajectoryReport):
        out["final_analytic_mse"] = report.final_analytic_mse
    return out


def write_report_json(report: SimReport, path):
    with open(path, "w") as fh:
        json.dump(report_summary(report), fh, indent=2)
        fh.write("\n")
