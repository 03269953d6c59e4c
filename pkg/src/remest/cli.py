"""Command-line front end.

Subcommands: stability, solve, simulate, compare, verify-policy. All take
--config PATH or --default (the packaged example configuration). Exit
codes: 0 success, 1 usage/config error, 2 stability check failed,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import mdp, policies, simulate
from .config import ConfigError, ExperimentConfig, default_config, load_config
from .lti import RiccatiError, riccati_steady_state

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2
EXIT_SOLVER = 3

POLICY_SOURCES = ("optimal", "myopic", "delay", "arq", "psi")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _load(args) -> ExperimentConfig:
    if args.default and args.config:
        raise ConfigError("give either --config or --default, not both")
    if args.config:
        return load_config(args.config)
    if args.default:
        return default_config()
    raise ConfigError("a configuration is required: --config PATH or --default")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return cfg.replace(**overrides) if overrides else cfg


def _stability(cfg: ExperimentConfig):
    system = cfg.make_system()
    channel = cfg.make_channel()
    return system, channel, channel.stability_check(system.rho_sq)


def _solve_pipeline(cfg: ExperimentConfig, cost_kind: str, backend=None):
    system = cfg.make_system()
    channel = cfg.make_channel()
    sk = riccati_steady_state(system, tol=cfg.tol, max_iter=cfg.max_iter, q_max=cfg.q_max)
    model = mdp.build_mdp(sk if cost_kind == "mse" else None, channel, cfg.q_max, cost_kind)
    solution = mdp.solve(model, tol=cfg.tol, max_iter=cfg.max_iter, backend=backend)
    return system, channel, sk, model, solution


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_stability(args) -> int:
    cfg = _load(args)
    _, channel, report = _stability(cfg)
    print(f"rho^2(A)      = {_fmt(report.rho_sq)}")
    print(f"lambda'       = {_fmt(report.lambda_prime)}")
    print(f"(1-l')*rho^2  = {_fmt(report.margin)}")
    print(f"stability     : {'PASS' if report.stable else 'FAIL'}")
    return EXIT_OK if report.stable else EXIT_UNSTABLE


def _gate_stability(cfg: ExperimentConfig, force: bool) -> None:
    _, _, report = _stability(cfg)
    if not report.stable and not force:
        raise _StabilityGateError(
            f"stability check failed ((1-lambda')*rho^2 = {_fmt(report.margin)} >= 1); "
            "use --force to solve the truncated model anyway"
        )


class _StabilityGateError(RuntimeError):
    pass


def cmd_solve(args) -> int:
    cfg = _apply_overrides(_load(args), args)
    _gate_stability(cfg, args.force)
    *_, solution = _solve_pipeline(cfg, args.cost)
    out = _outdir(cfg)
    policy_path = out / f"policy_{args.cost}.csv"
    bias_path = out / f"bias_{args.cost}.csv"
    summary_path = out / f"solve_{args.cost}.json"
    if "csv" in cfg.formats:
        policies.save_policy_csv(solution.policy, policy_path)
        mdp.save_bias_csv(solution, bias_path)
    if "json" in cfg.formats:
        mdp.save_solution_json(solution, summary_path)
    print(f"gain = {_fmt(solution.gain)}  ({solution.iterations} sweeps, "
          f"span residual {solution.span_residual:.3e})")
    for path in (policy_path, bias_path, summary_path):
        if path.exists():
            print(f"wrote {path}")
    return EXIT_OK


def _resolve_policy(cfg: ExperimentConfig, source: str):
    """Build or load the requested policy grid."""
    if source in ("optimal", "delay"):
        cost_kind = "mse" if source == "optimal" else "delay"
        *_, solution = _solve_pipeline(cfg, cost_kind)
        return solution.policy.relabeled(source)
    if source == "myopic":
        system = cfg.make_system()
        channel = cfg.make_channel()
        sk = riccati_steady_state(system, tol=cfg.tol, max_iter=cfg.max_iter, q_max=cfg.q_max)
        return policies.myopic_policy(sk, channel, cfg.q_max)
    if source == "arq":
        return policies.arq_baseline_policy(cfg.q_max)
    if source == "psi":
        return policies.psi_policy(cfg.q_max)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(
            f"policy source {source!r} is neither one of {POLICY_SOURCES} nor an existing file"
        )
    try:
        return policies.load_policy_csv(path, label=path.stem)
    except ValueError as exc:
        raise ConfigError(f"cannot load policy file {path}: {exc}") from exc


def _simulate_policy(cfg: ExperimentConfig, grid: policies.PolicyGrid):
    system = cfg.make_system()
    channel = cfg.make_channel()
    sk = riccati_steady_state(system, tol=cfg.tol, max_iter=cfg.max_iter, q_max=cfg.q_max)
    sim_cfg = cfg.make_sim_config()
    if sim_cfg.mode == "trajectory":
        return simulate.simulate_trajectory(grid, system, channel, sk, sim_cfg)
    return simulate.simulate_chain(grid, channel, sk, sim_cfg)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load(args), args)
    grid = _resolve_policy(cfg, args.policy)
    report = _simulate_policy(cfg, grid)
    out = _outdir(cfg)
    label = grid.label or "policy"
    csv_path = out / f"report_{label}.csv"
    json_path = out / f"report_{label}.json"
    if "csv" in cfg.formats:
        simulate.write_report_csv(report, csv_path)
        print(f"wrote {csv_path}")
    if "json" in cfg.formats:
        simulate.write_report_json(report, json_path)
        print(f"wrote {json_path}")
    print(f"final average MSE = {_fmt(report.final_avg_mse)}  "
          f"final average AoI = {_fmt(report.final_avg_aoi)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _apply_overrides(_load(args), args)
    _gate_stability(cfg, args.force)
    system = cfg.make_system()
    channel = cfg.make_channel()
    sk = riccati_steady_state(system, tol=cfg.tol, max_iter=cfg.max_iter, q_max=cfg.q_max)
    mse_model = mdp.build_mdp(sk, channel, cfg.q_max, "mse")
    delay_model = mdp.build_mdp(None, channel, cfg.q_max, "delay")

    mse_solution = mdp.solve(mse_model, tol=cfg.tol, max_iter=cfg.max_iter)
    delay_solution = mdp.solve(delay_model, tol=cfg.tol, max_iter=cfg.max_iter)
    zoo = [
        mse_solution.policy.relabeled("optimal"),
        policies.myopic_policy(sk, channel, cfg.q_max),
        delay_solution.policy.relabeled("delay"),
        policies.arq_baseline_policy(cfg.q_max),
        policies.psi_policy(cfg.q_max),
    ]
    sim_cfg = cfg.make_sim_config()
    out = _outdir(cfg)

    rows = []
    reports = {}
    for grid in zoo:
        report = simulate.simulate_chain(grid, channel, sk, sim_cfg)
        reports[grid.label] = report
        if "csv" in cfg.formats:
            simulate.write_report_csv(report, out / f"report_{grid.label}.csv")
        rows.append({
            "policy": grid.label,
            "exact_avg_mse": mdp.evaluate_policy(mse_model, grid),
            "exact_avg_aoi": mdp.evaluate_policy(delay_model, grid),
            "sim_final_mse": report.final_avg_mse,
            "sim_final_aoi": report.final_avg_aoi,
            "switching": bool(policies.verify_switching(grid)),
        })
    baseline = reports["arq"].final_avg_mse
    floor = float(sk.cost_table[0])
    for row in rows:
        mse = row["sim_final_mse"]
        row["mse_reduction_vs_arq_raw"] = 1.0 - mse / baseline
        row["mse_reduction_vs_arq_excess"] = (
            1.0 - (mse - floor) / (baseline - floor) if baseline > floor else 0.0
        )
    table = {
        "gain_mse_optimal": mse_solution.gain,
        "gain_delay_optimal": delay_solution.gain,
        "baseline_floor": floor,
        "policies": rows,
    }
    if "json" in cfg.formats:
        with open(out / "compare.json", "w") as fh:
            json.dump(table, fh, indent=2)
            fh.write("\n")
        print(f"wrote {out / 'compare.json'}")
    if "csv" in cfg.formats:
        import csv as _csv

        with open(out / "compare.csv", "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
        print(f"wrote {out / 'compare.csv'}")

    header = f"{'policy':>8} {'exact MSE':>12} {'sim MSE':>12} {'sim AoI':>10} {'switching':>9}"
    print(header)
    for row in rows:
        print(f"{row['policy']:>8} {_fmt(row['exact_avg_mse']):>12} "
              f"{_fmt(row['sim_final_mse']):>12} {_fmt(row['sim_final_aoi']):>10} "
              f"{str(row['switching']):>9}")
    return EXIT_OK


def cmd_verify_policy(args) -> int:
    grid = policies.load_policy_csv(args.policy, label=Path(args.policy).stem)
    report = policies.verify_switching(grid)
    print(f"states: {len(grid.states())} (q_max={grid.q_max})")
    print(f"switching-type: {report.ok}")
    for (s1, s2, cond) in report.violations[:20]:
        print(f"  violation [{cond}]: action({s1})={grid.action(*s1)} "
              f"but action({s2})={grid.action(*s2)}")
    if len(report.violations) > 20:
        print(f"  ... {len(report.violations) - 20} more")
    return EXIT_OK


def _add_config_args(parser):
    parser.add_argument("--config", help="path to a JSON experiment configuration")
    parser.add_argument("--default", action="store_true",
                        help="use the packaged example configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remest",
        description="Solve and evaluate transmit-or-retransmit policies for "
                    "HARQ-based remote state estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability", help="check the boundedness condition")
    _add_config_args(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("solve", help="solve the decision model and export the policy")
    _add_config_args(p)
    p.add_argument("--cost", choices=("mse", "delay"), default="mse")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--force", action="store_true", help="skip the stability gate")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte-Carlo evaluation of one policy")
    _add_config_args(p)
    p.add_argument("--policy", required=True,
                   help=f"one of {', '.join(POLICY_SOURCES)}, or a policy CSV path")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed override")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="solve and simulate the whole policy zoo")
    _add_config_args(p)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--force", action="store_true", help="skip the stability gate")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify-policy", help="check a policy CSV for switching structure")
    p.add_argument("--policy", required=True, help="policy CSV path")
    p.set_defaults(func=cmd_verify_policy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _StabilityGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (mdp.RviConvergenceError, RiccatiError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
