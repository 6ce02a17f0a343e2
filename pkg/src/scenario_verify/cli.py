"""Command-line entry point: ``scenario-verify <subcommand> ...``.

Exit codes: 0 success, 1 a verification property failed (hold-out fraction
above epsilon), 2 usage, config, or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as sio
from .config import ExperimentConfig
from .distributions import (
    ChiSquared,
    DistributionError,
    Gaussian,
    Uniform,
    parse_distribution,
    sample,
    var_gap_trial,
)
from .metrics import rho
from .risk_core import ScenarioError, required_samples, scenario_var_upper_bound
from .robot_sim import AdmissibleSetTooThin, SimulationFault, sample_initial_conditions, simulate_trajectory
from .seeding import RngSeed, derive_master
from .verification import (
    RobotTeamSystem,
    VerificationReport,
    holdout_violation_fraction,
    verify,
)

log = logging.getLogger("scenario_verify")

TABLE1_EPSILONS = (0.01, 0.007, 0.003, 0.001)
TABLE1_DISTS = (("uniform", Uniform(-1.0, 1.0)), ("gaussian", Gaussian(0.0, 1.0)), ("chi2", ChiSquared(2)))


class UsageError(Exception):
    pass


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        try:
            return ExperimentConfig.from_ini(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    return ExperimentConfig()


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    cfg = cfg.updated("risk", epsilon=get("epsilon"), gamma=get("gamma"))
    cfg = cfg.updated("domain", robots=get("robots"))
    cfg = cfg.updated("sim", noise_sigma=get("noise_sigma"))
    cfg = cfg.updated(
        "metric",
        literal_eq27=True if get("literal_eq27") else None,
        goal_aggregation=get("goal_aggregation"),
    )
    return cfg.updated(
        "run",
        seed=get("seed"),
        n_samples=get("n_samples"),
        holdout=get("holdout"),
        trials=get("trials"),
        n_scenario=get("n_scenario"),
        n_oracle=get("n_oracle"),
        workers=get("workers"),
        chunk_size=get("chunk_size"),
    )


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------------


def cmd_plan(args, cfg: ExperimentConfig) -> int:
    print(required_samples(cfg.risk_spec()))
    return 0


def cmd_var_bound(args, cfg: ExperimentConfig) -> int:
    eps = cfg.risk.epsilon
    if args.csv:
        samples = sio.read_samples_csv(args.csv)
    elif args.dist:
        n = args.n or cfg.run.n_scenario
        samples = sample(parse_distribution(args.dist), n, RngSeed(cfg.run.seed, 0))
        if args.samples_out:
            sio.write_samples_csv(args.samples_out, samples)
    else:
        raise UsageError("var-bound needs --csv or --dist")
    bound = scenario_var_upper_bound(samples, eps)
    _emit(sio.dump_json(bound.to_dict()), args.out)
    return 0


def table1_rows(cfg: ExperimentConfig, dists, epsilons):
    """Yield ``(label, eps, GapResult)`` for every cell; each cell has its own master seed."""
    for di, (label, dist) in enumerate(dists):
        for ei, eps in enumerate(epsilons):
            seed = RngSeed(derive_master(cfg.run.seed, di, ei), 0)
            res = var_gap_trial(dist, eps, cfg.run.n_scenario, cfg.run.n_oracle, cfg.run.trials, seed)
            yield label, eps, res


def cmd_table1(args, cfg: ExperimentConfig) -> int:
    specs = args.dist or cfg.table1.distributions.split()
    if specs:
        dists = [(spec.replace(",", ";"), parse_distribution(spec)) for spec in specs]
    else:
        dists = list(TABLE1_DISTS)
    if args.epsilons:
        epsilons = tuple(args.epsilons)
    elif cfg.table1.epsilons.strip():
        epsilons = tuple(float(e) for e in cfg.table1.epsilons.split())
    else:
        epsilons = TABLE1_EPSILONS
    cells = {}
    long_rows = []
    for label, eps, res in table1_rows(cfg, dists, epsilons):
        cells[(label, eps)] = res.min_gap
        for i, (b, g) in enumerate(zip(res.bounds, res.gaps)):
            long_rows.append(f"{label},{sio.fmt(eps)},{i},{sio.fmt(b)},{sio.fmt(res.oracle_var)},{sio.fmt(g)}")
    lines = ["epsilon," + ",".join(label for label, _ in dists)]
    for eps in epsilons:
        lines.append(",".join([sio.fmt(eps)] + [sio.fmt(cells[(label, eps)]) for label, _ in dists]))
    _emit("\n".join(lines) + "\n", args.out)
    if args.trials_out:
        Path(args.trials_out).write_text(
            "dist,epsilon,trial,bound,oracle_var,gap\n" + "\n".join(long_rows) + "\n"
        )
    return 0


def _system(cfg: ExperimentConfig) -> RobotTeamSystem:
    return RobotTeamSystem(cfg.domain_spec(), cfg.sim_config(), cfg.metric_params())


def _exit_for(report: VerificationReport) -> int:
    return 1 if report.holdout_passed is False else 0


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    run = cfg.run
    report = verify(
        _system(cfg),
        cfg.risk_spec(),
        seed=run.seed,
        n_samples=run.n_samples or None,
        holdout_m=run.holdout,
        chunk_size=run.chunk_size,
        workers=run.workers,
    )
    _emit(sio.dump_json(report.to_dict(timing=args.record_timing)), args.out)
    if args.samples_csv:
        sio.write_robustness_csv(args.samples_csv, report.samples)
    log.info(
        "bound=%.6g l=%s qp_fallback_trajectories=%d max_qp_residual=%.3g",
        report.bound,
        report.holdout_violation_fraction,
        report.qp_fallback_trajectories,
        report.max_qp_residual,
    )
    return _exit_for(report)


def cmd_holdout(args, cfg: ExperimentConfig) -> int:
    try:
        report = VerificationReport.from_dict(json.loads(Path(args.report).read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read report {args.report}: {exc}") from exc
    m = args.m if args.m is not None else cfg.run.holdout
    if m < 1:
        raise UsageError("holdout needs m >= 1")
    seed = args.seed if args.seed is not None else report.seed
    l = holdout_violation_fraction(
        _system(cfg), report.bound, m, seed, chunk_size=cfg.run.chunk_size, workers=cfg.run.workers
    )
    report.holdout_size = m
    report.holdout_violation_fraction = l
    report.elapsed = None
    _emit(sio.dump_json(report.to_dict()), args.out)
    return _exit_for(report)


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    seed = RngSeed(cfg.run.seed, 0)
    sim = cfg.sim_config()
    world, goals = sample_initial_conditions(cfg.domain_spec(), seed)
    traj = simulate_trajectory(world, goals, sim, seed)
    r = rho(traj, cfg.metric_params())
    extra = {"x0": world.poses.tolist(), "rho": r, "metric": vars(cfg.metric)}
    if args.out:
        sio.write_trajectory(args.out, traj, sim, seed, extra=extra)
    print(sio.fmt(r))
    return 0


# --- parser ------------------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; flags override its values")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--log-level", default="WARNING")

    risk = argparse.ArgumentParser(add_help=False)
    risk.add_argument("--epsilon", type=float)
    risk.add_argument("--gamma", type=float)

    system = argparse.ArgumentParser(add_help=False)
    system.add_argument("--robots", type=int)
    system.add_argument("--noise-sigma", type=float)
    system.add_argument("--literal-eq27", action="store_true", help="in rho, take min over time of h_f and max over time of h_g")
    system.add_argument("--goal-aggregation", choices=("all", "any"))
    system.add_argument("--workers", type=int)
    system.add_argument("--chunk-size", type=int)

    parser = argparse.ArgumentParser(prog="scenario-verify", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common, risk], help="required sample count")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("var-bound", parents=[common, risk], help="scenario VaR upper bound")
    p.add_argument("--csv", help="single-column CSV with header 'value'")
    p.add_argument("--dist", help="e.g. uniform:-1,1, gaussian:0,1, chi2:2, point:0, bimodal")
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.add_argument("--samples-out")
    p.set_defaults(func=cmd_var_bound)

    p = sub.add_parser("table1", parents=[common], help="min scenario-bound gap per distribution and epsilon")
    p.add_argument("--trials", type=int)
    p.add_argument("--n-scenario", type=int)
    p.add_argument("--n-oracle", type=int)
    p.add_argument("--dist", action="append", help="replace the default distributions (repeatable)")
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--out")
    p.add_argument("--trials-out", help="long-form per-trial CSV")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("verify", parents=[common, risk, system], help="sample, bound, and validate")
    p.add_argument("--n-samples", type=int, help="defaults to the planned count")
    p.add_argument("--holdout", type=int)
    p.add_argument("--out")
    p.add_argument("--samples-csv")
    p.add_argument("--record-timing", action="store_true", help="write elapsed seconds (breaks byte-identity)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("holdout", parents=[common, system], help="re-check a report on fresh samples")
    p.add_argument("--report", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_holdout)

    p = sub.add_parser("simulate", parents=[common, system], help="dump one seeded trajectory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_flags(_load_config(args), args)
        return args.func(args, cfg)
    except (UsageError, ScenarioError, DistributionError, sio.FormatError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationFault, AdmissibleSetTooThin) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
