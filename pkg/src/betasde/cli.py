"""Command line entry point.

    betasde sample-beta --config c2.json --replicas 20000 --out run1
    betasde simulate-rho --u-max 4 --replicas 10
    betasde verify all --out suite
    betasde verify hitting_law conditional_law --replicas 2000

Without ``--config`` the two-vertex reference configuration is used.  Exit
code is 0 iff every gated report passes.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, reference_c2
from .errors import BetaSdeError, ConfigError
from .lamperti import simulate_rho_sde
from .matyor import simulate_z_sde
from .paths import SdeOptions, simulate_x
from .potential import hitting_samples, nu_laplace, oracle_samples
from .report import VerificationReport, write_reports
from .rng import Streams
from .stats import empirical_laplace, mean_z
from .suite import SUITES, run_suite

log = logging.getLogger("betasde")

MAX_RECORDED_POINTS = 1200


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else reference_c2()
    return cfg.replace(seed=args.seed, replicas=args.replicas, dt=args.dt, du=args.du,
                       u_max=args.u_max, out=args.out, alpha=args.alpha)


def _finish(cfg: ExperimentConfig, reports, command: str) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reports(out / "report.json", reports, {"command": command, "config": cfg.to_dict()})
    for r in reports:
        print(r.summary())
    return 0 if all(r.passed for r in reports) else 1


def _u_points(u_max: float, du: float) -> np.ndarray:
    steps = int(round(u_max / du))
    stride = max(1, -(-steps // MAX_RECORDED_POINTS))
    return np.arange(0, steps + 1, stride) * du


def cmd_sample_beta(args) -> int:
    cfg = _config(args)
    p = cfg.params()
    streams = Streams(cfg.seed, "sample-beta")
    if args.sampler == "oracle":
        beta = oracle_samples(p, streams, cfg.replicas)
    else:
        beta = 0.5 / hitting_samples(p, streams, cfg.replicas, SdeOptions(dt=cfg.dt))
    labels = p.labels
    io.write_columns(Path(cfg.out) / "samples_beta.csv",
                     {"replica": np.arange(cfg.replicas), **io.sample_matrix_columns("beta", beta, labels)})
    rep = VerificationReport("sample_beta_laplace", replicas=cfg.replicas, seed=cfg.seed)
    lam = cfg.lambdas()
    est, se = empirical_laplace(beta, lam)
    exact = np.array([nu_laplace(p, l_) for l_ in lam])
    rep.statistics.update(estimate=est, exact=exact, sampler=args.sampler)
    rep.standard_errors["estimate"] = se
    for k, z in enumerate(mean_z(est, se, exact)):
        rep.gate(f"lambda_{k}_z", float(z), 3.0, "<=")
    return _finish(cfg, [rep], "sample-beta")


def cmd_simulate_x(args) -> int:
    cfg = _config(args)
    p = cfg.params()
    streams = Streams(cfg.seed, "simulate-x")
    rows = []
    taus = []
    for r in range(cfg.replicas):
        b = simulate_x(p, streams, cfg.dt, replica=r)
        taus.append(b.tau)
        for k in range(b.grid.shape[0]):
            rows.append([r, float(b.grid[k])] + b.paths[k].tolist())
    labels = p.labels
    io.write_csv(Path(cfg.out) / "samples_x.csv", ["replica", "t"] + [f"x_{v}" for v in labels], rows)
    io.write_columns(Path(cfg.out) / "samples_tau.csv",
                     {"replica": np.arange(cfg.replicas), **io.sample_matrix_columns("tau", np.array(taus), labels)})
    return _finish(cfg, [], "simulate-x")


def cmd_simulate_rho(args) -> int:
    cfg = _config(args)
    p = cfg.params()
    streams = Streams(cfg.seed, "simulate-rho")
    u = _u_points(cfg.u_max, cfg.du)
    rows = []
    for r in range(cfg.replicas):
        b = simulate_rho_sde(p, streams, cfg.du, cfg.u_max, u_points=u, replica=r)
        for i, v in enumerate(p.labels):
            for k in range(u.shape[0]):
                rows.append([r, v, float(u[k]), float(b.rho[k, i]), float(b.T[k, i])])
    io.write_csv(Path(cfg.out) / "samples_rho.csv", ["replica", "vertex", "u", "rho", "T"], rows)
    return _finish(cfg, [], "simulate-rho")


def cmd_simulate_z(args) -> int:
    cfg = _config(args)
    p = cfg.params()
    streams = Streams(cfg.seed, "simulate-z")
    u = _u_points(cfg.u_max, cfg.du)
    rows = []
    for r in range(cfg.replicas):
        b = simulate_z_sde(p.theta, streams, cfg.du, cfg.u_max, u_points=u, replica=r)
        for i, v in enumerate(p.labels):
            for k in range(u.shape[0]):
                rows.append([r, v, float(u[k]), float(b.z[k, i])])
    io.write_csv(Path(cfg.out) / "samples_z.csv", ["replica", "vertex", "u", "z"], rows)
    return _finish(cfg, [], "simulate-z")


def cmd_verify(args) -> int:
    cfg = _config(args)
    names = args.suite or ["all"]

    def progress(k, rep):
        print(rep.summary() + (f"  ({rep.error})" if rep.error else ""), flush=True)
        log.info("criterion %d finished in %.1f s", k, rep.wall_clock)

    reports = run_suite(cfg, only=names, out=cfg.out, progress=progress)
    passed = sum(r.passed for r in reports)
    print(f"{passed}/{len(reports)} reports passed; written to {Path(cfg.out) / 'report.json'}")
    return 0 if passed == len(reports) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--dt", type=float, default=None, help="time step of the absorbed system")
    common.add_argument("--du", type=float, default=None, help="step in the log scale")
    common.add_argument("--u-max", dest="u_max", type=float, default=None)
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--alpha", type=float, default=None, help="per-test level")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="betasde", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("sample-beta", parents=[common], help="draw potentials")
    sp.add_argument("--sampler", choices=["hitting", "oracle"], default="hitting",
                    help="oracle is the grid inverse-CDF sampler (n <= 2)")
    sp.set_defaults(func=cmd_sample_beta)
    sub.add_parser("simulate-x", parents=[common],
                   help="paths of the absorbed system").set_defaults(func=cmd_simulate_x)
    sub.add_parser("simulate-rho", parents=[common],
                   help="paths of the log-scale system").set_defaults(func=cmd_simulate_rho)
    sub.add_parser("simulate-z", parents=[common],
                   help="paths of the Z process").set_defaults(func=cmd_simulate_z)
    vp = sub.add_parser("verify", parents=[common], help="run acceptance criteria")
    vp.add_argument("suite", nargs="*", metavar="name",
                    help=f"'all' (default), criterion numbers, or names: {', '.join(SUITES)}")
    vp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BetaSdeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
