"""Command line interface: ``lfd {equilibrium,simulate,verify,convergence}``.

Flags override ``LFD_*`` environment variables, which override the config
file. Exit status is 0 on success, 1 when a run fails (stepper error or a
failing oracle) and 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import __version__
from .checkpoint import write_checkpoint
from .config import SimulationConfig, parse_config, validate
from .convergence import refinement_study
from .convolution import set_threads
from .diagnostics import DiagnosticsRecord
from .equilibrium import solve_fermi_dirac
from .errors import LFDError, ParseError, ValidationError
from .oracles import run_suite
from .simulation import diagnostics_config, run

__all__ = ["main", "build_parser", "load_config", "run_equilibrium", "run_simulate", "run_verify", "run_convergence"]

log = logging.getLogger("lfd")

ENV_PREFIX = "LFD_"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfd", description="Regularized Landau-Fermi-Dirac solver and diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (env LFD_CONFIG)")
    common.add_argument("--seed", type=int, help="random seed (env LFD_SEED)")
    common.add_argument("--out", help="output directory (env LFD_OUT)")
    common.add_argument("--threads", type=int, help="FFT worker threads, 0 = auto (env LFD_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common], help="solve for the Fermi-Dirac parameters")
    sub.add_parser("simulate", parents=[common], help="integrate in time and write diagnostics")
    verify = sub.add_parser("verify", parents=[common], help="run the seeded inequality oracles")
    verify.add_argument("--trials", type=int, help="trials per oracle (overrides config)")
    sub.add_parser("convergence", parents=[common], help="grid refinement study")
    return parser


def _setting(args, name: str, cast=str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is None or env == "":
        return None
    try:
        return cast(env)
    except ValueError as exc:
        raise ValidationError(name, f"environment variable {ENV_PREFIX + name.upper()}={env!r} is invalid") from exc


def load_config(args) -> SimulationConfig:
    """Parse the config file and apply environment and flag overrides."""
    path = _setting(args, "config")
    if path is None:
        raise ValidationError("config", "no configuration given (--config or LFD_CONFIG)")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    cfg = parse_config(text)
    overrides = {}
    for name, field_name, cast in (("seed", "seed", int), ("out", "output", str), ("threads", "threads", int)):
        value = _setting(args, name, cast)
        if value is not None:
            overrides[field_name] = value
    trials = getattr(args, "trials", None)
    if trials is not None:
        overrides["trials"] = trials
    if overrides:
        cfg = cfg.with_overrides(**overrides)
        validate(cfg)
    return cfg


def run_equilibrium(cfg: SimulationConfig) -> int:
    ini = cfg.initial
    eq = solve_fermi_dirac(ini.rho, ini.u, ini.theta, cfg.epsilon)
    rec = eq.to_record()
    rec["peak"] = eq.peak
    rec["kappa0"] = 1.0 - cfg.epsilon * eq.peak
    lines = [f"{k} = {_text(v)}" for k, v in rec.items()]
    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, "equilibrium.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _text(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (tuple, list)):
        return ", ".join(_text(x) for x in v)
    return str(v)


def run_simulate(cfg: SimulationConfig) -> int:
    out = cfg.output
    snap_dir = os.path.join(out, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    dcfg = diagnostics_config(cfg)
    csv_path = os.path.join(out, "diagnostics.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DiagnosticsRecord.header(dcfg))

        def on_record(rec):
            writer.writerow(rec.row(dcfg))
            fh.flush()
            log.info("t = %.6g  S = %.12g  H_rel = %.6g  kappa0 = %.6g", rec.t, rec.S_eps, rec.H_rel, rec.kappa0)

        counter = {"k": 0}

        def on_snapshot(t, f):
            write_checkpoint(f, os.path.join(snap_dir, f"{counter['k']:05d}.lfd"), gamma=cfg.gamma, t=t)
            counter["k"] += 1

        traj = run(cfg, on_record, on_snapshot)
    with open(os.path.join(out, "steps.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "t", "dt", "mass", "S_eps", "kappa0", "clipped_mass"])
        for s in traj.steps:
            writer.writerow([s.step] + [format(x, ".17g") for x in (s.t, s.dt, s.mass, s.S_eps, s.kappa0, s.clipped_mass)])
    if traj.error is not None:
        print(f"simulation stopped: {traj.error}", file=sys.stderr)
        return 1
    return 0


def run_verify(cfg: SimulationConfig) -> int:
    os.makedirs(cfg.output, exist_ok=True)
    summary = run_suite(cfg.seed, cfg.trials, grid=cfg.grid,
                        report_path=os.path.join(cfg.output, "oracles.jsonl"),
                        reproducer_dir=os.path.join(cfg.output, "reproducers"))
    failed = 0
    for name, c in summary.items():
        print(f"{name}: {c['passed']} passed, {c['failed']} failed, {c['vacuous']} vacuous")
        failed += c["failed"]
    return 1 if failed else 0


def run_convergence(cfg: SimulationConfig) -> int:
    os.makedirs(cfg.output, exist_ok=True)
    rows = refinement_study(cfg.convergence_n, cfg.gamma, cfg.epsilon, cfg.R, cfg.convergence_nu, cfg.seed,
                            productions=max(cfg.convergence_n) <= cfg.max_pair_n)
    with open(os.path.join(cfg.output, "orders.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["functional", "N", "h", "value", "order"])
        for r in rows:
            writer.writerow([r.functional, r.N, format(r.h, ".17g"), format(r.value, ".17g"), format(r.order, ".17g")])
    for r in rows:
        print(f"{r.functional:24s} N={r.N:3d}  value={r.value:.6e}  order={r.order:.3f}")
    return 0


COMMANDS = {
    "equilibrium": run_equilibrium,
    "simulate": run_simulate,
    "verify": run_verify,
    "convergence": run_convergence,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    set_threads(cfg.threads)
    try:
        return COMMANDS[args.command](cfg)
    except LFDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
