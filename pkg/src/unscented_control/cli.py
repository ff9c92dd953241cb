"""Command-line entry point: ``utc simulate | certify | sweep``.

Exit codes: 0 success, 1 runtime failure, 2 invalid config or arguments,
3 no stability certificate (closed loop not Schur stable).
"""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config, sim, stability
from .errors import ConfigError, UtcError
from .plant import LtiPlant

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_NO_CERT = 0, 1, 2, 3

log = logging.getLogger("unscented_control")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="scenario YAML file")
    p.add_argument("--seed", type=int, help="override scenario.seed")
    p.add_argument("--steps", type=int, help="override scenario.horizon")
    p.add_argument("--n-steps", type=int, help="override controller.N")
    p.add_argument("--output", type=Path, help="override output.dir")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="utc", description="Unscented Transform Controller simulations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    _add_common(p)

    p = sub.add_parser("certify", help="stability certificate for an LTI plant")
    _add_common(p)
    p.add_argument(
        "--gain-source",
        choices=("config", "simulate"),
        help="take K from certify.gain, or from the final step of a simulation "
        "(default: config if certify.gain is set)",
    )

    p = sub.add_parser("sweep", help="run the scenario once per prediction horizon N")
    _add_common(p)
    p.add_argument("--n-list", required=True, help="comma-separated N values, e.g. 1,3,5")
    return parser


def _setup_logging(out_dir: Path | None, verbose: bool) -> None:
    log.handlers.clear()
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(stream)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out_dir / "run.log", mode="w")
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(fh)


def _load(args) -> tuple[config.Config, str]:
    cfg, digest = config.load_config(args.config)
    cfg = config.with_overrides(cfg, seed=args.seed, steps=args.steps, n_steps=args.n_steps, output=args.output)
    return cfg, digest


def _log_run(cfg: config.Config, digest: str, command: str) -> None:
    log.info("command=%s config_sha256=%s seed=%d", command, digest, cfg.scenario.seed)
    log.info(
        "versions: unscented_control=%s numpy=%s python=%s", __version__, np.__version__, platform.python_version()
    )
    log.info("effective config:\n%s", cfg.to_yaml().rstrip())


def _summary(traj: sim.Trajectory, cfg: config.Config) -> tuple[int, float]:
    sc = cfg.scenario
    return sim.settling_time(traj, sc.settle_band), sim.error_limsup(traj, sc.tail_fraction)


def cmd_simulate(args) -> int:
    cfg, digest = _load(args)
    out = Path(cfg.output.dir)
    _setup_logging(out, args.verbose)
    _log_run(cfg, digest, "simulate")
    traj = sim.run(config.build_scenario(cfg))
    path = out / cfg.output.csv
    sim.export_csv(traj, path)
    settle, limsup = _summary(traj, cfg)
    print(f"csv = {path}")
    print(f"steps = {cfg.scenario.horizon}")
    print(f"settling_time = {settle}")
    print(f"error_limsup = {limsup:.12g}")
    print(f"clamp_max = {traj.clamp.max():.3g}")
    return EXIT_OK


def cmd_certify(args) -> int:
    cfg, digest = _load(args)
    _setup_logging(Path(cfg.output.dir), args.verbose)
    _log_run(cfg, digest, "certify")
    scn = config.build_scenario(cfg)
    if not isinstance(scn.plant, LtiPlant):
        raise ConfigError(f"certify needs an LTI plant; {cfg.plant.model} is outside the bounded-nonlinearity class")
    source = args.gain_source or ("config" if cfg.certify.gain is not None else "simulate")
    if source == "config":
        if cfg.certify.gain is None:
            raise ConfigError("certify.gain is not set in the config")
        K = np.asarray(cfg.certify.gain, dtype=float)
    else:
        traj = sim.run(scn)
        K = traj.final_K
        log.info("using final-step gain from a %d-step simulation", cfg.scenario.horizon)
    try:
        cl = stability.build_closed_loop(scn.plant, K, cfg.controller.N)
    except ValueError as exc:
        raise ConfigError(f"certify.gain: {exc}") from exc
    cert = stability.certify(cl, cfg.certify.f_bar)
    print(f"gain_source = {source}")
    print(f"N = {cfg.controller.N}")
    print(cert.report(), end="")
    if not cert.schur:
        print("status = no certificate (closed loop not Schur stable)")
        return EXIT_NO_CERT
    print("status = certified")
    return EXIT_OK


def _parse_n_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"--n-list: {exc}") from exc
    if not values:
        raise ConfigError("--n-list is empty")
    if any(v < 1 for v in values):
        raise ConfigError("--n-list values must be >= 1")
    if len(set(values)) != len(values):
        raise ConfigError(f"--n-list has duplicate values: {text}")
    return values


def cmd_sweep(args) -> int:
    n_list = _parse_n_list(args.n_list)
    cfg, digest = _load(args)
    out = Path(cfg.output.dir)
    _setup_logging(out, args.verbose)
    _log_run(cfg, digest, "sweep")
    rows = []
    for N in n_list:
        cfg_n = config.with_overrides(cfg, n_steps=N)
        t0 = time.perf_counter()
        traj = sim.run(config.build_scenario(cfg_n))
        wall = time.perf_counter() - t0
        stem = Path(cfg.output.csv).stem
        path = out / f"{stem}_N{N}.csv"
        sim.export_csv(traj, path)
        settle, limsup = _summary(traj, cfg_n)
        rows.append((N, settle, limsup, wall))
        log.info("N=%d done in %.2fs -> %s", N, wall, path)
    with open(out / "sweep_summary.csv", "w") as fh:
        fh.write("N,settling_time,error_limsup,wall_time_s\n")
        for N, settle, limsup, wall in rows:
            fh.write(f"{N},{settle},{limsup:.12g},{wall:.4f}\n")
    print(f"{'N':>4} {'settling_time':>14} {'error_limsup':>14} {'wall_time_s':>12}")
    for N, settle, limsup, wall in rows:
        print(f"{N:>4} {settle:>14} {limsup:>14.6g} {wall:>12.3f}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "certify": cmd_certify, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UtcError, OSError, ValueError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
