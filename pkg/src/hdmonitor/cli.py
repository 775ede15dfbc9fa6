"""Command-line front end: ``hdmonitor <command> --config FILE``.

Commands: gen-pool, calibrate, arl0, arl1, monitor. Exit status is 0 on
success, 2 on usage or configuration errors and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .arl import MonitorScheme, arl1_table, calibrate_many, initial_state
from .config import ConfigError, MonitorConfig, parse_config, scheme_labels
from .local import AdaptiveFamily, AdaptiveParams, CusumFamily, CusumParams
from .nonparametric import NonparametricFamily, NpParams
from .pool import PoolConfig, PoolFileError, generate_pool, load_pool, save_pool
from .report import emit_report
from .streams import ScenarioConfig, build_scenario

log = logging.getLogger("hdmonitor")

FULL_SCALE = {"pool_size": 100_000, "target_arl0": 1000.0, "replications": 2500, "num_traces": 2500}


class InputError(RuntimeError):
    pass


def build_family(cfg: MonitorConfig):
    st = cfg.statistic
    if st.family == "cusum":
        return CusumFamily(CusumParams(st.mu))
    if st.family == "adaptive":
        return AdaptiveFamily(AdaptiveParams(st.rho, st.s0, st.t0))
    return NonparametricFamily(NpParams(st.d, st.n))


def obtain_pool(cfg: MonitorConfig, workers: int = 1):
    """Load ``pool.path`` if it exists, otherwise generate (and save there)."""
    family = build_family(cfg)
    path = cfg.pool.path
    if path and Path(path).exists():
        pool = load_pool(path, expected_kind=family.kind)
        if pool.family != family:
            raise PoolFileError(f"{path}: pool parameters {pool.family.describe()} differ from {family.describe()}")
        saved = (pool.size, pool.config.burn_in, pool.config.seed)
        if saved != (cfg.pool.size, cfg.pool.burn_in, cfg.pool.seed):
            raise PoolFileError(f"{path}: holds K={saved[0]}, burn_in={saved[1]}, seed={saved[2]} but the "
                                "configuration asks for different values; remove it or change pool.path")
        return pool
    log.info("generating pool: %s, K=%d, burn-in=%d", family.describe(), cfg.pool.size, cfg.pool.burn_in)
    pool = generate_pool(PoolConfig(family, cfg.pool.size, cfg.pool.burn_in, cfg.pool.seed), workers)
    if path:
        save_pool(pool, path)
    return pool


def build_schemes(cfg: MonitorConfig, pool) -> list[MonitorScheme]:
    family = pool.family
    schemes = [MonitorScheme.build(family, k, pool, cfg.experiment.m, b) for k, b in scheme_labels(cfg)]
    for s, h in zip(schemes, cfg.global_.h):
        s.h = h
        s.target_arl0 = cfg.experiment.target_arl0
    return schemes


def scenarios(cfg: MonitorConfig, m1_values=None) -> list[ScenarioConfig]:
    ex = cfg.experiment
    return [
        ScenarioConfig(ex.m, m1, ex.change_point, ex.scenario, ex.delta, ex.gamma, ex.ic, ex.seed)
        for m1 in (ex.m1 if m1_values is None else m1_values)
    ]


def _ic_streams(cfg):
    return build_scenario(scenarios(cfg, [0])[0])


def _calibrate(cfg, schemes, workers):
    todo = [s for s in schemes if s.h is None]
    if todo:
        ex = cfg.experiment
        calibrate_many(todo, ex.target_arl0, ex.num_traces, cfg.horizon, ex.rel_tol, ex.seed, workers,
                       streams=_ic_streams(cfg))


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_gen_pool(cfg, args):
    out = args.out or cfg.pool.path
    if not out:
        raise ConfigError(["pool.path: an output path is needed (set pool.path or pass --out)"])
    family = build_family(cfg)
    pool = generate_pool(PoolConfig(family, cfg.pool.size, cfg.pool.burn_in, cfg.pool.seed), args.threads)
    save_pool(pool, out)
    v = pool.sorted_values
    print(f"wrote {out}: {family.describe()} K={pool.size} burn_in={cfg.pool.burn_in} "
          f"mean={v.mean():.6g} P(0)={np.mean(v == 0):.4f}")


def cmd_calibrate(cfg, args):
    pool = obtain_pool(cfg, args.threads)
    schemes = build_schemes(cfg, pool)
    for s in schemes:
        s.h = None
    _calibrate(cfg, schemes, args.threads)
    lines = ["scheme_id,global_kind,m,target_arl0,h"]
    for s in schemes:
        print(f"{s.scheme_id} h={s.h:.6f}")
        lines.append(f"{s.scheme_id},{s.global_kind.kind},{s.m},{cfg.experiment.target_arl0!r},{s.h!r}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")


def _table(cfg, args, m1_values):
    pool = obtain_pool(cfg, args.threads)
    schemes = build_schemes(cfg, pool)
    _calibrate(cfg, schemes, args.threads)
    rows = arl1_table(schemes, scenarios(cfg, m1_values), cfg.experiment.replications, cfg.experiment.seed,
                      cfg.horizon, args.threads, timing=not args.no_timing)
    _write(emit_report(rows, cfg.io.format), args.out or cfg.io.output or None)
    return 1 if any(r.error for r in rows) else 0


def cmd_arl0(cfg, args):
    if not cfg.global_.h:
        raise ConfigError(["global.h: arl0 verifies given control limits; set global.h"])
    return _table(cfg, args, [0])


def cmd_arl1(cfg, args):
    return _table(cfg, args, None)


def read_rows(lines, m: int):
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("\t") if "\t" in line else line.split(",")
        if len(parts) != m:
            raise InputError(f"line {lineno}: expected {m} fields, got {len(parts)}")
        try:
            row = np.array([float(p) for p in parts])
        except ValueError:
            raise InputError(f"line {lineno}: non-numeric field") from None
        if not np.all(np.isfinite(row)):
            raise InputError(f"line {lineno}: missing or non-finite value")
        yield row


def cmd_monitor(cfg, args):
    if len(scheme_labels(cfg)) != 1:
        raise ConfigError(["global.kind: monitor needs exactly one global statistic"])
    if not cfg.global_.h:
        raise ConfigError(["global.h: monitor needs a control limit"])
    pool = obtain_pool(cfg, args.threads)
    scheme = build_schemes(cfg, pool)[0]
    stream = open(args.input) if args.input else sys.stdin
    try:
        rows = read_rows(stream, cfg.experiment.m)
        reference = None
        n_ref = scheme.family.reference_size
        if n_ref:
            reference = np.array([next(rows) for _ in range(n_ref)])
        alarm = monitor_rows(scheme, rows, cfg.experiment.seed, reference)
    except StopIteration:
        raise InputError("input ended inside the reference block") from None
    finally:
        if args.input:
            stream.close()
    if alarm is None:
        print("NO ALARM")
    return 0


def monitor_rows(scheme: MonitorScheme, rows, seed: int, reference=None):
    """Feed rows one tick at a time; print ``ALARM t=<tick>`` at the first G_t > h."""
    family = scheme.family
    state = initial_state(scheme, seed, 0, reference)
    for t, row in enumerate(rows, 1):
        state = family.step(state, row[None, :])
        g = float(scheme.global_kind.evaluate(family.stat(state))[0])
        log.info("t=%d G=%.6f", t, g)
        if g > scheme.h:
            print(f"ALARM t={t}", flush=True)
            return t
    return None


COMMANDS = {
    "gen-pool": cmd_gen_pool,
    "calibrate": cmd_calibrate,
    "arl0": cmd_arl0,
    "arl1": cmd_arl1,
    "monitor": cmd_monitor,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdmonitor", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.add_argument("--full-scale", action="store_true", help="K=1e5, ARL0=1000, 2500 replications")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output path")
    p.add_argument("--input", help="monitor: delimited input file (default stdin)")
    p.add_argument("--no-timing", action="store_true", help="leave wall_seconds empty (byte-stable CSV)")
    return p


def apply_overrides(cfg: MonitorConfig, args) -> MonitorConfig:
    if args.seed is not None:
        cfg.experiment.seed = args.seed
    if args.full_scale:
        cfg.pool.size = FULL_SCALE["pool_size"]
        cfg.experiment.target_arl0 = FULL_SCALE["target_arl0"]
        cfg.experiment.replications = FULL_SCALE["replications"]
        cfg.experiment.num_traces = FULL_SCALE["num_traces"]
        cfg.experiment.t_max = 0
    return cfg


def run_command(argv) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = apply_overrides(parse_config(Path(args.config).read_text()), args)
        return COMMANDS[args.command](cfg, args) or 0
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if not Path(args.config).exists() else 1
    except (InputError, PoolFileError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))
