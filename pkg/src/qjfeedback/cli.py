"""Command-line interface.

Subcommands::

    simulate   one molecule: event log (JSON lines) and binned trace (CSV)
    run        ensembles of molecules per arm: TrialResult CSVs
    sweep      gain versus decision window: GainTable CSV
    analyze    two TrialResult CSVs: survival CSVs and gain/KS JSON
    replay     controller only: photon timestamps -> gate schedule CSV
    trace      re-bin an event log

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as qio
from .config import (
    PRESETS, ConfigError, RunConfig, format_config, parse_config, parse_duration, preset_config,
)
from .controller import FeedbackConfig, FeedbackConfigError, replay
from .ensemble import ARMS, run_ensemble, simulate_molecule, sweep_tau_d
from .photophysics import TrialResult, cycling_occupancy, detected_photon_rate
from .stats import gain_estimate, ks_two_sample, survival_curve

log = logging.getLogger("qjfeedback")

DEFAULT_SWEEP = "40us,70us,100us,150us,200us"


class UsageError(Exception):
    """Bad command-line values; exits with the configuration error code."""


def _durations(text: str) -> list[float]:
    try:
        values = [parse_duration(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not values:
        raise UsageError("empty duration list")
    return values


def _add_common(p: argparse.ArgumentParser, *, ensemble: bool = True) -> None:
    p.add_argument("--config", metavar="PATH", help="configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="start from a built-in preset (default dii when no --config)")
    p.add_argument("--seed", type=int, metavar="N", help="master seed (overrides the file)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the file)")
    if ensemble:
        p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--exact", dest="path", action="store_const", const="exact",
                       help="event-by-event singlet cycling")
        g.add_argument("--aggregated", dest="path", action="store_const", const="aggregated",
                       help="quasi-steady-state cycling (default)")
        p.add_argument("--horizon", metavar="DURATION", help="per-molecule time limit, e.g. 600s")
        p.add_argument("-n", "--n-molecules", type=int, metavar="N", help="molecules per arm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qjfeedback", description=__doc__.split("\n")[0])
    ap.add_argument("--show-preset", choices=sorted(PRESETS), metavar="NAME",
                    help="print a preset as a configuration file and exit")
    ap.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    quiet = argparse.ArgumentParser(add_help=False)
    quiet.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                       help="only log warnings and errors")
    sub = ap.add_subparsers(dest="command")
    _sub = sub.add_parser

    def add_parser(name, **kw):
        return _sub(name, parents=[quiet], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("simulate", help="simulate one molecule")
    _add_common(p)
    p.add_argument("--molecule", type=int, default=0, metavar="INDEX")
    p.add_argument("--arm", choices=ARMS, default="with")
    p.add_argument("--tau-d", metavar="DURATION", help="decision window override")
    p.add_argument("--bin-width", default="1ms", metavar="DURATION")

    p = sub.add_parser("run", help="simulate ensembles and write TrialResult CSVs")
    _add_common(p)
    p.add_argument("--arms", default="with,without", metavar="LIST")
    p.add_argument("--tau-d", metavar="DURATION", help="decision window override")

    p = sub.add_parser("sweep", help="gain versus decision window")
    _add_common(p)
    p.add_argument("--tau-d", default=DEFAULT_SWEEP, metavar="LIST",
                   help=f"comma-separated windows (default {DEFAULT_SWEEP})")
    p.add_argument("--n-boot", type=int, default=1000)

    p = sub.add_parser("analyze", help="survival curves, gain and KS test from two trial CSVs")
    p.add_argument("with_csv")
    p.add_argument("without_csv")
    p.add_argument("--out", metavar="DIR", default=".")
    p.add_argument("--seed", type=int, metavar="N", help="bootstrap seed (default: file seed)")
    p.add_argument("--n-boot", type=int, default=1000)

    p = sub.add_parser("replay", help="gate schedule produced by a photon file")
    _add_common(p, ensemble=False)
    p.add_argument("photons", help="photon timestamps, one per line, in seconds")
    p.add_argument("--tau-d", metavar="DURATION")
    p.add_argument("--tau-off", metavar="DURATION")
    p.add_argument("--latency", metavar="DURATION")
    p.add_argument("--horizon", metavar="DURATION", help="default: last photon time")

    p = sub.add_parser("trace", help="re-bin an event log")
    p.add_argument("events", help="JSON-lines event log written by simulate")
    p.add_argument("--bin-width", default="1ms", metavar="DURATION")
    p.add_argument("--end", metavar="DURATION", help="trace end (default: last event)")
    p.add_argument("--out", metavar="DIR", default=".")
    return ap


def resolve_config(args) -> RunConfig:
    """Configuration from --config/--preset with command-line overrides."""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        cfg = parse_config(text)
        if args.preset:
            raise UsageError("--preset cannot be combined with --config (set preset in the file)")
    else:
        cfg = preset_config(args.preset or "dii")
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if getattr(args, "path", None):
        changes["path"] = args.path
    if getattr(args, "horizon", None) and args.command != "replay":
        h = _durations(args.horizon)[0]
        if not h > 0:
            raise UsageError("--horizon must be > 0")
        changes["horizon"] = h
    if getattr(args, "n_molecules", None) is not None:
        if args.n_molecules < 1:
            raise UsageError("--n-molecules must be >= 1")
        changes["n_molecules"] = args.n_molecules
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be >= 1")
    return replace(cfg, **changes)


def _single_tau_d(cfg: RunConfig, text: str | None) -> RunConfig:
    if text is None:
        return cfg
    values = _durations(text)
    if len(values) != 1:
        raise UsageError("--tau-d takes a single value here")
    try:
        return replace(cfg, feedback=replace(cfg.feedback, tau_d=values[0]))
    except FeedbackConfigError as exc:
        raise UsageError(str(exc)) from None


def _head(cfg: RunConfig, **extra) -> str:
    return qio.header(cfg.master_seed, format_config(cfg, output=False), **extra)


def _meta(cfg: RunConfig, **extra) -> dict:
    return qio.meta_record(cfg.master_seed, format_config(cfg, output=False), **extra)


def _write(path: Path, text: str) -> None:
    qio.atomic_write(path, text)
    log.info("wrote %s", path)


def cmd_simulate(args) -> None:
    cfg = _single_tau_d(resolve_config(args), args.tau_d)
    width = _durations(args.bin_width)[0]
    if not width > 0:
        raise UsageError("--bin-width must be > 0")
    if args.molecule < 0:
        raise UsageError("--molecule must be >= 0")
    out = Path(cfg.out_dir)
    ens = cfg.ensemble()
    traj, tau_t = simulate_molecule(ens, args.molecule, args.arm, record_photons=True)
    extra = dict(molecule=args.molecule, arm=args.arm, tau_t_s=qio.fmt_time(tau_t))
    _write(out / "events.jsonl", qio.events_jsonl(traj.events(), _meta(cfg, **extra)))
    bins = qio.bin_trace(traj.photon_times, width, end=traj.end_time)
    _write(out / "trace.csv",
           qio.trace_csv(bins, _head(cfg, bin_width_s=qio.fmt_time(width), **extra)))
    result = TrialResult.from_trajectory(traj, tau_t, molecule_index=args.molecule, arm=args.arm)
    _write(out / "trial.csv", qio.trials_csv([result], _head(cfg, **extra)))
    log.info("molecule %d (%s): tau_t=%.4g s  N=%d  t=%.6g s  bleached=%s",
             args.molecule, args.arm, tau_t, result.n_photons, result.survival_time,
             result.bleached)


def _arms(text: str) -> list[str]:
    arms = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in arms if a not in ARMS]
    if bad or not arms:
        raise UsageError(f"--arms must be a comma-separated subset of {','.join(ARMS)}")
    return list(dict.fromkeys(arms))


def cmd_run(args) -> None:
    cfg = _single_tau_d(resolve_config(args), args.tau_d)
    arms = _arms(args.arms)
    out = Path(cfg.out_dir)
    for arm in arms:
        results = run_ensemble(cfg.ensemble(), arm, jobs=args.jobs)
        _write(out / f"trials_{arm}.csv", qio.trials_csv(results, _head(cfg, arm=arm)))
        n = np.array([r.n_photons for r in results])
        log.info("arm %s: %d molecules, median N=%.6g, %d unbleached",
                 arm, len(results), np.median(n) if n.size else float("nan"),
                 sum(not r.bleached for r in results))


def cmd_sweep(args) -> None:
    cfg = resolve_config(args)
    values = _durations(args.tau_d)
    if any(v <= 0 for v in values):
        raise UsageError("--tau-d values must be > 0")
    if args.n_boot < 1000:
        raise UsageError("--n-boot must be >= 1000")
    table = sweep_tau_d(cfg.ensemble(), values, n_boot=args.n_boot, jobs=args.jobs)
    head = _head(cfg, tau_d_list=",".join(qio.fmt_time(v) for v in values),
                 nominal_tau_t_s=qio.fmt_time(table.mean_tau_t))
    _write(Path(cfg.out_dir) / "gain_table.csv", qio.gain_table_csv(table, head))
    failed = [r for r in table.rows if r.error]
    if failed:
        raise RuntimeError(f"{len(failed)} sweep row(s) failed; see gain_table.csv")


def _bleached(results: list[TrialResult], name: str) -> list[TrialResult]:
    kept = [r for r in results if r.bleached]
    if len(kept) < len(results):
        warnings.warn(f"{name}: {len(results) - len(kept)} unbleached (censored) molecules "
                      "excluded from the analysis", stacklevel=2)
    if not kept:
        raise ValueError(f"{name}: no bleached molecules to analyze")
    return kept


def cmd_analyze(args) -> None:
    if args.n_boot < 1000:
        raise UsageError("--n-boot must be >= 1000")
    try:
        with_all = qio.read_trials_csv(args.with_csv)
        without_all = qio.read_trials_csv(args.without_csv)
        hdr = qio.read_header(args.with_csv)
        config_text = qio.read_config_block(args.with_csv)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read trial files: {exc}") from None
    seed = args.seed
    if seed is None:
        seed = int(hdr["master_seed"]) if hdr.get("master_seed", "none").isdigit() else 0
    a = _bleached(with_all, "with")
    b = _bleached(without_all, "without")
    out = Path(args.out)
    head = qio.header(seed, config_text, with_file=Path(args.with_csv).name,
                      without_file=Path(args.without_csv).name)
    for name, arm in (("with", a), ("without", b)):
        n = [r.n_photons for r in arm]
        t = [r.survival_time for r in arm]
        _write(out / f"survival_n_{name}.csv",
               qio.survival_csv(survival_curve(n), head, "n_photons", integer=True))
        _write(out / f"survival_t_{name}.csv",
               qio.survival_csv(survival_curve(t), head, "survival_time_s"))
    na = [r.n_photons for r in a]
    nb = [r.n_photons for r in b]
    gain = gain_estimate(na, nb, n_boot=args.n_boot, seed=seed)
    ks_n = ks_two_sample(na, nb)
    ks_t = ks_two_sample([r.survival_time for r in a], [r.survival_time for r in b])
    payload = {
        "g": gain.g, "ci_low": gain.ci_low, "ci_high": gain.ci_high,
        "d": ks_n.d, "p": ks_n.p,
        "d_time": ks_t.d, "p_time": ks_t.p,
        "n_with": gain.n_with, "n_without": gain.n_without,
        "n_censored_with": len(with_all) - len(a),
        "n_censored_without": len(without_all) - len(b),
    }
    meta = qio.meta_record(seed, config_text, n_boot=args.n_boot)
    _write(out / "analysis.json", qio.json_text(payload, meta))
    log.info("G=%.4g [%.4g, %.4g]  KS(N): d=%.4g p=%.3g  KS(t): d=%.4g p=%.3g",
             gain.g, gain.ci_low, gain.ci_high, ks_n.d, ks_n.p, ks_t.d, ks_t.p)


def cmd_replay(args) -> None:
    cfg = resolve_config(args)
    fb = cfg.feedback
    changes = {}
    for name in ("tau_d", "tau_off", "latency"):
        text = getattr(args, name)
        if text is not None:
            changes[name] = _durations(text)[0]
    try:
        fb = replace(fb, enabled=True, **changes)
    except FeedbackConfigError as exc:
        raise UsageError(str(exc)) from None
    cfg = replace(cfg, feedback=fb)
    try:
        times = qio.read_photon_times(args.photons)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read photons: {exc}") from None
    if args.horizon is not None:
        horizon = _durations(args.horizon)[0]
    else:
        horizon = float(times[-1]) if times.size else 0.0
    schedule = replay(fb, times, horizon)
    head = _head(cfg, photons_file=Path(args.photons).name, n_photons=times.size,
                 replay_horizon_s=qio.fmt_time(horizon))
    _write(Path(cfg.out_dir) / "gate.csv", qio.gate_csv(schedule, head))


def cmd_trace(args) -> None:
    width = _durations(args.bin_width)[0]
    if not width > 0:
        raise UsageError("--bin-width must be > 0")
    try:
        meta, events = qio.read_events_jsonl(args.events)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read event log: {exc}") from None
    photons = [t for t, kind in events if kind == "photon"]
    end = _durations(args.end)[0] if args.end else (max(t for t, _ in events) if events else 0.0)
    meta = meta or {}
    head = qio.header(meta.get("master_seed"), meta.get("config"),
                      events_file=Path(args.events).name, bin_width_s=qio.fmt_time(width))
    bins = qio.bin_trace(photons, width, end=end)
    _write(Path(args.out) / "trace.csv", qio.trace_csv(bins, head))


COMMANDS = {
    "simulate": cmd_simulate, "run": cmd_run, "sweep": cmd_sweep,
    "analyze": cmd_analyze, "replay": cmd_replay, "trace": cmd_trace,
}


def show_preset(name: str) -> str:
    cfg = preset_config(name)
    p = cfg.params
    p_mean = p.replace(tau_t=cfg.lifetime.nominal)
    lines = [
        f"# preset {name}",
        f"# ISC branching k_isc/(k_fl+k_isc) = {p.k_isc / (p.k_fl + p.k_isc):.3g}",
        f"# detected count rate while cycling = {p.eta * p.k_fl * cycling_occupancy(p):.4g} /s",
        f"# time-averaged detected rate (nominal tau_t) = {detected_photon_rate(p_mean):.4g} /s",
        f"# mean photons per bright period = {p.eta * p.k_fl / p.k_isc:.4g}",
        f"# lifetime population: {cfg.lifetime.kind}, log-median "
        f"{cfg.lifetime.median * 1e6:.4g} us, sigma_log {cfg.lifetime.sigma_log}, "
        f"arithmetic mean {cfg.lifetime.mean * 1e6:.4g} us",
    ]
    return "\n".join(lines) + "\n" + format_config(cfg)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.show_preset:
        sys.stdout.write(show_preset(args.show_preset))
        return 0
    if not args.command:
        ap.print_help(sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except (ConfigError, UsageError, FeedbackConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any failure while running
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
