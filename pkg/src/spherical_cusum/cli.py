"""
Command-line front end.

Subcommands:
    quantiles   calibrate pillowcase sup thresholds
    simulate    simulate a coefficient panel under H0 or H1
    test        CUSUM test of one panel
    experiment  rejection-frequency experiment from a config file
    ingest      lat-lon temperature CSV to a coefficient panel
    scan        multiscale lmin scan of one panel
    zonal       export zonal coefficient series
    diagnose    pixelization tail diagnostic
    covariance  empirical covariance of the statistic vs the pillowcase limit

Exit codes: 0 success, 1 runtime or model error, 2 usage or config error.

Usage:
    spherical-cusum quantiles --grid 100 --inner-n 1000 --draws 500 --out q.json
    spherical-cusum simulate --hypothesis h1 --model 2 --alpha 0.5 --N 300 --out p.csv
    spherical-cusum test --panel p.csv --quantiles q.json --out result.json
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from colorama import Fore, Style, init

from spherical_cusum.config import ExperimentConfig, load_quantile_table
from spherical_cusum.cusum import decide_all, statistic_from_panel
from spherical_cusum.errors import ConfigError, SphericalCusumError, UsageError
from spherical_cusum.fields import (
    AngularPowerSpectrum,
    TemporalModel,
    scenario_preset,
    simulate_panel,
    simulate_pixelized_panel,
    zonal_series,
)
from spherical_cusum.harmonics import joint_regularity_exponent, tail_regularity_diagnostic
from spherical_cusum.harness import covariance_check, multiscale_scan, run_rejection_experiment
from spherical_cusum.ingest import run_pipeline
from spherical_cusum.manifest import RecordWriter, RunManifest
from spherical_cusum.panel_io import (
    read_panel,
    write_json,
    write_panel,
    write_quantile_table,
    write_sups_csv,
    write_surface,
    write_zonal_csv,
)
from spherical_cusum.pillowcase import MIN_DRAWS, QuantileTable, estimate_quantiles
from spherical_cusum.streams import default_workers

logger = logging.getLogger(__name__)

init(autoreset=True)

DEFAULT_PAIRS = "1,0.5:1,0.5;0.5,0.5:1,0.5;1,0.25:1,0.5"


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Flag helpers
# ---------------------------------------------------------------------------

def _float_list(text: str, name: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{name} must not be empty")
    return values


def _int_list(text: str, name: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise UsageError(f"{name} must not be empty")
    return values


def _point_pairs(text: str) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    pairs = []
    for chunk in text.split(";"):
        try:
            left, right = chunk.split(":")
            x = tuple(float(v) for v in left.split(","))
            y = tuple(float(v) for v in right.split(","))
        except ValueError:
            raise UsageError(f"--pairs entries look like 'r,s:r2,s2', got {chunk!r}") from None
        if len(x) != 2 or len(y) != 2 or not all(0.0 <= v <= 1.0 for v in x + y):
            raise UsageError(f"--pairs entries need coordinates in [0, 1], got {chunk!r}")
        pairs.append((x, y))
    return pairs


def _load_table(path: str | None) -> QuantileTable:
    if path is None:
        return QuantileTable.reference()
    return load_quantile_table(path)


def _workers(args: argparse.Namespace) -> int:
    return args.threads if args.threads is not None else default_workers()


def _banner(title: str) -> None:
    print("=" * 60)
    print(f"  {title}")
    print("=" * 60)


def _decision_line(level: float, threshold: float, reject: bool) -> str:
    verdict = f"{Fore.GREEN}reject{Style.RESET_ALL}" if reject else "accept"
    return f"  level {level:<6g} threshold {threshold:8.4f}  {verdict}"


def _finish(command: str, args: argparse.Namespace, start: float, outputs: list[Path],
            seed: int | None = None, extra: dict[str, Any] | None = None) -> None:
    parameters = {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "quiet")}
    if extra:
        parameters.update(extra)
    manifest = RunManifest(
        command=command, parameters=parameters, seed=seed,
        wall_time=time.perf_counter() - start, outputs=[str(p) for p in outputs],
    )
    manifest.write(outputs[0])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_quantiles(args: argparse.Namespace) -> int:
    levels = _float_list(args.levels, "--levels")
    if any(not 0.0 < v < 1.0 for v in levels):
        raise UsageError(f"--levels must lie in (0, 1), got {levels}")
    if args.draws < MIN_DRAWS:
        raise UsageError(f"draws below minimum {MIN_DRAWS} (got {args.draws})")
    if args.grid < 1 or args.inner_n < 1:
        raise UsageError("--grid and --inner-n must be >= 1")

    start = time.perf_counter()
    table = estimate_quantiles(args.grid, args.inner_n, args.draws, levels, args.seed,
                               workers=_workers(args))
    out = Path(args.out)
    write_quantile_table(table, out)
    outputs = [out]
    if args.sups_csv:
        write_sups_csv(table.sups, args.sups_csv)
        outputs.append(Path(args.sups_csv))
    _finish("quantiles", args, start, outputs, seed=args.seed)

    _banner("Pillowcase quantiles")
    for level, q in zip(table.levels, table.thresholds):
        print(f"  q{level:<6g} = {q:.4f}")
    print(f"\nWrote {out}")
    return 0


def _spectrum_from_args(args: argparse.Namespace) -> AngularPowerSpectrum:
    if args.spectrum == "power":
        if args.eta is None:
            raise UsageError("--spectrum power needs --eta")
        return AngularPowerSpectrum.power_law(args.eta, c0=args.c0)
    return AngularPowerSpectrum.rational(c0=args.c0)


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.n_times < 2:
        raise UsageError(f"--N must be >= 2, got {args.n_times}")
    if args.lmax < 0:
        raise UsageError(f"--L must be >= 0, got {args.lmax}")
    if args.hypothesis == "h0" and args.alpha:
        raise UsageError("--alpha only applies to --hypothesis h1")

    start = time.perf_counter()
    spectrum = _spectrum_from_args(args)
    temporal = TemporalModel(kind=args.temporal, phi=args.phi)
    scenario = scenario_preset(args.model, time_varying=args.hypothesis == "h1",
                               alpha=args.alpha, lmax=max(args.lmax, args.band_limit or 0))
    if args.lstar is not None:
        panel = simulate_pixelized_panel(
            spectrum, temporal, scenario, args.n_times, args.lmax, args.lstar,
            args.band_limit if args.band_limit is not None else args.lstar, args.seed,
        )
    else:
        panel = simulate_panel(spectrum, temporal, scenario, args.n_times, args.lmax, args.seed)
    outputs = write_panel(panel, args.out)
    _finish("simulate", args, start, outputs, seed=args.seed)

    _banner("Simulated panel")
    print(f"  hypothesis {args.hypothesis}  model {args.model}  alpha {args.alpha:g}")
    print(f"  N={panel.n_times}  L={panel.lmax}  values={panel.values.size}")
    print(f"\nWrote {args.out}")
    return 0


def cmd_test(args: argparse.Namespace) -> int:
    panel = read_panel(args.panel)
    if not 0 <= args.lmin <= panel.lmax:
        raise UsageError(f"--lmin {args.lmin} outside 0..{panel.lmax} for this panel")
    if args.grid < 1:
        raise UsageError("--grid must be >= 1")
    table = _load_table(args.quantiles)

    start = time.perf_counter()
    surface, sup = statistic_from_panel(panel, args.lmin, args.grid)
    decisions = decide_all(sup, table)
    outputs = [Path(args.out)]
    surface_path = None
    if args.surface_out:
        meta = write_surface(surface, args.surface_out)
        surface_path = str(args.surface_out)
        outputs += [Path(args.surface_out), meta]
    payload = {
        "sup": sup,
        "lmin": args.lmin,
        "grid": args.grid,
        "levels": list(table.levels),
        "thresholds": list(table.thresholds),
        "reject": {f"{level:g}": d.reject for level, d in decisions.items()},
        "surface": surface_path,
    }
    write_json(payload, args.out)
    _finish("test", args, start, outputs)

    _banner(f"CUSUM test (N={panel.n_times}, L={panel.lmax}, lmin={args.lmin})")
    print(f"  sup |A| = {sup:.4f}")
    for level, decision in decisions.items():
        print(_decision_line(level, decision.threshold, decision.reject))
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_file(args.config)
    start = time.perf_counter()
    result = run_rejection_experiment(config, workers=args.threads or config.workers)
    out = Path(args.out)
    write_json(result.to_dict(), out)
    outputs = [out]
    sups_csv = args.sups_csv or config.sups_csv
    if sups_csv:
        write_sups_csv(result.sups, sups_csv)
        outputs.append(Path(sups_csv))
    _finish("experiment", args, start, outputs, seed=config.seed)

    _banner(f"{config.hypothesis.upper()} experiment, model {config.model}, B={config.replicates}")
    for level, p, se in zip(result.levels, result.frequencies, result.standard_errors):
        print(f"  level {level:<6g} rejection {p:.4f}  (se {se:.4f})")
    print(f"\nWrote {out}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.base_end < args.base_start:
        raise UsageError("--base-end must not precede --base-start")
    if args.lmax > args.lstar:
        raise UsageError(f"--lmax {args.lmax} must not exceed --lstar {args.lstar}")

    start = time.perf_counter()
    fill = None if args.fill == "none" else args.fill
    result = run_pipeline(args.input, (args.base_start, args.base_end), args.lmax, args.lstar,
                          fill=fill)
    outputs = write_panel(result.panel, args.out)
    warnings_path = Path(args.warnings_out or Path(args.out).with_suffix(".warnings.jsonl"))
    with RecordWriter(warnings_path) as records:
        for record in result.warnings:
            records.write(record)
    outputs.append(warnings_path)
    _finish("ingest", args, start, outputs)

    _banner("Ingestion")
    print(f"  complete years: {result.panel.n_times}  lmax={args.lmax}  lstar={args.lstar}")
    print(f"  dropped years:  {len(result.warnings)}")
    print(f"\nWrote {args.out}")
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    lmin_list = _int_list(args.lmin_list, "--lmin-list")
    panel = read_panel(args.panel)
    bad = [v for v in lmin_list if not 0 <= v <= panel.lmax]
    if bad:
        raise UsageError(f"--lmin-list values {bad} outside 0..{panel.lmax} for this panel")
    table = _load_table(args.quantiles)

    start = time.perf_counter()
    entries = multiscale_scan(panel, lmin_list, args.grid, table)
    payload = {
        "panel": str(args.panel),
        "levels": list(table.levels),
        "thresholds": list(table.thresholds),
        "entries": [entry.to_dict() for entry in entries],
    }
    write_json(payload, args.out)
    _finish("scan", args, start, [Path(args.out)])

    _banner(f"Multiscale scan (N={panel.n_times}, L={panel.lmax})")
    for entry in entries:
        if entry.error:
            print(f"  lmin {entry.lmin:>3}  {Fore.RED}error{Style.RESET_ALL}: {entry.error}")
            continue
        flags = " ".join(f"{level:g}:{'R' if flag else '-'}" for level, flag in entry.reject.items())
        print(f"  lmin {entry.lmin:>3}  sup {entry.sup:8.4f}  {flags}")
    return 0


def cmd_zonal(args: argparse.Namespace) -> int:
    ells = _int_list(args.ells, "--ells")
    panel = read_panel(args.panel)
    bad = [ell for ell in ells if not 0 <= ell <= panel.lmax]
    if bad:
        raise UsageError(f"--ells values {bad} outside 0..{panel.lmax} for this panel")
    start = time.perf_counter()
    write_zonal_csv(zonal_series(panel, ells), args.out)
    _finish("zonal", args, start, [Path(args.out)])
    print(f"Wrote zonal series for ell={','.join(map(str, ells))} to {args.out}")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    if args.lstar <= args.L:
        raise UsageError(f"--lstar must exceed --L, got L={args.L}, lstar={args.lstar}")
    spectrum = _spectrum_from_args(args)
    ratio = tail_regularity_diagnostic(spectrum, args.L, args.lstar, strong=args.strong,
                                       lcap=args.lcap)
    payload: dict[str, Any] = {
        "spectrum": spectrum.to_dict(), "L": args.L, "lstar": args.lstar,
        "strong": args.strong, "tail_ratio": ratio, "zeta": None,
    }
    if spectrum.kind == "power" and spectrum.eta > 2:
        payload["zeta"] = joint_regularity_exponent(spectrum.eta, strong=args.strong)
    if args.out:
        start = time.perf_counter()
        write_json(payload, args.out)
        _finish("diagnose", args, start, [Path(args.out)])

    _banner("Pixelization tail diagnostic")
    print(f"  tail ratio = {ratio:.6g}")
    if payload["zeta"] is not None:
        print(f"  lstar should grow like L^{payload['zeta']:.4g}")
    return 0


def cmd_covariance(args: argparse.Namespace) -> int:
    pairs = _point_pairs(args.pairs)
    config = ExperimentConfig.from_file(args.config)
    if config.hypothesis != "h0":
        raise UsageError("covariance needs an H0 experiment config")
    start = time.perf_counter()
    entries = covariance_check(config, pairs, workers=args.threads or config.workers)
    write_json({"config": config.to_dict(), "entries": [e.to_dict() for e in entries]}, args.out)
    _finish("covariance", args, start, [Path(args.out)], seed=config.seed)

    _banner(f"Covariance check, B={config.replicates}")
    for e in entries:
        colour = Fore.GREEN if abs(e.z_score) <= 3 else Fore.RED
        print(f"  {e.pair}  empirical {e.empirical_cov:.4f}  target {e.target:.4f}  "
              f"{colour}z {e.z_score:+.2f}{Style.RESET_ALL}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: available cores)")

    parser = _Parser(prog="spherical-cusum", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantiles", parents=[common], help="calibrate sup thresholds")
    p.add_argument("--grid", type=int, default=300)
    p.add_argument("--inner-n", type=int, default=10000)
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--levels", default="0.9,0.95,0.99")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sups-csv", default=None, help="also write the sorted sups")
    p.set_defaults(func=cmd_quantiles)

    p = sub.add_parser("simulate", parents=[common], help="simulate a coefficient panel")
    p.add_argument("--hypothesis", choices=["h0", "h1"], default="h0")
    p.add_argument("--model", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--N", dest="n_times", type=int, default=100)
    p.add_argument("--L", dest="lmax", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temporal", choices=["iid", "ar1"], default="iid")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--spectrum", choices=["rational", "power"], default="rational")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--lstar", type=int, default=None,
                   help="sample on an order-lstar grid and re-analyze (pixelized panel)")
    p.add_argument("--band-limit", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test", parents=[common], help="CUSUM test of one panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--lmin", type=int, default=0)
    p.add_argument("--grid", type=int, default=300)
    p.add_argument("--quantiles", default=None, help="QuantileTable JSON (default: reference)")
    p.add_argument("--surface-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("experiment", parents=[common], help="rejection-frequency experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--sups-csv", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("ingest", parents=[common], help="lat-lon CSV to coefficient panel")
    p.add_argument("--input", required=True)
    p.add_argument("--base-start", type=int, default=1981)
    p.add_argument("--base-end", type=int, default=2010)
    p.add_argument("--lmax", type=int, default=32)
    p.add_argument("--lstar", type=int, default=64)
    p.add_argument("--fill", choices=["none", "nearest"], default="none")
    p.add_argument("--warnings-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("scan", parents=[common], help="multiscale lmin scan")
    p.add_argument("--panel", required=True)
    p.add_argument("--lmin-list", default="0,1,2,4,6,8")
    p.add_argument("--grid", type=int, default=300)
    p.add_argument("--quantiles", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("zonal", parents=[common], help="export zonal coefficient series")
    p.add_argument("--panel", required=True)
    p.add_argument("--ells", default="2,4,6,8")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_zonal)

    p = sub.add_parser("diagnose", parents=[common], help="pixelization tail diagnostic")
    p.add_argument("--spectrum", choices=["rational", "power"], default="power")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--lstar", type=int, required=True)
    p.add_argument("--strong", action="store_true")
    p.add_argument("--lcap", type=int, default=10**6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("covariance", parents=[common], help="covariance limit check")
    p.add_argument("--config", required=True)
    p.add_argument("--pairs", default=DEFAULT_PAIRS, help="'r,s:r2,s2;...'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_covariance)

    return parser


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("ERROR: --threads must be >= 1", file=sys.stderr)
        return 2

    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2
    except (SphericalCusumError, OSError) as exc:
        logger.debug("Command failed", exc_info=True)
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
