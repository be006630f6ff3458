"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import regression, scenario
from .errors import ConfigError, NumericalError, PolarFluorError
from .oracle import oracle_run

log = logging.getLogger("polarfluor")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _window_arg(text: str):
    if text in ("hf", "lf"):
        return text
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("window must be hf, lf or lo,hi")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("window bounds must be numbers") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lmax", type=int, help="fixed harmonic cutoff (skips the doubling check)")
    common.add_argument("--grid-step", type=float, help="frequency step in units of gamma")
    common.add_argument("--window", type=_window_arg, help="hf, lf or lo,hi")
    common.add_argument("--tol", type=float, help="truncation convergence tolerance")
    common.add_argument("--method", choices=("auto", "lu", "eig"), help="resolvent evaluation")
    common.add_argument("--out", type=Path, help="output CSV path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="polarfluor",
                                description="Incoherent fluorescence spectra of a polychromatically "
                                            "driven polar two-level system.")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", parents=[common], help="single scenario from a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--peaks", type=Path, help="write the peak table here")
    pr = sub.add_parser("preset", parents=[common], help="built-in figure scenario")
    pr.add_argument("name", choices=sorted(scenario.PRESETS, key=lambda s: int(s[3:])))
    pr.add_argument("--peaks", type=Path, help="write the peak table here")
    pr.add_argument("--sweep", action="store_true", help="run the preset's sweep instead")
    pr.add_argument("--workers", type=int, default=1)
    s = sub.add_parser("sweep", parents=[common], help="parameter sweep from a config file")
    s.add_argument("config", type=Path)
    s.add_argument("--workers", type=int, default=1)
    o = sub.add_parser("oracle", parents=[common],
                       help="time-domain reference at a reduced carrier, beside the harmonic result")
    o.add_argument("config", help="config file or preset name")
    o.add_argument("--omega0", type=float, default=200.0, help="reduced carrier frequency")
    return p


def _overrides(args) -> dict:
    return {"lmax": args.lmax, "grid_step": args.grid_step, "window": args.window,
            "tol": args.tol, "method": args.method}


def _load(source) -> scenario.ScenarioConfig:
    if str(source) in scenario.PRESETS and not Path(source).exists():
        return scenario.preset(str(source))
    return scenario.load_config(source)


def _target(args, cfg, key):
    if args.out is not None:
        return args.out
    path = cfg.outputs.get(key)
    return Path(path) if path else None


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _emit_series(args, cfg, series, columns=None):
    _write(_target(args, cfg, "csv"), scenario.format_series_csv(series, columns=columns))


def _emit_peaks(args, cfg, result):
    path = getattr(args, "peaks", None) or cfg.outputs.get("peaks")
    if path and result.peaks is not None:
        Path(path).write_text(result.peaks.to_table())
    elif result.peaks is not None:
        for pk in result.peaks.peaks:
            log.info("peak %.4f height %.4g fwhm %.3f", pk.position, pk.height, pk.fwhm)


def _run_single(args, cfg):
    res = scenario.run_scenario(cfg)
    _emit_series(args, cfg, res.series)
    _emit_peaks(args, cfg, res)
    log.info("l_max=%s method=%s runtime=%.2fs", res.series.meta["l_max"],
             res.series.meta["method"], res.series.meta["runtime_s"])


def _run_sweep(args, cfg):
    res = scenario.run_sweep(cfg, workers=max(1, args.workers))
    _write(_target(args, cfg, "csv"), scenario.format_sweep_csv(res, {"scenario": cfg.name}))
    for v, err in res.errors.items():
        log.error("sweep value %g failed: %s", v, err)
    if res.errors and len(res.errors) == len(res.values):
        raise NumericalError("every sweep value failed")


def _run_oracle(args, cfg):
    red = scenario.reduce_scale(cfg, args.omega0)
    drives, lattice, state = scenario.solve_state(red)
    grid = scenario.omega_grid(red, drives, None)
    cs = regression.build_correlation_system(red.atom, drives, lattice, state)
    ref = regression.spectrum(cs, grid, red.method)
    _, sz_mean, _, spec = oracle_run(red.atom, drives, 2 * math.pi / lattice.nu, grid,
                                     lattice.omega_s)
    spec.meta.update({"scenario": red.name, "oracle_sz_mean": sz_mean,
                      "harmonic_x3_0": float(state.x3[state.l_max].real),
                      "max_abs_diff_rel": float(np.max(np.abs(spec.s - ref.s))
                                                / max(np.max(ref.s), np.finfo(float).tiny))})
    _emit_series(args, red, spec, columns={"s_harmonic": ref.s})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.verb == "preset":
            cfg = scenario.preset(args.name)
        else:
            cfg = _load(args.config)
        cfg = cfg.with_overrides(**_overrides(args))
        if args.verb == "sweep" or (args.verb == "preset" and args.sweep):
            _run_sweep(args, cfg)
        elif args.verb == "oracle":
            _run_oracle(args, cfg)
        else:
            _run_single(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, PolarFluorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
