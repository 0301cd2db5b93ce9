"""Command-line front end.

    twophoton <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Each run writes ``<subcommand>.csv`` (unless ``format = json``) and
``<subcommand>.json`` into the output directory. Both embed the effective
configuration and the package version, and are byte-identical for identical
configuration and seed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, echo_config, parse_config
from .ensemble import (
    background_subtract,
    point_mass,
    sample_coupling_distribution,
    spectrum_scan,
)
from .errors import SolverError
from .optimize import PvrModel, regression_fit, tau_opt_curve

log = logging.getLogger("twophoton")

SCHEMA = "twophoton.run/1"
SUBCOMMANDS = ("spectrum", "pvr-surface", "opt-window", "regression", "distribution")


class _Formatter(logging.Formatter):
    COLORS = {"WARNING": "\033[33m", "ERROR": "\033[31m", "DEBUG": "\033[2m"}

    def __init__(self, color: bool):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.color = color

    def format(self, record):
        text = super().format(record)
        code = self.COLORS.get(record.levelname)
        return f"{code}{text}\033[0m" if self.color and code else text


def _setup_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    color = sys.stderr.isatty() and "NO_COLOR" not in os.environ
    handler.setFormatter(_Formatter(color))
    root = logging.getLogger("twophoton")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


class AllPointsFailed(RuntimeError):
    pass


def _density(config: RunConfig):
    if config.density == "point":
        return point_mass(config.g)
    return sample_coupling_distribution(
        config.mask, config.g_max, config.f_cut, config.samples, config.seed, config.bins,
        config.nodes, config.mask_width or None)


def _fmt(x) -> str:
    return repr(float(x))


def run_distribution(config, threads):
    density = sample_coupling_distribution(
        config.mask, config.g_max, config.f_cut, config.samples, config.seed, config.bins,
        config.nodes, config.mask_width or None)
    rows = [(_fmt(g), _fmt(p)) for g, p in zip(density.centers, density.values)]
    summary = {"normalization": density.normalization(),
               "quadrature_nodes": [[float(g), float(w)] for g, w in zip(density.nodes, density.weights)]}
    return ("g_over_kappa", "kappa_P"), rows, summary, []


def run_spectrum(config, threads):
    params = config.system_params()
    density = _density(config)
    grid = config.delta_tilde_grid()
    scan = spectrum_scan(params, density, grid, config.tau_w, config.n_b, config.tol, threads)
    failures = [{"delta_tilde": d, "error": e} for d, e in scan.failures]
    summary = {"points": len(scan.delta_tilde), "background_subtracted": config.background_subtract}
    if config.background_subtract:
        mono = spectrum_scan(config.system_params(e2=0.0), density, scan.delta_tilde, config.tau_w,
                             config.n_b, config.tol, threads)
        scan = background_subtract(scan, mono)
        summary["clamped"] = scan.clamped
    if len(scan.delta_tilde) == 0:
        raise AllPointsFailed("every spectrum point failed")
    best = int(np.argmax(scan.value_con))
    summary["max_con_at_delta_tilde"] = float(scan.delta_tilde[best])
    rows = [(_fmt(d), _fmt(c), _fmt(u)) for d, c, u in scan.points]
    return ("delta_tilde", "delta_con", "delta_unc"), rows, summary, failures


def run_pvr_surface(config, threads):
    params = config.system_params()
    taus = config.tau_w_grid()
    rows, failures = [], []
    for g in config.g_grid():
        try:
            model = PvrModel(params.with_(g=float(g)), point_mass(float(g)), config.n_b, config.tol)
            con, unc = model.ratio(taus, "con"), model.ratio(taus, "unc")
        except (SolverError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
            failures.append({"g_over_kappa": float(g), "error": str(exc)})
            continue
        rows.extend((_fmt(g), _fmt(t), _fmt(c), _fmt(u)) for t, c, u in zip(taus, con, unc))
    if not rows:
        raise AllPointsFailed("every coupling failed")
    return ("g_over_kappa", "kappa_tau_w", "pvr_con", "pvr_unc"), rows, {}, failures


def _curve(axis, grid, config, density, threads):
    points = tau_opt_curve(axis, grid, config.system_params(), density,
                           (config.tau_lo, config.tau_hi), config.tau_tol, config.n_b, config.tol, threads)
    ok = [p for p in points if p.error is None]
    failures = [{"axis": p.axis_value, "error": p.error} for p in points if p.error is not None]
    if not ok:
        raise AllPointsFailed("every grid point failed")
    rows = [(_fmt(p.axis_value), _fmt(p.tau_opt_con), _fmt(p.tau_opt_unc)) for p in ok]
    diagnostics = [{"axis": p.axis_value, "pvr_con": p.pvr_con, "pvr_unc": p.pvr_unc,
                    "method_con": p.methods[0], "method_unc": p.methods[1]} for p in ok]
    return ok, rows, diagnostics, failures


def run_opt_window(config, threads):
    if config.opt_axis == "g":
        ok, rows, diag, failures = _curve("g", config.g_grid(), config, None, threads)
    else:
        ok, rows, diag, failures = _curve("gamma", config.gamma_grid, config, _density(config), threads)
    summary = {"axis": config.opt_axis, "diagnostics": diag}
    return ("axis", "kappa_tau_opt_con", "kappa_tau_opt_unc"), rows, summary, failures


def run_regression(config, threads):
    ok, rows, diag, failures = _curve("gamma", config.gamma_grid, config, _density(config), threads)
    summary = {"axis": "gamma", "diagnostics": diag}
    for which in ("con", "unc"):
        pts = [(p.axis_value, getattr(p, f"tau_opt_{which}")) for p in ok]
        if len(pts) >= 3:
            fit = regression_fit(pts)
            summary[f"fit_{which}"] = {"slope": fit.slope, "intercept": fit.intercept,
                                       "correlation": fit.correlation}
        else:
            summary[f"fit_{which}"] = None
    return ("axis", "kappa_tau_opt_con", "kappa_tau_opt_unc"), rows, summary, failures


RUNNERS = {
    "spectrum": run_spectrum,
    "pvr-surface": run_pvr_surface,
    "opt-window": run_opt_window,
    "regression": run_regression,
    "distribution": run_distribution,
}


def _header(subcommand: str, config: RunConfig) -> str:
    lines = [f"# twophoton {__version__} {subcommand}"]
    lines += [f"# {line}" for line in echo_config(config, include_location=False).splitlines()]
    return "\n".join(lines) + "\n"


def write_outputs(subcommand, config, columns, rows, summary, failures) -> list[Path]:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if config.format == "csv":
        path = out / f"{subcommand}.csv"
        body = ",".join(columns) + "\n" + "".join(",".join(r) + "\n" for r in rows)
        path.write_text(_header(subcommand, config) + body)
        written.append(path)
    doc = {
        "schema": SCHEMA,
        "version": __version__,
        "subcommand": subcommand,
        "config": config.as_dict(include_location=False),
        "columns": list(columns),
        "rows": [[float(x) for x in r] for r in rows],
        "summary": summary,
        "failures": failures,
    }
    path = out / f"{subcommand}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    written.append(path)
    return written


def run(subcommand: str, config: RunConfig, threads: int = 1) -> int:
    """Execute one subcommand; returns the process exit status."""
    if subcommand not in RUNNERS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    try:
        columns, rows, summary, failures = RUNNERS[subcommand](config, threads)
    except (AllPointsFailed, SolverError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    for path in write_outputs(subcommand, config, columns, rows, summary, failures):
        log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twophoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"twophoton {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="flat key = value file (defaults if omitted)")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed (overrides seed)")
    parser.add_argument("--threads", type=int, default=1, help="parallel workers for sweeps")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        text = args.config.read_text() if args.config else ""
        config = parse_config(text, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "key": exc.key, "line": exc.line,
                          "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 2
    if args.threads < 1:
        print(json.dumps({"error": "UsageError", "message": "--threads must be >= 1"}), file=sys.stderr)
        return 2
    return run(args.subcommand, config, args.threads)


if __name__ == "__main__":
    sys.exit(main())
