"""Command-line entry point.

Each subcommand writes ``<subcommand>.csv`` and a ``<subcommand>.json``
sidecar into the output directory (``--out``, else ``$DRONESURV_OUTPUT_DIR``,
else the working directory). CSV files start with a ``# dronesurv-csv
format_version=N`` line, then a header whose column names carry their
units; floats use 6 significant digits. The sidecar holds the fully
resolved config plus the invocation, which is enough to re-run it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from . import channel, detection, montecarlo
from .config import (
    FORMAT_VERSION,
    ConfigError,
    ConfigSyntaxError,
    RunConfig,
    apply_overrides,
    from_dict,
    to_dict,
)
from .geometry import Position3D
from .localization import localize

log = logging.getLogger("dronesurv")

OUTPUT_DIR_ENV = "DRONESURV_OUTPUT_DIR"
CSV_MAGIC = "# dronesurv-csv"
SUBCOMMANDS = (
    "channel-curve",
    "min-power",
    "coverage",
    "localize-once",
    "sweep-h",
    "sweep-l",
    "optimize",
)

SWEEP_COLUMNS = ["mean_error_m", "median_error_m", "rmse_m", "mean_delta_m", "clamp_fraction"]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    return f"{float(v):.6g}"


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"{CSV_MAGIC} format_version={FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    """Read a CSV written by this tool back into (columns, float rows)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(CSV_MAGIC):
        raise ValueError(f"{path}: not a dronesurv CSV")
    reader = csv.reader(lines[1:])
    columns = next(reader)
    return columns, [[float(x) for x in row] for row in reader]


def _sweep_rows(reports):
    return [
        [v, r.mean_error_m, r.median_error_m, r.rmse_m, r.mean_delta_m, r.clamp_fraction]
        for v, r in reports
    ]


def run_subcommand(name: str, cfg: RunConfig, workers: int = 1):
    """Compute one analysis; returns (columns, rows, extra JSON results)."""
    s, sw = cfg.scenario, cfg.sweep
    env, budget = s.env, s.budget
    if name == "channel-curve":
        theta = np.arange(0.0, 90.0 + 1e-9, sw.theta_step)
        rows = zip(
            theta,
            channel.p_los(theta, env),
            channel.path_loss_exponent(theta, env),
            channel.shadowing_sigma_db(theta, env),
        )
        return ["theta_deg", "p_los", "alpha", "sigma_db"], list(rows), {}
    if name == "min-power":
        grid = sw.detection_h.values()
        curve = detection.min_power_curve(s.zone_radius, grid, env, budget, s.adr_height)
        h_star, p_star = detection.optimal_altitude_for_min_power(
            s.zone_radius, grid, env, budget, s.adr_height
        )
        extra = {
            "zone_radius_m": s.zone_radius,
            "optimum": {"h_m": h_star, "p_min_dbm": p_star},
            "reduction_from_lowest_db": curve[0].value - p_star,
        }
        return ["h_m", "p_min_dbm"], [(p.altitude_h, p.value) for p in curve], extra
    if name == "coverage":
        grid = sw.detection_h.values()
        curve = detection.coverage_curve(sw.p_tx_min_dbm, grid, env, budget, s.adr_height)
        best = max(curve, key=lambda p: p.value)
        extra = {
            "p_tx_min_dbm": sw.p_tx_min_dbm,
            "optimum": {"h_m": best.altitude_h, "coverage_radius_m": best.value},
            "gain_over_lowest": best.value / curve[0].value if curve[0].value > 0 else None,
        }
        return ["h_m", "coverage_radius_m"], [(p.altitude_h, p.value) for p in curve], extra
    if name == "localize-once":
        return _localize_once(cfg)
    if name == "sweep-h":
        reports = montecarlo.sweep_reports(s, "altitude_h", sw.h.values(), workers)
        return ["h_m"] + SWEEP_COLUMNS, _sweep_rows(reports), {}
    if name == "sweep-l":
        reports = montecarlo.sweep_reports(s, "side_l", sw.l.values(), workers)
        return ["l_m"] + SWEEP_COLUMNS, _sweep_rows(reports), {}
    if name == "optimize":
        cells = montecarlo.evaluate_grid(s, sw.h.values(), sw.l.values(), workers)
        h_star, l_star, err = min(cells, key=lambda c: (c[2], c[0], c[1]))
        extra = {"optimum": {"h_m": h_star, "l_m": l_star, "mean_error_m": err}}
        return ["h_m", "l_m", "mean_error_m"], cells, extra
    raise ValueError(f"unknown subcommand {name!r}")


def _localize_once(cfg: RunConfig):
    s = cfg.scenario
    dep = s.deployment()
    adr = Position3D(*cfg.sweep.adr_xy, s.adr_height)
    rng = montecarlo.trial_rng(s.seed, 0)
    p_tx = s.fixed_power_dbm()
    rss = [
        channel.sample_rss_dbm(p_tx, v, adr, s.env, s.budget, s.fading_enabled, rng)
        for v in dep.vertices
    ]
    res = localize(rss, dep, s.power_range, s.adr_height, s.env, s.budget, s.rho_max)
    err = float(np.hypot(res.estimate[0] - adr.x, res.estimate[1] - adr.y))
    columns = [
        "true_x_m", "true_y_m", "est_x_m", "est_y_m", "error_m", "delta_m", "converged",
        "rss1_dbm", "rss2_dbm", "rss3_dbm", "range1_m", "range2_m", "range3_m",
    ]
    row = [adr.x, adr.y, *res.estimate, err, res.delta_m, res.converged, *rss, *res.range_estimates]
    return columns, [row], {"p_tx_dbm": p_tx}


def load_document(path: str | None) -> dict:
    """Read a YAML config, or the ``config`` block of a JSON sidecar."""
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(f"malformed config document: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigSyntaxError("config document must be a mapping at the top level")
    if "format_version" in doc and "config" in doc:
        return doc["config"]
    return doc


def _flag_overrides(args) -> dict:
    ov = {}
    for path, value in (
        ("trials", args.trials),
        ("seed", args.seed),
        ("deployment.altitude_h", args.altitude),
        ("deployment.side_l", args.side),
        ("zone.radius", args.zone_radius),
        ("sweep.p_tx_min_dbm", args.p_tx_min),
    ):
        if value is not None:
            ov[path] = value
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key.path=value, got {item!r}")
        key, raw = item.split("=", 1)
        ov[key.strip()] = yaml.safe_load(raw)
    return ov


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dronesurv", description="Aerial drone surveillance channel, detection and localization analyses."
    )
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("-c", "--config", help="YAML scenario document")
    p.add_argument("-o", "--out", help=f"output directory (default: ${OUTPUT_DIR_ENV} or cwd)")
    p.add_argument("-j", "--workers", type=int, default=1, help="threads for Monte Carlo trials")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--altitude", type=float, help="SDr altitude h [m]")
    p.add_argument("--side", type=float, help="SDr triangle side l [m]")
    p.add_argument("--zone-radius", type=float, help="no-fly zone radius [m]")
    p.add_argument("--p-tx-min", type=float, help="minimum ADr power for coverage [dBm]")
    p.add_argument("--set", action="append", metavar="KEY.PATH=VALUE", help="override any config key")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        doc = apply_overrides(load_document(args.config), _flag_overrides(args))
        cfg = from_dict(doc)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out_dir = Path(args.out or os.environ.get(OUTPUT_DIR_ENV) or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        columns, rows, extra = run_subcommand(args.subcommand, cfg, args.workers)
        stem = args.subcommand
        csv_path = out_dir / f"{stem}.csv"
        csv_path.write_text(render_csv(columns, rows))
        sidecar = {
            "format_version": FORMAT_VERSION,
            "subcommand": args.subcommand,
            "columns": list(columns),
            "config": to_dict(cfg),
            "results": extra,
        }
        (out_dir / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", csv_path)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"dronesurv: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"dronesurv: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
