"""Randomised localization trials and deployment sweeps.

Reproducibility contract: trial ``i`` of a scenario with seed ``s`` draws all
of its randomness from ``SeedSequence(s, spawn_key=(i,))`` (the ``i``-th child
of ``SeedSequence(s).spawn``). Per trial, in order:

1. one uniform for the transmit power (consumed even for a fixed power),
2. pairs of uniforms for the disk position (radius, angle), repeated while
   ``detectable_only`` rejects the point,
3. nine standard normals: three shadowing draws, then a real/imaginary
   fading pair per link.

Trials are processed in fixed-size chunks, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channel import (
    EnvironmentParams,
    LinkBudget,
    mean_rss_from_offsets,
    perturb_rss,
    rician_k_db,
    shadowing_sigma_db,
)
from .detection import TxPowerRange
from .geometry import DEFAULT_ADR_HEIGHT_M, Deployment, elevation_angle_from_offsets, equilateral_deployment
from .localization import DEFAULT_RHO_MAX_M, localize_batch

CHUNK_SIZE = 1024
MAX_REJECTIONS = 10_000
POWER_MODELS = ("fixed", "uniform")


@dataclass(frozen=True)
class Scenario:
    center: tuple[float, float] = (0.0, 0.0)
    side_l: float = 300.0
    altitude_h: float = 1000.0
    zone_radius: float = 1000.0
    adr_height: float = DEFAULT_ADR_HEIGHT_M
    # "fixed": ADr transmits true_power_dbm (assumed_c_dbm when unset);
    # "uniform": uniform in dBm over the power range
    true_power_model: str = "fixed"
    true_power_dbm: Optional[float] = None
    power_range: TxPowerRange = field(default_factory=TxPowerRange)
    env: EnvironmentParams = field(default_factory=EnvironmentParams)
    budget: LinkBudget = field(default_factory=LinkBudget)
    trials: int = 10_000
    seed: int = 2018
    fading_enabled: bool = False
    detectable_only: bool = False
    rho_max: float = DEFAULT_RHO_MAX_M

    def __post_init__(self):
        if not self.zone_radius > 0:
            raise ValueError(f"zone_radius must be > 0, got {self.zone_radius}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials}")
        if self.true_power_model not in POWER_MODELS:
            raise ValueError(
                f"true_power_model must be one of {POWER_MODELS}, got {self.true_power_model!r}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.adr_height < 0:
            raise ValueError("adr_height must be >= 0")
        if not self.altitude_h - self.adr_height >= 1.0:
            raise ValueError("SDr altitude must be at least 1 m above the ADr height")
        if not self.rho_max > 0:
            raise ValueError("rho_max must be > 0")
        self.deployment()  # validates side_l and altitude

    def deployment(self) -> Deployment:
        return equilateral_deployment(self.center, self.side_l, self.altitude_h)

    def fixed_power_dbm(self) -> float:
        if self.true_power_dbm is not None:
            return self.true_power_dbm
        return self.power_range.assumed_c_dbm


@dataclass
class TrialReport:
    mean_error_m: float
    median_error_m: float
    rmse_m: float
    mean_delta_m: float
    clamp_fraction: float
    true_xy: np.ndarray
    estimate_xy: np.ndarray
    errors_m: np.ndarray
    delta_m: np.ndarray
    p_tx_dbm: np.ndarray
    converged: np.ndarray

    @property
    def trials(self) -> int:
        return len(self.errors_m)

    @property
    def std_error_m(self) -> float:
        """Standard error of ``mean_error_m``."""
        if self.trials < 2:
            return math.nan
        return float(np.std(self.errors_m, ddof=1) / math.sqrt(self.trials))

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "mean_error_m": self.mean_error_m,
            "median_error_m": self.median_error_m,
            "rmse_m": self.rmse_m,
            "std_error_m": self.std_error_m,
            "mean_delta_m": self.mean_delta_m,
            "clamp_fraction": self.clamp_fraction,
            "nonconverged": int(np.count_nonzero(~self.converged)),
        }


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _link_offsets(xy: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    return np.linalg.norm(xy[:, None, :] - anchors[None, :, :], axis=2)


def _detectable(xy, p_tx, scenario: Scenario, anchors) -> bool:
    dz = scenario.altitude_h - scenario.adr_height
    rho = _link_offsets(np.asarray(xy)[None, :], anchors)[0]
    snr = mean_rss_from_offsets(p_tx, rho, dz, scenario.env, scenario.budget) - scenario.budget.noise_dbm
    return bool(np.all(snr >= scenario.budget.snr_threshold_db))


def _draw_trial(scenario: Scenario, index: int, anchors: np.ndarray):
    rng = trial_rng(scenario.seed, index)
    u = rng.random()
    pr = scenario.power_range
    if scenario.true_power_model == "uniform":
        p_tx = pr.p_min_dbm + u * (pr.p_max_dbm - pr.p_min_dbm)
    else:
        p_tx = scenario.fixed_power_dbm()
    cx, cy = scenario.center
    for _ in range(MAX_REJECTIONS):
        ur, ua = rng.random(2)
        r = scenario.zone_radius * math.sqrt(ur)
        a = 2.0 * math.pi * ua
        xy = (cx + r * math.cos(a), cy + r * math.sin(a))
        if not scenario.detectable_only or _detectable(xy, p_tx, scenario, anchors):
            break
    else:
        raise RuntimeError(
            f"trial {index}: no detectable ADr position after {MAX_REJECTIONS} draws"
        )
    normals = rng.standard_normal(9)
    return p_tx, xy, normals


def _run_chunk(scenario: Scenario, start: int, stop: int):
    dep = scenario.deployment()
    anchors = dep.ground_vertices()
    draws = [_draw_trial(scenario, i, anchors) for i in range(start, stop)]
    p_tx = np.array([d[0] for d in draws])
    xy = np.array([d[1] for d in draws])
    normals = np.array([d[2] for d in draws])

    env, budget = scenario.env, scenario.budget
    dz = scenario.altitude_h - scenario.adr_height
    rho = _link_offsets(xy, anchors)
    theta = elevation_angle_from_offsets(dz, rho)
    mean = mean_rss_from_offsets(p_tx[:, None], rho, dz, env, budget)
    fading = (normals[:, 3::2], normals[:, 4::2]) if scenario.fading_enabled else None
    rss = perturb_rss(
        mean, shadowing_sigma_db(theta, env), normals[:, :3], rician_k_db(theta, env), fading
    )
    loc = localize_batch(
        rss, dep, scenario.power_range, scenario.adr_height, env, budget, scenario.rho_max
    )
    errors = np.linalg.norm(loc.estimates - xy, axis=1)
    flagged = loc.clamped | ~loc.converged
    return p_tx, xy, loc.estimates, errors, loc.delta_m, loc.converged, flagged


def run_trials(scenario: Scenario, workers: int = 1) -> TrialReport:
    """Run ``scenario.trials`` independent localization trials and aggregate."""
    bounds = [
        (s, min(s + CHUNK_SIZE, scenario.trials)) for s in range(0, scenario.trials, CHUNK_SIZE)
    ]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_chunk(scenario, *b), bounds))
    else:
        parts = [_run_chunk(scenario, *b) for b in bounds]
    p_tx, xy, est, errors, delta, conv, flagged = (
        np.concatenate([p[k] for p in parts]) for k in range(7)
    )
    return TrialReport(
        mean_error_m=float(np.mean(errors)),
        median_error_m=float(np.median(errors)),
        rmse_m=float(np.sqrt(np.mean(errors**2))),
        mean_delta_m=float(np.mean(delta)),
        clamp_fraction=float(np.mean(flagged)),
        true_xy=xy,
        estimate_xy=est,
        errors_m=errors,
        delta_m=delta,
        p_tx_dbm=p_tx,
        converged=conv,
    )


def _check_values(values: Sequence[float], name: str) -> list[float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError(f"{name} must be non-empty")
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be sorted ascending")
    return vals


def sweep_reports(
    scenario: Scenario, param: str, values: Sequence[float], workers: int = 1
) -> list[tuple[float, TrialReport]]:
    """``run_trials`` at each value of ``param`` ("altitude_h" or "side_l"), same seed."""
    if param not in ("altitude_h", "side_l"):
        raise ValueError(f"cannot sweep {param!r}")
    return [
        (v, run_trials(replace(scenario, **{param: v}), workers))
        for v in _check_values(values, param)
    ]


def sweep_altitude(scenario: Scenario, h_values: Sequence[float], workers: int = 1):
    return [(h, r.mean_error_m) for h, r in sweep_reports(scenario, "altitude_h", h_values, workers)]


def sweep_separation(scenario: Scenario, l_values: Sequence[float], workers: int = 1):
    return [(l, r.mean_error_m) for l, r in sweep_reports(scenario, "side_l", l_values, workers)]


def optimize_deployment(
    scenario: Scenario,
    h_grid: Sequence[float],
    l_grid: Sequence[float],
    workers: int = 1,
) -> tuple[float, float, float]:
    """Exhaustive grid argmin of mean error; ties go to smaller h, then smaller l."""
    cells = evaluate_grid(scenario, h_grid, l_grid, workers)
    best = min(cells, key=lambda c: (c[2], c[0], c[1]))
    return best


def evaluate_grid(scenario, h_grid, l_grid, workers: int = 1) -> list[tuple[float, float, float]]:
    hs = sorted(float(h) for h in h_grid)
    ls = sorted(float(l) for l in l_grid)
    if not hs or not ls:
        raise ValueError("deployment grids must be non-empty")
    return [
        (h, l, run_trials(replace(scenario, altitude_h=h, side_l=l), workers).mean_error_m)
        for h in hs
        for l in ls
    ]
