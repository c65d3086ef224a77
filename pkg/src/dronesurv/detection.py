"""SNR-threshold detection: minimum detectable power, coverage radius, best altitude."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import (
    EnvironmentParams,
    LinkBudget,
    mean_rss_dbm,
    mean_rss_from_offsets,
    shadowing_sigma_db,
)
from .geometry import DEFAULT_ADR_HEIGHT_M, Position3D, elevation_angle_from_offsets


@dataclass(frozen=True)
class TxPowerRange:
    """Bounds on the unknown ADr transmit power and the value assumed for ranging."""

    p_min_dbm: float = 0.0
    p_max_dbm: float = 20.0
    assumed_c_dbm: Optional[float] = None

    def __post_init__(self):
        if self.assumed_c_dbm is None:
            object.__setattr__(self, "assumed_c_dbm", 0.5 * (self.p_min_dbm + self.p_max_dbm))
        if self.p_min_dbm > self.p_max_dbm:
            raise ValueError(
                f"power: p_min_dbm ({self.p_min_dbm}) exceeds p_max_dbm ({self.p_max_dbm})"
            )
        if not self.p_min_dbm <= self.assumed_c_dbm <= self.p_max_dbm:
            raise ValueError(
                f"power: assumed_c_dbm ({self.assumed_c_dbm}) outside "
                f"[{self.p_min_dbm}, {self.p_max_dbm}]"
            )

    @classmethod
    def known(cls, p_dbm: float) -> "TxPowerRange":
        return cls(p_dbm, p_dbm, p_dbm)


@dataclass(frozen=True)
class DetectionCurvePoint:
    altitude_h: float
    value: float


def _check_altitude(h: float, adr_height: float) -> float:
    if not h > adr_height:
        raise ValueError(f"SDr altitude {h} must exceed ADr height {adr_height}")
    return h - adr_height


def _required_margin_db(rho, dz, env, budget):
    if budget.margin_sigmas == 0:
        return 0.0
    theta = elevation_angle_from_offsets(dz, rho)
    return budget.margin_sigmas * np.asarray(shadowing_sigma_db(theta, env))


def _snr_at(p_tx_dbm, rho, dz, env, budget):
    """Mean SNR minus the optional shadowing margin."""
    rss = np.asarray(mean_rss_from_offsets(p_tx_dbm, rho, dz, env, budget))
    return rss - budget.noise_dbm - _required_margin_db(rho, dz, env, budget)


def mean_snr_db(
    p_tx_dbm: float,
    sdr: Position3D,
    adr: Position3D,
    env: EnvironmentParams,
    budget: LinkBudget,
) -> float:
    return mean_rss_dbm(p_tx_dbm, sdr, adr, env, budget) - budget.noise_dbm


def min_detectable_power_dbm(
    h: float,
    zone_radius: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    adr_height: float = DEFAULT_ADR_HEIGHT_M,
) -> float:
    """Lowest transmit power that meets the SNR threshold over the whole zone.

    Mean RSS falls monotonically with ground range, so the zone edge is the
    binding point. With a non-zero shadowing margin the whole radius is
    scanned instead, since the margin itself varies with angle.
    """
    dz = _check_altitude(h, adr_height)
    if zone_radius < 0:
        raise ValueError(f"zone_radius must be >= 0, got {zone_radius}")
    if budget.margin_sigmas == 0:
        rho = np.asarray(float(zone_radius))
    else:
        rho = np.append(np.linspace(0.0, zone_radius, 513), zone_radius)
    deficit = budget.snr_threshold_db - _snr_at(0.0, rho, dz, env, budget)
    return float(np.max(deficit))


def coverage_radius_m(
    h: float,
    p_tx_min_dbm: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    adr_height: float = DEFAULT_ADR_HEIGHT_M,
    tol: float = 0.1,
) -> float:
    """Largest ground range at which the mean SNR still meets the threshold.

    Bisection on the monotone SNR-vs-range curve; returns the inner end of
    the final bracket, so the reported radius is always detectable.
    """
    dz = _check_altitude(h, adr_height)

    def ok(rho: float) -> bool:
        return float(_snr_at(p_tx_min_dbm, rho, dz, env, budget)) >= budget.snr_threshold_db

    if not ok(0.0):
        return 0.0
    lo, hi = 0.0, max(dz, 1.0)
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e9:
            raise ArithmeticError("coverage radius unbounded; check the link budget")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _check_grid(h_grid: Sequence[float], adr_height: float) -> np.ndarray:
    grid = np.asarray(h_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("altitude grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) < 0):
        raise ValueError("altitude grid must be sorted ascending")
    if np.any(grid <= adr_height):
        raise ValueError(f"every grid altitude must exceed the ADr height {adr_height}")
    return grid


def min_power_curve(zone_radius, h_grid, env, budget, adr_height=DEFAULT_ADR_HEIGHT_M):
    grid = _check_grid(h_grid, adr_height)
    return [
        DetectionCurvePoint(float(h), min_detectable_power_dbm(h, zone_radius, env, budget, adr_height))
        for h in grid
    ]


def coverage_curve(p_tx_min_dbm, h_grid, env, budget, adr_height=DEFAULT_ADR_HEIGHT_M):
    grid = _check_grid(h_grid, adr_height)
    return [
        DetectionCurvePoint(float(h), coverage_radius_m(h, p_tx_min_dbm, env, budget, adr_height))
        for h in grid
    ]


def optimal_altitude_for_min_power(
    zone_radius: float,
    h_grid: Sequence[float],
    env: EnvironmentParams,
    budget: LinkBudget,
    adr_height: float = DEFAULT_ADR_HEIGHT_M,
) -> tuple[float, float]:
    """Grid argmin of the minimum detectable power; ties go to the lower altitude."""
    curve = min_power_curve(zone_radius, h_grid, env, budget, adr_height)
    best = min(curve, key=lambda p: p.value)  # min() keeps the first of equal values
    return best.altitude_h, best.value


def optimal_altitude_for_coverage(
    p_tx_min_dbm: float,
    h_grid: Sequence[float],
    env: EnvironmentParams,
    budget: LinkBudget,
    adr_height: float = DEFAULT_ADR_HEIGHT_M,
) -> tuple[float, float]:
    """Grid argmax of the coverage radius; ties go to the lower altitude."""
    curve = coverage_curve(p_tx_min_dbm, h_grid, env, budget, adr_height)
    best = max(curve, key=lambda p: p.value)
    return best.altitude_h, best.value


def coverage_gain(p_tx_min_dbm, h_grid, env, budget, adr_height=DEFAULT_ADR_HEIGHT_M) -> float:
    """Optimal coverage radius over the coverage at the lowest grid altitude."""
    _, r_star = optimal_altitude_for_coverage(p_tx_min_dbm, h_grid, env, budget, adr_height)
    r_low = coverage_radius_m(float(h_grid[0]), p_tx_min_dbm, env, budget, adr_height)
    return math.inf if r_low == 0 else r_star / r_low
