"""RSS ranging under unknown transmit power and three-SDr trilateration.

Ranging inverts the deterministic mean-RSS curve directly for *ground* range
at the known SDr altitude, so slant-to-ground projection never comes up.
Everything here has a batch form working on ``(n, 3)`` arrays of links; the
single-ADr functions are wrappers used by the CLI and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import EnvironmentParams, LinkBudget, mean_rss_from_offsets
from .detection import TxPowerRange
from .geometry import DEFAULT_ADR_HEIGHT_M, Deployment

DEFAULT_RHO_MAX_M = 10_000.0
INVERSION_TOL_M = 1e-6
MAX_ITERATIONS = 100


@dataclass(frozen=True)
class LocalizationResult:
    estimate: tuple[float, float]
    delta_m: float
    range_estimates: tuple[float, float, float]
    converged: bool


def _height_offset(sdr_altitude, adr_height: float):
    dz = np.asarray(sdr_altitude, dtype=float) - adr_height
    if not np.all(dz >= 1.0):
        raise ValueError(
            f"SDr altitude {sdr_altitude} must be at least 1 m above the ADr ({adr_height})"
        )
    return float(dz) if dz.ndim == 0 else dz


def invert_rss_to_ground_range(
    rss_dbm,
    assumed_p_tx_dbm,
    sdr_altitude: float,
    adr_height: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    rho_max: float = DEFAULT_RHO_MAX_M,
    tol: float = INVERSION_TOL_M,
):
    """Ground range whose mean RSS equals ``rss_dbm``, by bisection on [0, rho_max].

    RSS above the nadir value clamps to 0, RSS below the value at
    ``rho_max`` clamps to ``rho_max``. Accepts scalars or arrays.
    """
    dz = _height_offset(sdr_altitude, adr_height)
    if not rho_max > 0:
        raise ValueError(f"rho_max must be > 0, got {rho_max}")
    rss, p, dz = np.broadcast_arrays(
        np.asarray(rss_dbm, dtype=float), np.asarray(assumed_p_tx_dbm, dtype=float), dz
    )
    lo = np.zeros(rss.shape)
    hi = np.full(rss.shape, float(rho_max))
    n_iter = max(1, math.ceil(math.log2(rho_max / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        above = mean_rss_from_offsets(p, mid, dz, env, budget) > rss
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    rho = 0.5 * (lo + hi)
    rho = np.where(rss >= mean_rss_from_offsets(p, 0.0, dz, env, budget), 0.0, rho)
    rho = np.where(rss <= mean_rss_from_offsets(p, rho_max, dz, env, budget), rho_max, rho)
    return float(rho) if rho.ndim == 0 else rho


def uncertainty_radius_m(
    rss_dbm,
    power_range: TxPowerRange,
    sdr_altitude: float,
    adr_height: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    rho_max: float = DEFAULT_RHO_MAX_M,
):
    """Half the spread of range estimates between the two power bounds."""
    if power_range.p_min_dbm == power_range.p_max_dbm:
        return 0.0 if np.ndim(rss_dbm) == 0 else np.zeros(np.shape(rss_dbm))
    args = (sdr_altitude, adr_height, env, budget, rho_max)
    far = invert_rss_to_ground_range(rss_dbm, power_range.p_max_dbm, *args)
    near = invert_rss_to_ground_range(rss_dbm, power_range.p_min_dbm, *args)
    return 0.5 * (far - near)


def _check_anchors(anchors: np.ndarray) -> None:
    e1 = anchors[1] - anchors[0]
    e2 = anchors[2] - anchors[0]
    area2 = abs(e1[0] * e2[1] - e1[1] * e2[0])
    scale = max(np.linalg.norm(e1), np.linalg.norm(e2))
    if scale == 0 or area2 <= 1e-9 * scale * scale:
        raise ValueError("trilateration anchors are collinear or coincident")


def linear_initializer(ranges: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Closed-form estimate from differences of the squared-range equations."""
    A = 2.0 * (anchors[1:] - anchors[0])
    b = (
        ranges[:, :1] ** 2
        - ranges[:, 1:] ** 2
        + np.sum(anchors[1:] ** 2, axis=1)
        - np.sum(anchors[0] ** 2)
    )
    return np.linalg.solve(A, b.T).T


def range_residual_cost(points: np.ndarray, ranges: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Sum of squared range residuals for each row of ``points``."""
    dist = np.linalg.norm(points[:, None, :] - anchors[None, :, :], axis=2)
    return np.sum((dist - ranges) ** 2, axis=1)


def _refine(p, ranges, anchors, step_tol, max_iter):
    """Damped Newton iteration on the summed squared range residuals.

    The full Hessian is used because residuals stay large for inconsistent
    ranges, where Gauss-Newton crawls. A step is kept only if it lowers the
    cost; otherwise the damping grows tenfold.
    """
    p = p.copy()
    cost = range_residual_cost(p, ranges, anchors)
    lam = np.full(len(p), 1e-3)
    converged = np.zeros(len(p), dtype=bool)
    eye = np.eye(2)
    for _ in range(max_iter):
        idx = np.flatnonzero(~converged)
        if idx.size == 0:
            break
        pa, ra = p[idx], ranges[idx]
        diff = pa[:, None, :] - anchors[None, :, :]
        dist = np.maximum(np.linalg.norm(diff, axis=2), 1e-9)
        u = diff / dist[..., None]
        resid = dist - ra
        uu = u[..., :, None] * u[..., None, :]
        curv = (resid / dist)[..., None, None] * (eye - uu)
        hess = np.sum(uu + curv, axis=1)
        grad = np.einsum("nki,nk->ni", u, resid)
        step = np.linalg.solve(hess + lam[idx, None, None] * eye, grad[..., None])[..., 0]
        trial = pa - step
        trial_cost = range_residual_cost(trial, ra, anchors)
        better = trial_cost <= cost[idx]
        p[idx[better]] = trial[better]
        cost[idx[better]] = trial_cost[better]
        lam[idx] = np.where(better, np.maximum(lam[idx] * 0.1, 1e-9), lam[idx] * 10.0)
        converged[idx] = np.linalg.norm(step, axis=1) < step_tol
    return p, cost, converged


def _ring_starts(ranges: np.ndarray, anchors: np.ndarray) -> list[np.ndarray]:
    """Extra starting points on a circle of the mean range, toward and away from each anchor."""
    c = anchors.mean(axis=0)
    radial = anchors - c
    radial /= np.linalg.norm(radial, axis=1, keepdims=True)
    r = ranges.mean(axis=1, keepdims=True)
    return [c + sign * r * radial[k] for k in range(3) for sign in (1.0, -1.0)]


def trilaterate_batch(
    ranges: np.ndarray,
    anchors: np.ndarray,
    step_tol: float,
    max_iter: int = MAX_ITERATIONS,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares position fit for each row of ``ranges`` (shape ``(n, 3)``).

    Refinement runs from the linear initializer and, because the cost can
    have a mirror-image local minimum, from six ring points around the
    anchors; the lowest-cost result wins (the initializer's on ties).
    Returns the ``(n, 2)`` estimates and the winner's convergence flag.
    """
    ranges = np.atleast_2d(np.asarray(ranges, dtype=float))
    anchors = np.asarray(anchors, dtype=float)
    _check_anchors(anchors)
    best, best_cost, best_conv = _refine(
        linear_initializer(ranges, anchors), ranges, anchors, step_tol, max_iter
    )
    for start in _ring_starts(ranges, anchors):
        p, cost, conv = _refine(start, ranges, anchors, step_tol, max_iter)
        better = cost < best_cost * (1.0 - 1e-12) - 1e-12
        best[better] = p[better]
        best_cost[better] = cost[better]
        best_conv[better] = conv[better]
    return best, best_conv


def trilaterate(
    ground_ranges, deployment: Deployment, adr_height: float = DEFAULT_ADR_HEIGHT_M
) -> tuple[float, float, bool]:
    """Position on the ground plane from three ground ranges to the SDrs.

    ``adr_height`` is accepted for interface symmetry; the ranges are already
    horizontal so it does not enter the fit.
    """
    r = np.asarray(ground_ranges, dtype=float)
    if r.shape != (3,) or not np.all(np.isfinite(r)) or np.any(r < 0):
        raise ValueError(f"expected three finite non-negative ranges, got {ground_ranges}")
    est, conv = trilaterate_batch(
        r[None, :], deployment.ground_vertices(), 1e-6 * deployment.side_l
    )
    return float(est[0, 0]), float(est[0, 1]), bool(conv[0])


@dataclass
class BatchLocalization:
    estimates: np.ndarray  # (n, 2)
    delta_m: np.ndarray  # (n,)
    range_estimates: np.ndarray  # (n, 3)
    converged: np.ndarray  # (n,)
    clamped: np.ndarray  # (n,) any link range hit 0 or rho_max


def localize_batch(
    rss: np.ndarray,
    deployment: Deployment,
    power_range: TxPowerRange,
    adr_height: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    rho_max: float = DEFAULT_RHO_MAX_M,
) -> BatchLocalization:
    rss = np.atleast_2d(np.asarray(rss, dtype=float))
    if rss.shape[1] != 3:
        raise ValueError(f"expected RSS rows of three links, got shape {rss.shape}")
    h = deployment.altitude_h
    ranges = invert_rss_to_ground_range(
        rss, power_range.assumed_c_dbm, h, adr_height, env, budget, rho_max
    )
    delta = np.asarray(
        uncertainty_radius_m(rss, power_range, h, adr_height, env, budget, rho_max)
    )
    est, conv = trilaterate_batch(ranges, deployment.ground_vertices(), 1e-6 * deployment.side_l)
    clamped = np.any((ranges <= 0.0) | (ranges >= rho_max), axis=1)
    return BatchLocalization(est, delta.max(axis=1), ranges, conv, clamped)


def localize(
    rss_samples,
    deployment: Deployment,
    power_range: TxPowerRange,
    adr_height: float,
    env: EnvironmentParams,
    budget: LinkBudget,
    rho_max: float = DEFAULT_RHO_MAX_M,
) -> LocalizationResult:
    """Locate one ADr from the RSS seen at the three SDrs.

    Ranges use the assumed transmit power; ``delta_m`` is the largest
    per-link uncertainty radius over the power bounds.
    """
    rss = np.asarray(rss_samples, dtype=float)
    if rss.shape != (3,):
        raise ValueError(f"expected three RSS values, got {rss_samples}")
    b = localize_batch(rss[None, :], deployment, power_range, adr_height, env, budget, rho_max)
    return LocalizationResult(
        (float(b.estimates[0, 0]), float(b.estimates[0, 1])),
        float(b.delta_m[0]),
        tuple(float(v) for v in b.range_estimates[0]),
        bool(b.converged[0]),
    )
