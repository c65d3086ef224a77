"""Elevation-angle dependent ground-to-air channel.

LoS probability is a sigmoid in the elevation angle, the path-loss exponent
falls linearly with it, and the shadowing spread mixes LoS and NLoS log-normal
components weighted by the LoS probability. All angles are in degrees.

The array-level helpers (``*_from_offsets``) take ground range ``rho`` and
height offset ``dz`` and broadcast over numpy arrays; the ``Position3D``
functions are thin wrappers for single links.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import Position3D, elevation_angle_deg, elevation_angle_from_offsets, ground_range

SPEED_OF_LIGHT = 299_792_458.0


def free_space_ref_loss_db(frequency_hz: float, d0_m: float = 1.0) -> float:
    return 20.0 * math.log10(4.0 * math.pi * d0_m * frequency_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class EnvironmentParams:
    """Propagation constants; defaults describe a dense urban environment."""

    a0: float = 43.93
    b0: float = 0.1581
    a1: float = 1.0
    b1: float = 3.0
    sigma_los_a: float = 10.39
    sigma_los_b: float = 0.05
    sigma_nlos_a: float = 29.6
    sigma_nlos_b: float = 0.03
    k_rice_0: float = 0.0
    k_rice_90: float = 15.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"environment.{name} must be finite, got {value}")
        if self.a0 <= 0:
            raise ValueError(f"environment.a0 must be > 0, got {self.a0}")
        if self.b0 <= 0:
            raise ValueError(f"environment.b0 must be > 0, got {self.b0}")
        if self.a1 < 0:
            raise ValueError(f"environment.a1 must be >= 0, got {self.a1}")
        for name in ("sigma_los_a", "sigma_los_b", "sigma_nlos_a", "sigma_nlos_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"environment.{name} must be >= 0")
        # a1 >= 0 makes alpha smallest at 90 deg; alpha >= 1 keeps RSS monotone in range
        alpha_min = self.b1 - self.a1 / (1.0 + self.a0 * math.exp(-self.b0 * 90.0))
        if alpha_min < 1.0:
            raise ValueError(
                f"environment: path-loss exponent drops to {alpha_min:.4f} < 1 on [0, 90] deg"
            )


@dataclass(frozen=True)
class LinkBudget:
    """Link-budget constants. ``ref_loss_db`` defaults to free space at 1 m."""

    frequency: float = 2.4e9
    ref_loss_db: Optional[float] = None
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    noise_dbm: float = -110.0
    snr_threshold_db: float = 0.0
    # detection margin in units of the shadowing spread
    margin_sigmas: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"budget.frequency must be > 0, got {self.frequency}")
        if self.ref_loss_db is None:
            object.__setattr__(self, "ref_loss_db", free_space_ref_loss_db(self.frequency))
        if not self.ref_loss_db > 0:
            raise ValueError(f"budget.ref_loss_db must be > 0, got {self.ref_loss_db}")
        if self.margin_sigmas < 0:
            raise ValueError("budget.margin_sigmas must be >= 0")


def _check_theta(theta_deg):
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0.0) or np.any(theta > 90.0):
        raise ValueError(f"elevation angle must lie in [0, 90] deg, got {theta_deg}")
    return theta


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def p_los(theta_deg, env: EnvironmentParams):
    theta = _check_theta(theta_deg)
    return _out(1.0 / (1.0 + env.a0 * np.exp(-env.b0 * theta)))


def path_loss_exponent(theta_deg, env: EnvironmentParams):
    return _out(-env.a1 * np.asarray(p_los(theta_deg, env)) + env.b1)


def shadowing_sigma_db(theta_deg, env: EnvironmentParams):
    theta = _check_theta(theta_deg)
    p = 1.0 / (1.0 + env.a0 * np.exp(-env.b0 * theta))
    s_los = env.sigma_los_a * np.exp(-env.sigma_los_b * theta)
    s_nlos = env.sigma_nlos_a * np.exp(-env.sigma_nlos_b * theta)
    return _out(np.sqrt((p * s_los) ** 2 + ((1.0 - p) * s_nlos) ** 2))


KLaw = Callable[[np.ndarray, EnvironmentParams], np.ndarray]


def linear_k_law(theta: np.ndarray, env: EnvironmentParams) -> np.ndarray:
    return env.k_rice_0 + (env.k_rice_90 - env.k_rice_0) * theta / 90.0


def rician_k_db(theta_deg, env: EnvironmentParams, law: KLaw = linear_k_law):
    """Rician K-factor in dB. ``law`` maps angle arrays to dB; linear by default."""
    theta = _check_theta(theta_deg)
    return _out(law(theta, env))


def mean_path_loss_db(distance_m, theta_deg, env: EnvironmentParams, budget: LinkBudget):
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d >= 1.0)):
        raise ValueError(f"distance must be >= 1 m (reference distance), got {distance_m}")
    alpha = np.asarray(path_loss_exponent(theta_deg, env))
    return _out(budget.ref_loss_db + 10.0 * alpha * np.log10(d))


def mean_path_loss_from_offsets(rho, dz, env: EnvironmentParams, budget: LinkBudget):
    """Mean path loss for ground range ``rho`` and height offset ``dz > 0``."""
    rho = np.asarray(rho, dtype=float)
    d = np.hypot(rho, dz)
    theta = elevation_angle_from_offsets(dz, rho)
    return mean_path_loss_db(d, theta, env, budget)


def mean_rss_from_offsets(p_tx_dbm, rho, dz, env: EnvironmentParams, budget: LinkBudget):
    pl = np.asarray(mean_path_loss_from_offsets(rho, dz, env, budget))
    return _out(np.asarray(p_tx_dbm) + budget.tx_gain_db + budget.rx_gain_db - pl)


def mean_rss_dbm(
    p_tx_dbm: float,
    sdr: Position3D,
    adr: Position3D,
    env: EnvironmentParams,
    budget: LinkBudget,
) -> float:
    elevation_angle_deg(sdr, adr)  # geometry check only
    return mean_rss_from_offsets(p_tx_dbm, ground_range(sdr, adr), sdr.z - adr.z, env, budget)


def rician_power_db(k_db, x, y):
    """Unit-mean Rician power gain in dB from two standard normal draws."""
    k = 10.0 ** (np.asarray(k_db, dtype=float) / 10.0)
    scatter = np.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = np.sqrt(k / (k + 1.0)) + scatter * np.asarray(x)
    im = scatter * np.asarray(y)
    return _out(10.0 * np.log10(re * re + im * im))


def perturb_rss(mean_rss, sigma_db, z_shadow, k_db=None, fading_normals=None):
    """Add shadowing ``sigma_db * z_shadow`` and, optionally, Rician fading.

    ``fading_normals`` is a pair ``(x, y)`` of standard normal draws shaped
    like ``mean_rss``; fading is skipped when it is None.
    """
    rss = np.asarray(mean_rss, dtype=float) + np.asarray(sigma_db) * np.asarray(z_shadow)
    if fading_normals is not None:
        rss = rss + rician_power_db(k_db, fading_normals[0], fading_normals[1])
    return _out(rss)


def sample_rss_dbm(
    p_tx_dbm: float,
    sdr: Position3D,
    adr: Position3D,
    env: EnvironmentParams,
    budget: LinkBudget,
    fading_enabled: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """One noisy RSS draw: mean RSS plus log-normal shadowing (and Rician fading).

    Consumes exactly three standard normals from ``rng`` regardless of
    ``fading_enabled`` so that toggling fading leaves the shadowing draw intact.
    """
    if rng is None:
        rng = np.random.default_rng()
    theta = elevation_angle_deg(sdr, adr)
    mean = mean_rss_dbm(p_tx_dbm, sdr, adr, env, budget)
    z, x, y = rng.standard_normal(3)
    fading = (x, y) if fading_enabled else None
    return perturb_rss(mean, shadowing_sigma_db(theta, env), z, rician_k_db(theta, env), fading)
