"""Least-squares fit of the urban LoS-probability and path-loss-exponent constants.

The reference samples are the urban curves of LoS probability and path-loss
exponent against elevation angle, stored in ``data/urban_elevation_samples.csv``.
Run ``python -m dronesurv.fitting`` to print the fitted constants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.optimize import curve_fit

from .channel import EnvironmentParams, p_los, path_loss_exponent


def load_urban_samples() -> dict[str, np.ndarray]:
    text = resources.files("dronesurv").joinpath("data/urban_elevation_samples.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    return {k: np.array([float(r[k]) for r in rows]) for k in ("theta_deg", "p_los", "alpha")}


@dataclass
class FitResult:
    a0: float
    b0: float
    a1: float
    b1: float
    max_residual_p_los: float
    max_residual_alpha: float


def _sigmoid(theta, a0, b0):
    return 1.0 / (1.0 + a0 * np.exp(-b0 * theta))


def fit_urban_constants(samples: dict[str, np.ndarray] | None = None) -> FitResult:
    s = samples if samples is not None else load_urban_samples()
    theta = s["theta_deg"]
    (a0, b0), _ = curve_fit(_sigmoid, theta, s["p_los"], p0=(10.0, 0.1))
    # alpha is affine in the sampled LoS probability
    A = np.column_stack([-s["p_los"], np.ones_like(theta)])
    (a1, b1), *_ = np.linalg.lstsq(A, s["alpha"], rcond=None)
    env = EnvironmentParams(a0=a0, b0=b0, a1=a1, b1=b1)
    return FitResult(
        float(a0), float(b0), float(a1), float(b1),
        float(np.max(np.abs(p_los(theta, env) - s["p_los"]))),
        float(np.max(np.abs(path_loss_exponent(theta, env) - s["alpha"]))),
    )


def default_residuals(env: EnvironmentParams | None = None) -> tuple[float, float]:
    """Max absolute deviation of ``env`` (default urban) from the reference samples."""
    env = env or EnvironmentParams()
    s = load_urban_samples()
    return (
        float(np.max(np.abs(p_los(s["theta_deg"], env) - s["p_los"]))),
        float(np.max(np.abs(path_loss_exponent(s["theta_deg"], env) - s["alpha"]))),
    )


if __name__ == "__main__":
    r = fit_urban_constants()
    print(f"a0={r.a0:.6g} b0={r.b0:.6g} a1={r.a1:.6g} b1={r.b1:.6g}")
    print(f"max residual: p_los={r.max_residual_p_los:.3e} alpha={r.max_residual_alpha:.3e}")
    print("shipped defaults residual (p_los, alpha):", default_residuals())
