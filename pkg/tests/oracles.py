"""Independent reference computations used by the test-suite.

Nothing here calls into the solver paths it is used to check.
"""

import math

import numpy as np
from scipy.optimize import minimize


def cost(points, ranges, anchors):
    points = np.atleast_2d(points)
    d = np.sqrt(((points[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2))
    return ((d - ranges) ** 2).sum(axis=1)


def _grid(x0, x1, y0, y1, step):
    xs = np.arange(math.floor(x0 / step) * step, x1 + step, step)
    ys = np.arange(math.floor(y0 / step) * step, y1 + step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def brute_force_trilateration(ranges, anchors, coarse=10.0, fine=1.0, keep=40):
    """Global minimiser of the range least-squares cost by exhaustive search.

    A coarse grid covers a box that provably holds the minimiser (every
    residual is bounded by the root cost at the anchor centroid). The best
    coarse cells are re-searched on a ``fine`` grid and the best few fine
    points polished with Nelder-Mead.

    Returns ``(point, cost, unique)`` where ``unique`` is False if a second
    basin more than 5 m away reaches nearly the same cost.
    """
    ranges = np.asarray(ranges, float)
    anchors = np.asarray(anchors, float)
    c = anchors.mean(axis=0)
    s = math.sqrt(cost(c, ranges, anchors)[0])
    lo = np.max(anchors - (ranges + s)[:, None], axis=0)
    hi = np.min(anchors + (ranges + s)[:, None], axis=0)
    pts = _grid(lo[0], hi[0], lo[1], hi[1], coarse)
    f = cost(pts, ranges, anchors)
    order = np.argsort(f)[:keep]
    fine_pts = np.concatenate(
        [_grid(p[0] - coarse, p[0] + coarse, p[1] - coarse, p[1] + coarse, fine) for p in pts[order]]
    )
    ff = cost(fine_pts, ranges, anchors)
    seeds = []
    for i in np.argsort(ff):
        if all(np.linalg.norm(fine_pts[i] - q) > 5 * coarse for q in seeds):
            seeds.append(fine_pts[i])
        if len(seeds) == 4:
            break
    polished = []
    for x0 in seeds:
        res = minimize(
            lambda q: cost(q, ranges, anchors)[0],
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 2000},
        )
        polished.append((float(res.fun), res.x))
    polished.sort(key=lambda t: t[0])
    best_f, best_x = polished[0]
    unique = all(
        np.linalg.norm(x - best_x) < 5.0 or fv > best_f * (1 + 1e-3) + 1e-6
        for fv, x in polished[1:]
    )
    return best_x, best_f, unique


# Hand-written link budget, kept separate from dronesurv.channel on purpose.
C0 = 299_792_458.0


def ref_loss(freq=2.4e9):
    return 20 * math.log10(4 * math.pi * freq / C0)


def hand_rss(p_tx, rho, dz, a0=43.93, b0=0.1581, a1=1.0, b1=3.0, freq=2.4e9, noise=None):
    theta = math.degrees(math.atan2(dz, rho))
    plos = 1 / (1 + a0 * math.exp(-b0 * theta))
    alpha = b1 - a1 * plos
    d = math.hypot(rho, dz)
    return p_tx - ref_loss(freq) - 10 * alpha * math.log10(d)


def hand_ground_range(rss, p_tx, dz, rho_max=10_000.0):
    """Root of hand_rss(rho) = rss by Brent's method, clamped to [0, rho_max]."""
    from scipy.optimize import brentq

    if rss >= hand_rss(p_tx, 0.0, dz):
        return 0.0
    if rss <= hand_rss(p_tx, rho_max, dz):
        return rho_max
    return brentq(lambda r: hand_rss(p_tx, r, dz) - rss, 0.0, rho_max, xtol=1e-10)
