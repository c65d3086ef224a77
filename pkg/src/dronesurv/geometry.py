"""Node positions, link geometry and the equilateral SDr deployment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Default ADr height above ground (worst case, nearly ground level).
DEFAULT_ADR_HEIGHT_M = 2.0


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite coordinate in {self!r}")
        if self.z < 0:
            raise ValueError(f"altitude must be >= 0, got z={self.z}")

    def ground(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Deployment:
    """Three SDrs at the vertices of an equilateral triangle, all at one altitude."""

    center: tuple[float, float]
    side_l: float
    altitude_h: float
    vertices: tuple[Position3D, Position3D, Position3D]

    @property
    def circumradius(self) -> float:
        return self.side_l / math.sqrt(3.0)

    def ground_vertices(self) -> np.ndarray:
        """Vertex ground projections as a (3, 2) array."""
        return np.array([[v.x, v.y] for v in self.vertices], dtype=float)


def link_distance(a: Position3D, b: Position3D) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def ground_range(a: Position3D, b: Position3D) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def elevation_angle_from_offsets(dz, rho):
    """Elevation angle in degrees for height offset ``dz`` and ground range ``rho``.

    Works elementwise on arrays. The result is clamped to [0, 90]; ``rho == 0``
    maps to 90.
    """
    theta = np.degrees(np.arctan2(dz, rho))
    theta = np.clip(theta, 0.0, 90.0)
    if np.ndim(theta) == 0:
        return float(theta)
    return theta


def elevation_angle_deg(sdr: Position3D, gnd: Position3D) -> float:
    """Angle of ``sdr`` above the horizontal plane of ``gnd``, in degrees."""
    dz = sdr.z - gnd.z
    if dz <= 0:
        raise ValueError(
            f"SDr must be above the ground node (sdr.z={sdr.z}, gnd.z={gnd.z})"
        )
    return elevation_angle_from_offsets(dz, ground_range(sdr, gnd))


def equilateral_deployment(
    center: tuple[float, float], side_l: float, altitude_h: float
) -> Deployment:
    """Place three SDrs on an equilateral triangle centred on ``center``.

    The first vertex sits due east of the centre; the others follow
    counter-clockwise at 120 degree steps.
    """
    if not side_l > 0:
        raise ValueError(f"side_l must be > 0, got {side_l}")
    if not altitude_h > 0:
        raise ValueError(f"altitude_h must be > 0, got {altitude_h}")
    cx, cy = float(center[0]), float(center[1])
    r = side_l / math.sqrt(3.0)
    verts = []
    for k in range(3):
        phi = 2.0 * math.pi * k / 3.0
        verts.append(Position3D(cx + r * math.cos(phi), cy + r * math.sin(phi), altitude_h))
    return Deployment((cx, cy), float(side_l), float(altitude_h), tuple(verts))
