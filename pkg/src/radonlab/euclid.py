"""Plane geometry primitives: lines, reflections, rigid motions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"non-finite point {p!r}")
    return q


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def reflection_matrix(angle: float) -> np.ndarray:
    """Matrix of the reflection across the origin line with direction `angle`."""
    c, s = math.cos(2.0 * angle), math.sin(2.0 * angle)
    return np.array([[c, s], [s, -c]])


@dataclass(frozen=True)
class Line2D:
    """Infinite line through `point` with direction angle `angle` (radians)."""

    point: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        p = as_point(self.point)
        object.__setattr__(self, "point", (float(p[0]), float(p[1])))
        if not math.isfinite(self.angle):
            raise ValueError("line angle must be finite")

    @classmethod
    def through(cls, p, q) -> "Line2D":
        p, q = as_point(p), as_point(q)
        d = q - p
        n = math.hypot(d[0], d[1])
        if n == 0.0:
            raise ValueError("coincident points do not define a line")
        return cls((p[0], p[1]), math.atan2(d[1], d[0]))

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.angle), math.cos(self.angle)])

    def point_at(self, t) -> np.ndarray:
        return as_point(self.point) + np.multiply.outer(np.asarray(t, dtype=float), self.direction)

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        rel = pts - as_point(self.point)
        return rel @ self.normal

    def reflect(self, pts) -> np.ndarray:
        """Mirror image of `pts` (shape (..., 2)) across the line."""
        pts = np.asarray(pts, dtype=float)
        d = self.signed_distance(pts)
        return pts - 2.0 * d[..., None] * self.normal


@dataclass(frozen=True)
class RigidMotion2D:
    """Rotation by `angle` about the origin followed by a translation."""

    angle: float = 0.0
    shift: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        t = as_point(self.shift)
        object.__setattr__(self, "shift", (float(t[0]), float(t[1])))
        if not math.isfinite(self.angle):
            raise ValueError("rotation angle must be finite")

    @classmethod
    def identity(cls) -> "RigidMotion2D":
        return cls()

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.angle)

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.matrix.T + as_point(self.shift)

    def inverse(self) -> "RigidMotion2D":
        r = rotation_matrix(-self.angle)
        t = -(r @ as_point(self.shift))
        return RigidMotion2D(-self.angle, (t[0], t[1]))

    def apply_line(self, line: Line2D) -> Line2D:
        p = self.apply(as_point(line.point))
        return Line2D((p[0], p[1]), line.angle + self.angle)
