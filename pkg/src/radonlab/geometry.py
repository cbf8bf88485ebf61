"""Center sets, their samplings, tangent lines, and convex-hull tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupportError, SingularPointError
from .euclid import Line2D, RigidMotion2D, as_point
from .fields import ScalarField2D

# A tangent line is just a line anchored at its base point.
TangentLine = Line2D


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to the segment [a, b]."""
    ab = b - a
    denom = float(ab @ ab)
    rel = pts - a
    if denom == 0.0:
        return np.hypot(rel[..., 0], rel[..., 1])
    t = np.clip((rel @ ab) / denom, 0.0, 1.0)
    proj = a + t[..., None] * ab
    d = pts - proj
    return np.hypot(d[..., 0], d[..., 1])


class CenterSet:
    """A set of circle centers: geometry description plus a discrete sampling.

    `points` (n, 2) lie on the described geometry; `params` holds the
    arc-length parameter of each sample along the set's parametrization.
    """

    kind = "abstract"

    def __init__(self, points: np.ndarray, params: np.ndarray, ds: float):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) == 0:
            raise ValueError("center samples must be a nonempty (n, 2) array")
        if not np.all(np.isfinite(points)):
            raise ValueError("center samples must be finite")
        points.setflags(write=False)
        params = np.asarray(params, dtype=float)
        params.setflags(write=False)
        self.points = points
        self.params = params
        self.ds = float(ds)

    def __len__(self) -> int:
        return len(self.points)

    def distance_to(self, pts) -> np.ndarray:
        """Exact distance from points to the geometric set (not its samples)."""
        raise NotImplementedError

    def tangent_at(self, s: float) -> TangentLine:
        raise NotImplementedError

    def alignment_angles(self) -> np.ndarray | None:
        """Per-sample quadrature alignment angle (local mirror direction).

        Line-like sets return the line direction at each sample so that
        circle quadrature nodes can be placed mirror-symmetrically about
        the set; others return None.
        """
        return None

    def describe(self) -> str:
        return f"{self.kind} ({len(self)} samples, ds={self.ds:g})"


class LineCenters(CenterSet):
    """Samples of a straight line truncated to |t| <= halfwidth."""

    kind = "line"

    def __init__(self, line: Line2D, halfwidth: float, ds: float):
        if ds <= 0:
            raise ValueError("sample spacing ds must be positive")
        if halfwidth <= 0:
            raise ValueError("truncation halfwidth must be positive")
        n = int(math.ceil(2.0 * halfwidth / ds)) + 1
        t = np.linspace(-halfwidth, halfwidth, n)
        super().__init__(line.point_at(t), t, ds)
        self.line = line
        self.halfwidth = float(halfwidth)

    def distance_to(self, pts):
        a = self.line.point_at(-self.halfwidth)
        b = self.line.point_at(self.halfwidth)
        return _segment_distance(np.asarray(pts, dtype=float), a, b)

    def tangent_at(self, s):
        p = self.line.point_at(float(s))
        return TangentLine((p[0], p[1]), self.line.angle)

    def alignment_angles(self):
        return np.full(len(self), self.line.angle)


class CircleCenters(CenterSet):
    """Uniform angular samples of a circle."""

    kind = "circle"

    def __init__(self, center, radius: float, count: int):
        if radius <= 0:
            raise ValueError("circle radius must be positive")
        if count < 1:
            raise ValueError("need at least one sample")
        c = as_point(center)
        theta = 2.0 * math.pi * np.arange(count) / count
        pts = np.stack([c[0] + radius * np.cos(theta), c[1] + radius * np.sin(theta)], axis=1)
        super().__init__(pts, radius * theta, 2.0 * math.pi * radius / count)
        self.center = (float(c[0]), float(c[1]))
        self.radius = float(radius)

    def distance_to(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        return np.abs(d - self.radius)

    def tangent_at(self, s):
        theta = float(s) / self.radius
        p = (self.center[0] + self.radius * math.cos(theta),
             self.center[1] + self.radius * math.sin(theta))
        return TangentLine(p, theta + 0.5 * math.pi)


class CrossCenters(CenterSet):
    """N concurrent mirror lines at equal angles pi/N, truncated to |t| <= halfwidth.

    Global parameter: line k occupies s in [k*2T, (k+1)*2T) with t = s - k*2T - T.
    The common point (t = 0 on every line) is a non-smooth point.
    """

    kind = "coxeter-cross"

    def __init__(self, n_lines: int, halfwidth: float, ds: float,
                 motion: RigidMotion2D = RigidMotion2D()):
        if n_lines < 1:
            raise ValueError("cross needs at least one line")
        if ds <= 0:
            raise ValueError("sample spacing ds must be positive")
        if halfwidth <= 0:
            raise ValueError("truncation halfwidth must be positive")
        self.n_lines = int(n_lines)
        self.halfwidth = float(halfwidth)
        self.motion = motion
        self.lines = [motion.apply_line(Line2D((0.0, 0.0), math.pi * k / n_lines))
                      for k in range(n_lines)]
        n = int(math.ceil(2.0 * halfwidth / ds)) + 1
        t = np.linspace(-halfwidth, halfwidth, n)
        pts, params, angles = [], [], []
        for k, line in enumerate(self.lines):
            pts.append(line.point_at(t))
            params.append(t + halfwidth + k * 2.0 * halfwidth)
            angles.append(np.full(n, line.angle))
        super().__init__(np.concatenate(pts), np.concatenate(params), ds)
        self._angles = np.concatenate(angles)

    def distance_to(self, pts):
        pts = np.asarray(pts, dtype=float)
        best = None
        for line in self.lines:
            a = line.point_at(-self.halfwidth)
            b = line.point_at(self.halfwidth)
            d = _segment_distance(pts, a, b)
            best = d if best is None else np.minimum(best, d)
        return best

    def tangent_at(self, s):
        span = 2.0 * self.halfwidth
        k = int(np.floor(float(s) / span))
        if not 0 <= k < self.n_lines:
            raise ValueError(f"parameter {s} outside [0, {self.n_lines * span})")
        t = float(s) - k * span - self.halfwidth
        if abs(t) <= 1e-9 * self.halfwidth:
            raise SingularPointError("cross is not smooth at its common point")
        p = self.lines[k].point_at(t)
        return TangentLine((p[0], p[1]), self.lines[k].angle)

    def alignment_angles(self):
        return self._angles


class PolylineCenters(CenterSet):
    """Piecewise-linear center set sampled uniformly in arc length."""

    kind = "polyline"

    def __init__(self, vertices, ds: float):
        if ds <= 0:
            raise ValueError("sample spacing ds must be positive")
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 2:
            raise ValueError("polyline needs at least two vertices")
        seg = np.diff(verts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len == 0):
            raise ValueError("polyline has a zero-length segment")
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        total = cum[-1]
        n = int(math.ceil(total / ds)) + 1
        s = np.linspace(0.0, total, n)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
        local = (s - cum[idx]) / seg_len[idx]
        pts = verts[idx] + local[:, None] * seg[idx]
        super().__init__(pts, s, ds)
        self.vertices = verts
        self._cum = cum
        self._seg = seg
        self._seg_len = seg_len

    def distance_to(self, pts):
        pts = np.asarray(pts, dtype=float)
        best = None
        for i in range(len(self._seg)):
            d = _segment_distance(pts, self.vertices[i], self.vertices[i + 1])
            best = d if best is None else np.minimum(best, d)
        return best

    def tangent_at(self, s):
        s = float(s)
        total = self._cum[-1]
        if not 0.0 <= s <= total:
            raise ValueError(f"parameter {s} outside [0, {total}]")
        tol = 1e-9 * max(total, 1.0)
        interior = self._cum[1:-1]
        if np.any(np.abs(interior - s) <= tol):
            raise SingularPointError("polyline is not smooth at a vertex")
        idx = int(np.clip(np.searchsorted(self._cum, s, side="right") - 1,
                          0, len(self._seg) - 1))
        local = (s - self._cum[idx]) / self._seg_len[idx]
        p = self.vertices[idx] + local * self._seg[idx]
        ang = math.atan2(self._seg[idx, 1], self._seg[idx, 0])
        return TangentLine((p[0], p[1]), ang)


class FinitePointCenters(CenterSet):
    """A finite set of centers; no smooth structure."""

    kind = "finite-points"

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ValueError("need a nonempty (n, 2) point array")
        super().__init__(pts, np.arange(len(pts), dtype=float), math.inf)

    def distance_to(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = pts[..., None, :] - self.points
        return np.min(np.hypot(d[..., 0], d[..., 1]), axis=-1)

    def tangent_at(self, s):
        raise SingularPointError("a finite point set has no tangent lines")


def build_center_set(description: dict) -> CenterSet:
    """Construct a CenterSet from a flat description dictionary.

    Recognized kinds: line, circle, coxeter-cross, polyline, finite-points.
    """
    desc = dict(description)
    kind = desc.pop("kind", None)
    if kind == "line":
        line = Line2D(tuple(desc.pop("point", (0.0, 0.0))), float(desc.pop("angle", 0.0)))
        return LineCenters(line, float(desc.pop("halfwidth")), float(desc.pop("ds")))
    if kind == "circle":
        return CircleCenters(tuple(desc.pop("center", (0.0, 0.0))),
                             float(desc.pop("radius")), int(desc.pop("count")))
    if kind == "coxeter-cross":
        motion = desc.pop("motion", RigidMotion2D())
        return CrossCenters(int(desc.pop("n_lines")), float(desc.pop("halfwidth")),
                            float(desc.pop("ds")), motion)
    if kind == "polyline":
        return PolylineCenters(desc.pop("points"), float(desc.pop("ds")))
    if kind == "finite-points":
        return FinitePointCenters(desc.pop("points"))
    raise ValueError(f"unknown center-set kind {kind!r}")


def tangent_at(centers: CenterSet, s: float) -> TangentLine:
    """Tangent line of the center set at arc-length parameter s."""
    return centers.tangent_at(s)


@dataclass(frozen=True)
class ConvexHull2D:
    """Convex hull with counterclockwise vertices; may degenerate to 1-2 points."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) == 0:
            raise ValueError("hull vertices must be a nonempty (m, 2) array")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def of_points(cls, points) -> "ConvexHull2D":
        """Monotone-chain hull; collinear interior points are dropped."""
        pts = np.unique(np.asarray(points, dtype=float), axis=0)
        if len(pts) == 1:
            return cls(pts)
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        pts = pts[order]

        def chain(seq):
            out = []
            for p in seq:
                while len(out) >= 2:
                    o, a = out[-2], out[-1]
                    if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                        out.pop()
                    else:
                        break
                out.append(p)
            return out

        lower = chain(pts)
        upper = chain(pts[::-1])
        verts = np.array(lower[:-1] + upper[:-1])
        if len(verts) == 0:  # all points collinear: keep the two extremes
            verts = np.array([pts[0], pts[-1]])
        return cls(verts)

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = as_point(point)
        v = self.vertices
        if len(v) == 1:
            return bool(np.hypot(*(p - v[0])) <= tol)
        if len(v) == 2:
            return bool(_segment_distance(p[None], v[0], v[1])[0] <= tol)
        a = v
        b = np.roll(v, -1, axis=0)
        cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
        return bool(np.all(cross >= -tol))


def hull_of_support(f: ScalarField2D, tau: float = 1e-8) -> ConvexHull2D:
    """Convex hull of the grid nodes where |f| >= tau * max|f|."""
    if f.max_abs() == 0.0:
        raise EmptySupportError("field is identically zero; support is empty")
    mask = f.support_mask(tau)
    if not np.any(mask):
        raise EmptySupportError(f"no node reaches the {tau:g} relative threshold")
    nodes = f.grid.nodes()[mask]
    return ConvexHull2D.of_points(nodes)


def line_intersects_hull(line: Line2D, hull: ConvexHull2D) -> tuple[bool, float]:
    """Does the infinite line meet the hull?

    Returns (intersects, clearance): clearance is the distance from the
    line to the hull when disjoint, and minus the penetration depth when
    they meet.
    """
    offs = line.signed_distance(hull.vertices)
    lo, hi = float(np.min(offs)), float(np.max(offs))
    if lo > 0.0:
        return (False, lo)
    if hi < 0.0:
        return (False, -hi)
    return (True, -min(hi, -lo))
