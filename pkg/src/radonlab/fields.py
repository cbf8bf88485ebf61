"""Scalar fields on uniform grids, analytic phantoms, and mirror-odd witnesses.

Fields follow a compact-support convention: a field is identically zero
outside its grid rectangle, and phantoms must fit inside the grid with
their full support disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .euclid import Line2D, RigidMotion2D, as_point, reflection_matrix, rotation_matrix
from .errors import SupportError

# Gaussian bumps are truncated at this many standard deviations; the tail
# there is exp(-36) ~ 2e-16, far below the 1e-12 support tolerance.
GAUSSIAN_CUTOFF_SIGMAS = 6.0


@dataclass(frozen=True)
class Grid2D:
    """Uniform axis-aligned grid: node (i, j) sits at (ox + i*h, oy + j*h)."""

    ox: float
    oy: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")

    @classmethod
    def centered(cls, halfwidth: float, h: float, center=(0.0, 0.0),
                 halfheight: float | None = None) -> "Grid2D":
        """Grid symmetric about `center` with a node exactly at the center."""
        cx, cy = as_point(center)
        if halfheight is None:
            halfheight = halfwidth
        kx = max(1, int(math.ceil(halfwidth / h - 1e-12)))
        ky = max(1, int(math.ceil(halfheight / h - 1e-12)))
        return cls(cx - kx * h, cy - ky * h, h, 2 * kx + 1, 2 * ky + 1)

    @property
    def xs(self) -> np.ndarray:
        return self.ox + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.oy + self.h * np.arange(self.ny)

    @property
    def rect(self) -> tuple[float, float, float, float]:
        """(x0, x1, y0, y1) bounds of the covered rectangle."""
        return (self.ox, self.ox + self.h * (self.nx - 1),
                self.oy, self.oy + self.h * (self.ny - 1))

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (nx, ny, 2)."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def contains_disk(self, center, radius: float) -> bool:
        cx, cy = as_point(center)
        x0, x1, y0, y1 = self.rect
        return (cx - radius >= x0 - 1e-12 and cx + radius <= x1 + 1e-12 and
                cy - radius >= y0 - 1e-12 and cy + radius <= y1 + 1e-12)


def bilinear_sample(grid: Grid2D, values: np.ndarray, pts) -> np.ndarray:
    """Bilinear interpolation of nodal `values` at `pts`; zero outside the grid."""
    pts = np.asarray(pts, dtype=float)
    fx = (pts[..., 0] - grid.ox) / grid.h
    fy = (pts[..., 1] - grid.oy) / grid.h
    inside = (fx >= 0) & (fx <= grid.nx - 1) & (fy >= 0) & (fy <= grid.ny - 1)
    i0 = np.clip(np.floor(fx).astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fy).astype(np.int64), 0, grid.ny - 2)
    dx = np.clip(fx - i0, 0.0, 1.0)
    dy = np.clip(fy - j0, 0.0, 1.0)
    v00 = values[i0, j0]
    v10 = values[i0 + 1, j0]
    v01 = values[i0, j0 + 1]
    v11 = values[i0 + 1, j0 + 1]
    out = (v00 * (1 - dx) * (1 - dy) + v10 * dx * (1 - dy)
           + v01 * (1 - dx) * dy + v11 * dx * dy)
    return np.where(inside, out, 0.0)


@dataclass(frozen=True)
class ScalarField2D:
    """Immutable sampled field; zero outside the grid rectangle by convention."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"values shape {v.shape} != grid shape "
                             f"({self.grid.nx}, {self.grid.ny})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def interp(self, pts) -> np.ndarray:
        return bilinear_sample(self.grid, self.values, pts)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def support_mask(self, tau: float = 1e-8) -> np.ndarray:
        """Nodes with |value| >= tau * max|value| (all-False for a zero field)."""
        m = self.max_abs()
        if m == 0.0:
            return np.zeros_like(self.values, dtype=bool)
        return np.abs(self.values) >= tau * m

    def __add__(self, other: "ScalarField2D") -> "ScalarField2D":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return ScalarField2D(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField2D") -> "ScalarField2D":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return ScalarField2D(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "ScalarField2D":
        return ScalarField2D(self.grid, self.values * float(a))

    __rmul__ = __mul__


class Phantom:
    """Analytic compactly supported test function.

    Subclasses implement pointwise evaluation and report a bounding disk
    outside of which the function vanishes (to 1e-12 of its amplitude).
    """

    def evaluate(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def support_disk(self) -> tuple[float, float, float]:
        """(cx, cy, radius) disk containing the support."""
        raise NotImplementedError

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.evaluate(pts[..., 0], pts[..., 1])


@dataclass(frozen=True)
class GaussianBump(Phantom):
    """amplitude * exp(-|x - center|^2 / sigma^2), truncated at 6 sigma."""

    center: tuple[float, float]
    sigma: float
    amplitude: float = 1.0

    def __post_init__(self):
        c = as_point(self.center)
        object.__setattr__(self, "center", (float(c[0]), float(c[1])))
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive")

    def evaluate(self, x, y):
        d2 = (np.asarray(x, dtype=float) - self.center[0]) ** 2 \
            + (np.asarray(y, dtype=float) - self.center[1]) ** 2
        cut2 = (GAUSSIAN_CUTOFF_SIGMAS * self.sigma) ** 2
        return np.where(d2 <= cut2, self.amplitude * np.exp(-d2 / self.sigma ** 2), 0.0)

    def support_disk(self):
        return (*self.center, GAUSSIAN_CUTOFF_SIGMAS * self.sigma)


@dataclass(frozen=True)
class SmoothedDisk(Phantom):
    """Disk indicator with a quintic smoothstep edge of width `edge_width`.

    Equals `amplitude` for distances <= radius - edge_width and 0 beyond
    `radius`, so circles well inside see an exactly constant integrand.
    """

    center: tuple[float, float]
    radius: float
    edge_width: float
    amplitude: float = 1.0

    def __post_init__(self):
        c = as_point(self.center)
        object.__setattr__(self, "center", (float(c[0]), float(c[1])))
        if not (0 < self.edge_width <= self.radius):
            raise ValueError("need 0 < edge_width <= radius")

    def evaluate(self, x, y):
        d = np.hypot(np.asarray(x, dtype=float) - self.center[0],
                     np.asarray(y, dtype=float) - self.center[1])
        s = np.clip((self.radius - d) / self.edge_width, 0.0, 1.0)
        return self.amplitude * s * s * s * (10.0 + s * (-15.0 + 6.0 * s))

    def support_disk(self):
        return (*self.center, self.radius)


@dataclass(frozen=True)
class BumpSum(Phantom):
    """Pointwise sum of component phantoms."""

    parts: tuple[Phantom, ...]

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("empty bump sum")

    def evaluate(self, x, y):
        out = self.parts[0].evaluate(x, y)
        for p in self.parts[1:]:
            out = out + p.evaluate(x, y)
        return out

    def support_disk(self):
        disks = [p.support_disk() for p in self.parts]
        cx = sum(d[0] for d in disks) / len(disks)
        cy = sum(d[1] for d in disks) / len(disks)
        r = max(math.hypot(d[0] - cx, d[1] - cy) + d[2] for d in disks)
        return (cx, cy, r)


def _dihedral_elements(n_lines: int) -> list[tuple[np.ndarray, float]]:
    """(matrix, sign) pairs of the reflection group of n_lines mirror lines.

    The group contains the rotations by 2*pi*m/N (sign +1) and the
    reflections across the lines at angles pi*k/N (sign -1); order 2N.
    The set is closed under inversion, so it can stand in for the set of
    inverse actions in orbit sums.
    """
    elems = []
    for m in range(n_lines):
        elems.append((rotation_matrix(2.0 * math.pi * m / n_lines), 1.0))
    for k in range(n_lines):
        elems.append((reflection_matrix(math.pi * k / n_lines), -1.0))
    return elems


@dataclass(frozen=True)
class CoxeterOddPhantom(Phantom):
    """Signed dihedral-orbit sum of a base bump: odd across every mirror line.

    The N mirror lines pass through a common point at equal angles pi/N;
    `motion` carries the whole system (lines and bumps) by a rigid motion.
    The base bump must sit strictly inside one open sector so the signed
    copies do not overlap.
    """

    base: Phantom
    n_lines: int
    motion: RigidMotion2D = RigidMotion2D()

    def __post_init__(self):
        if self.n_lines < 1:
            raise ValueError("need at least one mirror line")
        cx, cy, r = self.base.support_disk()
        dmin = min(abs(-cx * math.sin(a) + cy * math.cos(a))
                   for a in self._line_angles())
        if dmin <= r:
            raise ValueError(
                f"base bump (support radius {r:g}) overlaps a mirror line "
                f"(distance {dmin:g}); it must sit strictly inside one sector")

    def _line_angles(self) -> list[float]:
        return [math.pi * k / self.n_lines for k in range(self.n_lines)]

    def group(self) -> list[tuple[np.ndarray, float]]:
        return _dihedral_elements(self.n_lines)

    def mirror_lines(self) -> list[Line2D]:
        """The mirror lines after the rigid motion."""
        return [self.motion.apply_line(Line2D((0.0, 0.0), a)) for a in self._line_angles()]

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inv = self.motion.inverse()
        pts = np.stack([x, y], axis=-1)
        q = inv.apply(pts)
        out = np.zeros(np.broadcast(x, y).shape)
        for mat, sign in _dihedral_elements(self.n_lines):
            # group is closed under inversion, so summing base(g q) over all
            # g equals summing base(g^{-1} q)
            gq = q @ mat.T
            out = out + sign * self.base.evaluate(gq[..., 0], gq[..., 1])
        return out

    def support_disk(self):
        cx, cy, r = self.base.support_disk()
        center = self.motion.apply(np.zeros(2))
        return (float(center[0]), float(center[1]), math.hypot(cx, cy) + r)


def sample_phantom(p: Phantom, g: Grid2D) -> ScalarField2D:
    """Evaluate a phantom at the grid nodes.

    Rejects phantoms whose support disk pokes outside the grid rectangle:
    the zero-outside convention would silently chop them.
    """
    cx, cy, r = p.support_disk()
    if not g.contains_disk((cx, cy), r):
        raise SupportError(
            f"phantom support disk (center ({cx:g},{cy:g}), radius {r:g}) "
            f"exceeds the grid rectangle {g.rect}")
    gx, gy = np.meshgrid(g.xs, g.ys, indexing="ij")
    return ScalarField2D(g, p.evaluate(gx, gy))


def reflect_field(f: ScalarField2D, line: Line2D) -> ScalarField2D:
    """f composed with the reflection across `line`, resampled bilinearly."""
    pts = line.reflect(f.grid.nodes())
    return ScalarField2D(f.grid, f.interp(pts))


def even_part(f: ScalarField2D, line: Line2D) -> ScalarField2D:
    """Projection onto functions symmetric across `line`: (f + f o rho)/2."""
    return ScalarField2D(f.grid, 0.5 * (f.values + reflect_field(f, line).values))


def odd_part(f: ScalarField2D, line: Line2D) -> ScalarField2D:
    """Projection onto functions antisymmetric across `line`: (f - f o rho)/2."""
    return ScalarField2D(f.grid, 0.5 * (f.values - reflect_field(f, line).values))


def make_coxeter_odd(base: Phantom, n_lines: int, grid: Grid2D,
                     motion: RigidMotion2D = RigidMotion2D()) -> ScalarField2D:
    """Sample the signed dihedral-orbit sum of `base` on `grid`.

    The analytic object is available as CoxeterOddPhantom, which quadrature
    paths should prefer: its evaluation carries the mirror antisymmetry to
    machine precision, with no interpolation error.
    """
    return sample_phantom(CoxeterOddPhantom(base, n_lines, motion), grid)
