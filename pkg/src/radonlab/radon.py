"""Circular Radon transform: quadrature, sinograms, and the discretized operator.

Two evaluation tiers coexist. Grid-sampled fields are read through bilinear
interpolation (zero outside the grid) and carry O(h^2) error; analytic
phantoms are evaluated exactly at the quadrature nodes, which lets mirror
symmetries cancel to machine precision.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeCapError
from .fields import Grid2D, Phantom, ScalarField2D, bilinear_sample
from .geometry import CenterSet

DEFAULT_NODE_CAP = 1200


@dataclass(frozen=True)
class RadiusGrid:
    """Uniform radius sampling r_min..r_max with `count` points."""

    r_min: float
    r_max: float
    count: int

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise ValueError(f"need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if self.count < 2:
            raise ValueError("need at least two radii")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.count)

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.count - 1)


@dataclass(frozen=True)
class Sinogram:
    """Transform values over (center sample, radius); rows follow the center set."""

    centers: CenterSet
    radii: RadiusGrid
    values: np.ndarray = field(repr=False)
    normalization: str = "surface"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.centers), self.radii.count):
            raise ValueError(f"sinogram shape {v.shape} != "
                             f"({len(self.centers)}, {self.radii.count})")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        if self.normalization not in ("surface", "mean"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_mean(self) -> "Sinogram":
        """Divide surface integrals by the circumference 2*pi*r.

        Only valid when r_min > 0: the r = 0 mean is the point value f(p),
        which a surface sinogram (identically 0 at r = 0) does not carry.
        """
        if self.normalization == "mean":
            return self
        if self.radii.r_min <= 0.0:
            raise ValueError("cannot convert surface->mean with r = 0 in the grid")
        return Sinogram(self.centers, self.radii,
                        self.values / (2.0 * math.pi * self.radii.values), "mean")

    def to_surface(self) -> "Sinogram":
        if self.normalization == "surface":
            return self
        return Sinogram(self.centers, self.radii,
                        self.values * (2.0 * math.pi * self.radii.values), "surface")


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of the transform restricted to a reconstruction window.

    Row (i, j) <-> (center i, radius j), flattened as i * radii.count + j.
    Column k <-> window node (ix, iy) with k = ix * window.ny + iy, matching
    C-order flattening of field values.
    """

    matrix: np.ndarray = field(repr=False)
    window: Grid2D
    centers: CenterSet
    radii: RadiusGrid
    n_theta: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        expected = (len(self.centers) * self.radii.count, self.window.nx * self.window.ny)
        if m.shape != expected:
            raise ValueError(f"matrix shape {m.shape} != {expected}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, f) -> np.ndarray:
        """A @ x for a field on the window (or its flattened coefficients)."""
        if isinstance(f, ScalarField2D):
            if f.grid != self.window:
                raise ValueError("field grid does not match the operator window")
            x = f.values.ravel()
        else:
            x = np.asarray(f, dtype=float).ravel()
            if x.size != self.matrix.shape[1]:
                raise ValueError("coefficient length does not match the window")
        return self.matrix @ x

    def apply_transpose(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float).ravel()
        if g.size != self.matrix.shape[0]:
            raise ValueError("data length does not match the operator rows")
        return self.matrix.T @ g


def circle_nodes(center, r: float, n_theta: int, theta0: float = 0.0) -> np.ndarray:
    """Quadrature nodes on the circle |y - center| = r, shape (n_theta, 2).

    Nodes sit at angles theta0 + 2*pi*k/n_theta. With even n_theta the node
    set is symmetric under the reflection across the line through `center`
    at angle theta0, which is what makes mirror-odd integrands cancel.
    """
    theta = theta0 + 2.0 * math.pi * np.arange(n_theta) / n_theta
    cx, cy = float(center[0]), float(center[1])
    return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=-1)


def _check_n_theta(n_theta: int):
    if n_theta < 8 or n_theta % 2 != 0:
        raise ValueError(f"n_theta must be even and >= 8, got {n_theta}")


def _evaluate(f, pts: np.ndarray) -> np.ndarray:
    if isinstance(f, Phantom):
        return f(pts)
    if isinstance(f, ScalarField2D):
        return f.interp(pts)
    raise TypeError(f"cannot evaluate {type(f).__name__} on points")


def radon_point(f, p, r: float, n_theta: int = 64, theta0: float = 0.0) -> float:
    """Trapezoidal surface integral of f over the circle |y - p| = r.

    f may be a ScalarField2D (bilinear, zero outside its grid) or a Phantom
    (analytic). r = 0 returns 0: the surface integral over a degenerate
    circle vanishes.
    """
    _check_n_theta(n_theta)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0.0:
        return 0.0
    vals = _evaluate(f, circle_nodes(p, r, n_theta, theta0))
    return float(2.0 * math.pi * r / n_theta * np.sum(vals))


def _sinogram_rows(f, centers_pts: np.ndarray, angles: np.ndarray | None,
                   radii: RadiusGrid, n_theta: int, normalization: str) -> np.ndarray:
    """Rows of the sinogram for the given center samples."""
    rs = radii.values
    out = np.empty((len(centers_pts), radii.count))
    base = 2.0 * math.pi * np.arange(n_theta) / n_theta
    for i, p in enumerate(centers_pts):
        theta = base if angles is None else angles[i] + base
        cs, sn = np.cos(theta), np.sin(theta)
        pts = np.empty((radii.count, n_theta, 2))
        pts[..., 0] = p[0] + rs[:, None] * cs
        pts[..., 1] = p[1] + rs[:, None] * sn
        vals = _evaluate(f, pts)
        row = (2.0 * math.pi / n_theta) * rs * vals.sum(axis=1)
        if normalization == "mean":
            with np.errstate(invalid="ignore", divide="ignore"):
                row = np.where(rs > 0.0, row / (2.0 * math.pi * rs), 0.0)
            if rs[0] == 0.0:
                row[0] = float(_evaluate(f, p[None, :])[0])
        out[i] = row
    return out


def _row_task(args):
    f, pts, angles, radii, n_theta, normalization = args
    return _sinogram_rows(f, pts, angles, radii, n_theta, normalization)


def forward_sinogram(f, centers: CenterSet, radii: RadiusGrid, n_theta: int = 64,
                     normalization: str = "surface", workers: int = 1,
                     align_quadrature: bool = True) -> Sinogram:
    """Transform values over every (center sample, radius) pair.

    With align_quadrature, line-like center sets rotate each row's node set
    to start along the local line direction, making the nodes mirror-
    symmetric about the set; combined with analytic phantom evaluation this
    pushes odd-function cancellation to machine precision.

    Rows are independent; `workers` > 1 computes them in a process pool with
    results identical to the sequential path.
    """
    _check_n_theta(n_theta)
    if normalization not in ("surface", "mean"):
        raise ValueError(f"unknown normalization {normalization!r}")
    angles = centers.alignment_angles() if align_quadrature else None
    if workers <= 1 or len(centers) < 2 * workers:
        values = _sinogram_rows(f, centers.points, angles, radii, n_theta, normalization)
    else:
        chunks = np.array_split(np.arange(len(centers)), workers)
        tasks = [(f, centers.points[c], None if angles is None else angles[c],
                  radii, n_theta, normalization) for c in chunks if len(c)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_row_task, tasks))
        values = np.concatenate(parts, axis=0)
    return Sinogram(centers, radii, values, normalization)


def build_operator_matrix(window: Grid2D, centers: CenterSet, radii: RadiusGrid,
                          n_theta: int = 64, node_cap: int = DEFAULT_NODE_CAP,
                          align_quadrature: bool = True) -> OperatorMatrix:
    """Dense matrix whose column k is the sinogram of the k-th bilinear hat.

    Built row-wise by scattering quadrature weights onto the window nodes,
    which reproduces forward_sinogram of any field in the bilinear span of
    the window to rounding (same nodes, same weights). Surface normalization.
    """
    _check_n_theta(n_theta)
    n_nodes = window.nx * window.ny
    if n_nodes > node_cap:
        raise SizeCapError(
            f"window has {n_nodes} nodes, above the dense-operator cap "
            f"{node_cap}; pass node_cap={n_nodes} to override")
    angles = centers.alignment_angles() if align_quadrature else None
    rs = radii.values
    m = radii.count
    A = np.zeros((len(centers) * m, n_nodes))
    base = 2.0 * math.pi * np.arange(n_theta) / n_theta
    nx, ny, h = window.nx, window.ny, window.h
    for i, p in enumerate(centers.points):
        theta = base if angles is None else angles[i] + base
        cs, sn = np.cos(theta), np.sin(theta)
        x = p[0] + rs[:, None] * cs
        y = p[1] + rs[:, None] * sn
        fx = (x - window.ox) / h
        fy = (y - window.oy) / h
        inside = (fx >= 0) & (fx <= nx - 1) & (fy >= 0) & (fy <= ny - 1)
        i0 = np.clip(np.floor(fx).astype(np.int64), 0, nx - 2)
        j0 = np.clip(np.floor(fy).astype(np.int64), 0, ny - 2)
        dx = np.clip(fx - i0, 0.0, 1.0)
        dy = np.clip(fy - j0, 0.0, 1.0)
        w = (2.0 * math.pi / n_theta) * rs[:, None] * inside
        rows = np.broadcast_to((i * m + np.arange(m))[:, None], (m, n_theta))
        cols = i0 * ny + j0
        np.add.at(A, (rows, cols), w * (1 - dx) * (1 - dy))
        np.add.at(A, (rows, cols + ny), w * dx * (1 - dy))
        np.add.at(A, (rows, cols + 1), w * (1 - dx) * dy)
        np.add.at(A, (rows, cols + ny + 1), w * dx * dy)
    return OperatorMatrix(A, window, centers, radii, n_theta)


def adjoint_apply(g: Sinogram, op: OperatorMatrix) -> ScalarField2D:
    """Exact transpose action of the discretized operator on sinogram data."""
    if g.values.shape != (len(op.centers), op.radii.count):
        raise ValueError(f"sinogram shape {g.values.shape} does not match "
                         f"operator rows ({len(op.centers)}, {op.radii.count})")
    out = op.apply_transpose(g.values.ravel())
    return ScalarField2D(op.window, out.reshape(op.window.nx, op.window.ny))


def radius_window(f, centers: CenterSet, count: int, r_min: float = 0.0) -> RadiusGrid:
    """Default radius grid: r_max = diameter of (support union centers).

    Circles larger than that diameter cannot meet the support, so nothing
    informative lies beyond it.
    """
    if isinstance(f, Phantom):
        cx, cy, r = f.support_disk()
        sup = np.array([[cx - r, cy - r], [cx + r, cy + r]])
    else:
        mask = f.support_mask()
        if not np.any(mask):
            sup = np.zeros((1, 2))
        else:
            sup = f.grid.nodes()[mask]
    pts = np.concatenate([sup, centers.points])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    r_max = float(np.hypot(*(hi - lo)))
    return RadiusGrid(r_min, max(r_max, r_min + 1e-6), count)
