"""Obstacle shortest-path metrics, component labeling, and distance checkers.

The complement of a center set S splits into connected components. Distances
that avoid S (or stay inside one component) are computed by Dijkstra on a
16-neighbor lattice graph (axis, diagonal and knight moves), whose metric
overestimates Euclidean lengths by at most ~2.8%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .fields import Grid2D, ScalarField2D
from .geometry import CenterSet

OBSTACLE = 0
# worst-case relative overestimate of the 16-neighbor lattice metric
LATTICE_OVERESTIMATE = 0.0279


@dataclass(frozen=True)
class ComponentLabeling:
    """Per-node component ids: OBSTACLE (= 0) within h/2 of S, else 1..m."""

    grid: Grid2D
    labels: np.ndarray = field(repr=False)
    n_components: int

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int32)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def component_of(self, point) -> int:
        """Label of the nearest non-obstacle node."""
        idx = _nearest_free_node(self, point)
        return int(self.labels[idx])


@dataclass(frozen=True)
class DistanceField:
    """Shortest-path distance from a source to every node; +inf if unreachable."""

    source: tuple[float, float]
    grid: Grid2D
    values: np.ndarray = field(repr=False)
    metric: str = "d_S"            # "euclidean" | "d_S" | "interior"
    component: int | None = None   # set for the interior variant

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class MetricBall:
    source: tuple[float, float]
    radius: float
    mask: np.ndarray = field(repr=False)


def label_components(grid: Grid2D, centers: CenterSet) -> ComponentLabeling:
    """Rasterize S as the nodes within h/2 of it and label the rest by 4-connected
    flood fill. Uses the exact geometric distance to S, so the barrier has no
    sampling gaps."""
    d = centers.distance_to(grid.nodes())
    obstacle = d <= grid.h / 2.0
    if np.all(obstacle):
        raise ValueError("every grid node lies on the obstacle")
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    labels, n = ndimage.label(~obstacle, structure=four)
    return ComponentLabeling(grid, labels, int(n))


def _nearest_free_node(labeling: ComponentLabeling, point) -> tuple[int, int]:
    g = labeling.grid
    px, py = float(point[0]), float(point[1])
    i = int(np.clip(round((px - g.ox) / g.h), 0, g.nx - 1))
    j = int(np.clip(round((py - g.oy) / g.h), 0, g.ny - 1))
    if labeling.labels[i, j] != OBSTACLE:
        return (i, j)
    free = np.argwhere(labeling.labels != OBSTACLE)
    nx_, ny_ = free[:, 0], free[:, 1]
    d2 = (g.ox + nx_ * g.h - px) ** 2 + (g.oy + ny_ * g.h - py) ** 2
    k = int(np.argmin(d2))
    return (int(nx_[k]), int(ny_[k]))


# moves of the 16-neighbor stencil with their obstacle-crossing checks:
# a diagonal is blocked when both flanking nodes are obstacle (it would
# slip through a one-node-thick diagonal wall); a knight move is blocked
# when either node adjacent to its midpoint is obstacle.
_AXIS = [(1, 0), (0, 1)]
_DIAG = [(1, 1), (1, -1)]
_KNIGHT = [(2, 1), (2, -1), (1, 2), (1, -2)]


def _edge_arrays(allowed: np.ndarray, obstacle: np.ndarray, h: float):
    """Undirected 16-neighbor edges between allowed nodes, with crossing checks."""
    nx, ny = allowed.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, wts = [], [], []

    def window(arr, dx, dy, ox=0, oy=0):
        # arr sampled at (i+ox, j+oy) over the start nodes valid for move (dx, dy)
        lo_x, hi_x = max(-dx, 0), nx - max(dx, 0)
        lo_y, hi_y = max(-dy, 0), ny - max(dy, 0)
        return arr[lo_x + ox:hi_x + ox, lo_y + oy:hi_y + oy]

    def add(dx, dy, blocked=None):
        ok = window(allowed, dx, dy) & window(allowed, dx, dy, dx, dy)
        if blocked is not None:
            ok = ok & ~blocked
        rows.append(window(idx, dx, dy)[ok])
        cols.append(window(idx, dx, dy, dx, dy)[ok])
        wts.append(np.full(int(ok.sum()), h * math.hypot(dx, dy)))

    for dx, dy in _AXIS:
        add(dx, dy)
    for dx, dy in _DIAG:
        blocked = window(obstacle, dx, dy, dx, 0) & window(obstacle, dx, dy, 0, dy)
        add(dx, dy, blocked)
    for dx, dy in _KNIGHT:
        if abs(dx) == 2:
            m1, m2 = (dx // 2, 0), (dx // 2, dy)
        else:
            m1, m2 = (0, dy // 2), (dx, dy // 2)
        blocked = window(obstacle, dx, dy, *m1) | window(obstacle, dx, dy, *m2)
        add(dx, dy, blocked)

    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(wts))


def obstacle_distance(source, labeling: ComponentLabeling,
                      restrict: int | None = None) -> DistanceField:
    """Shortest-path distances from `source` avoiding the obstacle.

    With `restrict`, paths must stay inside that component (the interior
    metric of the component); otherwise any non-obstacle node may be used.
    The source is snapped to the nearest admissible node; a source on the
    obstacle is an error.
    """
    g = labeling.grid
    px, py = float(source[0]), float(source[1])
    i = int(round((px - g.ox) / g.h))
    j = int(round((py - g.oy) / g.h))
    if not (0 <= i < g.nx and 0 <= j < g.ny):
        raise ValueError(f"source {source} outside the grid")
    if labeling.labels[i, j] == OBSTACLE:
        raise ValueError(f"source {source} lies on the obstacle")
    if restrict is not None:
        if not 1 <= restrict <= labeling.n_components:
            raise ValueError(f"no component {restrict}")
        if labeling.labels[i, j] != restrict:
            raise ValueError(f"source {source} is not in component {restrict}")
        allowed = labeling.labels == restrict
        metric = "interior"
    else:
        allowed = labeling.labels != OBSTACLE
        metric = "d_S"
    obstacle = labeling.labels == OBSTACLE
    rows, cols, wts = _edge_arrays(allowed, obstacle, g.h)
    n = g.nx * g.ny
    graph = sparse.coo_matrix((wts, (rows, cols)), shape=(n, n)).tocsr()
    dist = _csgraph_dijkstra(graph, directed=False, indices=i * g.ny + j)
    return DistanceField((px, py), g, dist.reshape(g.nx, g.ny), metric, restrict)


def euclidean_distance_field(source, grid: Grid2D) -> DistanceField:
    nodes = grid.nodes()
    px, py = float(source[0]), float(source[1])
    d = np.hypot(nodes[..., 0] - px, nodes[..., 1] - py)
    return DistanceField((px, py), grid, d, "euclidean", None)


def dist_to_set(df: DistanceField, mask: np.ndarray) -> float:
    """Minimum of the distance field over a node mask; +inf for an empty mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != df.values.shape:
        raise ValueError("mask shape does not match the distance field")
    if not np.any(mask):
        return math.inf
    return float(np.min(df.values[mask]))


def metric_ball(df: DistanceField, r: float) -> MetricBall:
    """Nodes strictly closer than r to the source in the field's metric."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return MetricBall(df.source, float(r), df.values < r)


def halves_tolerance(d: float, h: float) -> float:
    """Distance-equality tolerance: 3% of the value plus two grid cells."""
    return 0.03 * d + 2.0 * h


@dataclass
class ComponentDistances:
    component: int
    euclidean: float           # straight-line distance to supp f in this component
    interior: float            # in-component path distance (nan if not evaluated)
    equality_ok: bool | None   # euclidean == interior within tolerance


@dataclass
class HalvesReport:
    point: tuple[float, float]
    on_obstacle: bool
    adjacent_components: list[int]
    rows: list[ComponentDistances]
    dist_support: float        # Euclidean distance to the whole support
    inequality_ok: bool        # per-component equality + cross bounds
    equality_ok: bool | None   # all adjacent components agree (points on S)
    empty_support: bool
    note: str = ""

    @property
    def necessary_condition_ok(self) -> bool:
        if self.empty_support:
            return True
        if self.on_obstacle and self.equality_ok is not None:
            return self.inequality_ok and self.equality_ok
        return self.inequality_ok


def _adjacent_components(labeling: ComponentLabeling, point) -> dict[int, tuple[int, int]]:
    """Components within ~1.5 cells of the point, with the nearest node in each."""
    g = labeling.grid
    px, py = float(point[0]), float(point[1])
    i = int(np.clip(round((px - g.ox) / g.h), 0, g.nx - 1))
    j = int(np.clip(round((py - g.oy) / g.h), 0, g.ny - 1))
    found: dict[int, tuple[float, tuple[int, int]]] = {}
    for radius in (2, 4, 8):
        i0, i1 = max(i - radius, 0), min(i + radius + 1, g.nx)
        j0, j1 = max(j - radius, 0), min(j + radius + 1, g.ny)
        for ii in range(i0, i1):
            for jj in range(j0, j1):
                lab = int(labeling.labels[ii, jj])
                if lab == OBSTACLE:
                    continue
                d = math.hypot(g.ox + ii * g.h - px, g.oy + jj * g.h - py)
                if lab not in found or d < found[lab][0]:
                    found[lab] = (d, (ii, jj))
        if found:
            break
    return {lab: node for lab, (d, node) in sorted(found.items())}


def check_halves(f: ScalarField2D, centers: CenterSet, x,
                 tau: float = 1e-8,
                 labeling: ComponentLabeling | None = None) -> HalvesReport:
    """Compare straight-line and in-component distances from x to the support.

    For x in the closure of a component H_j, a function annihilated by the
    transform over S must satisfy dist(x, supp f in H_j) = interior distance,
    bounded by the straight-line distance to the support in any other
    component; for x on S all those numbers coincide. Violations flag the
    pair (f, S) as impossible for a vanishing transform.
    """
    if labeling is None:
        labeling = label_components(f.grid, centers)
    g = labeling.grid
    h = g.h
    px, py = float(x[0]), float(x[1])
    on_obstacle = bool(centers.distance_to(np.array([[px, py]]))[0] <= h / 2.0)
    supp = f.support_mask(tau)
    empty = not bool(np.any(supp))
    nodes = g.nodes()

    adj = _adjacent_components(labeling, (px, py))
    if not adj:
        raise ValueError("no free node near the evaluation point")

    rows: list[ComponentDistances] = []
    eucl_all = math.inf
    if not empty:
        sp = nodes[supp]
        eucl_all = float(np.min(np.hypot(sp[:, 0] - px, sp[:, 1] - py)))

    comps = range(1, labeling.n_components + 1)
    for comp in comps:
        comp_mask = (labeling.labels == comp) & supp
        if np.any(comp_mask):
            cp = nodes[comp_mask]
            eucl = float(np.min(np.hypot(cp[:, 0] - px, cp[:, 1] - py)))
        else:
            eucl = math.inf
        if comp in adj:
            src_node = adj[comp]
            src = (g.ox + src_node[0] * h, g.oy + src_node[1] * h)
            df = obstacle_distance(src, labeling, restrict=comp)
            interior = dist_to_set(df, comp_mask)
            if math.isinf(eucl) and math.isinf(interior):
                eq = True
            elif math.isinf(eucl) or math.isinf(interior):
                eq = False
            else:
                eq = abs(interior - eucl) <= halves_tolerance(eucl, h)
        else:
            interior = math.nan
            eq = None
        rows.append(ComponentDistances(comp, eucl, interior, eq))

    # for every component whose closure holds x: its own support distance
    # must match the interior metric and be minimal among all components
    ineq_ok = True
    for r in rows:
        if r.component not in adj:
            continue
        if r.equality_ok is False:
            ineq_ok = False
        for other in rows:
            if other.component == r.component or math.isinf(other.euclidean):
                continue
            if r.euclidean > other.euclidean + halves_tolerance(other.euclidean, h):
                ineq_ok = False
    equality_ok: bool | None = None
    if on_obstacle and not empty:
        vals = []
        for r in rows:
            if r.component in adj:
                vals.extend([r.euclidean, r.interior])
        finite = [v for v in vals if not math.isnan(v)]
        if any(math.isinf(v) for v in finite):
            equality_ok = False
        else:
            tol = halves_tolerance(eucl_all, h)
            equality_ok = all(abs(v - eucl_all) <= tol for v in finite)
    note = "" if not empty else "support empty at this threshold"
    return HalvesReport((px, py), on_obstacle, list(adj.keys()), rows, eucl_all,
                        ineq_ok, equality_ok, empty, note)


@dataclass
class PieceReport:
    point: tuple[float, float]
    avoiding_distance: float   # shortest path to supp f avoiding S
    euclidean_distance: float
    equality_ok: bool
    empty_support: bool

    @property
    def necessary_condition_ok(self) -> bool:
        return self.empty_support or self.equality_ok


def check_piece(f: ScalarField2D, centers: CenterSet, p,
                tau: float = 1e-8,
                labeling: ComponentLabeling | None = None) -> PieceReport:
    """Compare the S-avoiding and straight-line distances from p to the support.

    Equality (within 3% + 2h) is necessary for the transform over S to
    annihilate f; an obstacle standing between p and all of the support
    (e.g. a circle enclosing it) shows up as avoiding distance > Euclidean.
    """
    if labeling is None:
        labeling = label_components(f.grid, centers)
    px, py = float(p[0]), float(p[1])
    if bool(centers.distance_to(np.array([[px, py]]))[0] <= labeling.grid.h / 2.0):
        raise ValueError("evaluation point lies on the center set")
    supp = f.support_mask(tau)
    if not np.any(supp):
        return PieceReport((px, py), math.inf, math.inf, True, True)
    nodes = labeling.grid.nodes()
    sp = nodes[supp]
    eucl = float(np.min(np.hypot(sp[:, 0] - px, sp[:, 1] - py)))
    df = obstacle_distance((px, py), labeling, restrict=None)
    d_avoid = dist_to_set(df, supp)
    if math.isinf(d_avoid):
        ok = False
    else:
        ok = abs(d_avoid - eucl) <= halves_tolerance(eucl, labeling.grid.h)
    return PieceReport((px, py), d_avoid, eucl, ok, False)
