"""Empirical injectivity verdicts: operator spectra, kernel counts, reconstruction.

A center set is judged at desk scale by the singular spectrum of its
discretized transform: a clean spectral gap under the relative threshold
separates "no near-kernel" geometries from those with one, and the
near-kernel dimension is compared against exact symmetry counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupportError, SizeCapError
from .euclid import Line2D, RigidMotion2D
from .fields import Grid2D, ScalarField2D
from .geometry import CenterSet, ConvexHull2D, hull_of_support, line_intersects_hull
from .radon import (DEFAULT_NODE_CAP, OperatorMatrix, RadiusGrid, Sinogram,
                    build_operator_matrix, forward_sinogram)

KERNEL_THRESHOLD = 1e-6
GAP_MIN = 1e3

INJECTIVE = "INJECTIVE-AT-SCALE"
NON_INJECTIVE = "NON-INJECTIVE-AT-SCALE"
INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class SpectrumReport:
    singular_values: np.ndarray = field(repr=False)
    threshold: float
    near_kernel_count: int
    sigma_ratio: float          # sigma_min / sigma_max
    gap: float                  # cluster separation across the threshold
    description: str = ""
    verdict: str | None = None

    def __post_init__(self):
        s = np.array(self.singular_values, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "singular_values", s)


@dataclass
class ReconstructionReport:
    iterations: int
    residual_history: np.ndarray     # ||A x_k - g||, nonincreasing for CGLS
    gradient_history: np.ndarray     # ||A^T (A x_k - g)||, used for stopping
    data_residual: float             # final ||A x - g|| / ||g||
    error_vs_truth: float = math.nan
    error_vs_even: float = math.nan


def singular_spectrum(A, kernel_threshold: float = KERNEL_THRESHOLD,
                      node_cap: int = DEFAULT_NODE_CAP,
                      description: str = "") -> SpectrumReport:
    """Full SVD spectrum with the near-kernel count at a relative threshold.

    The near-kernel count is #{sigma < threshold * sigma_max}. `gap`
    measures how cleanly the spectrum splits at the threshold: the ratio of
    the smallest retained value to the largest discarded one (or to the
    threshold itself when nothing is discarded).
    """
    matrix = A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A, dtype=float)
    if matrix.shape[1] > node_cap:
        raise SizeCapError(f"{matrix.shape[1]} columns exceed the SVD cap {node_cap}")
    s = np.linalg.svd(matrix, compute_uv=False)
    smax = float(s[0]) if len(s) else 0.0
    cut = kernel_threshold * smax
    count = int(np.sum(s < cut))
    if smax == 0.0:
        gap = 0.0
    elif count == 0:
        gap = float(s[-1]) / cut
    elif count == len(s):
        gap = math.inf
    else:
        gap = float(s[len(s) - count - 1]) / max(float(s[len(s) - count]), 1e-300)
    return SpectrumReport(
        singular_values=s,
        threshold=kernel_threshold,
        near_kernel_count=count,
        sigma_ratio=float(s[-1]) / smax if smax > 0 else 0.0,
        gap=gap,
        description=description,
    )


def injectivity_verdict(centers: CenterSet, window: Grid2D, radii: RadiusGrid,
                        n_theta: int = 64,
                        kernel_threshold: float = KERNEL_THRESHOLD,
                        gap_min: float = GAP_MIN,
                        node_cap: int = DEFAULT_NODE_CAP) -> SpectrumReport:
    """Spectrum of the discretized transform, tagged with an injectivity verdict.

    INJECTIVE-AT-SCALE / NON-INJECTIVE-AT-SCALE require the spectral gap at
    the threshold to exceed `gap_min`; a blurred spectrum is INDETERMINATE
    rather than forced into a verdict.
    """
    op = build_operator_matrix(window, centers, radii, n_theta, node_cap=node_cap)
    rep = singular_spectrum(op, kernel_threshold, node_cap,
                            description=f"{centers.describe()}; window "
                                        f"{window.nx}x{window.ny} h={window.h:g}")
    if rep.gap < gap_min:
        verdict = INDETERMINATE
    elif rep.near_kernel_count == 0:
        verdict = INJECTIVE
    else:
        verdict = NON_INJECTIVE
    return SpectrumReport(rep.singular_values, rep.threshold, rep.near_kernel_count,
                          rep.sigma_ratio, rep.gap, rep.description, verdict)


def near_kernel_basis(A: OperatorMatrix | np.ndarray,
                      kernel_threshold: float = KERNEL_THRESHOLD) -> np.ndarray:
    """Right singular vectors of the near-kernel, as columns."""
    matrix = A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A, dtype=float)
    _, s, vt = np.linalg.svd(matrix, full_matrices=True)
    cut = kernel_threshold * (s[0] if len(s) else 0.0)
    keep = np.concatenate([s < cut, np.ones(vt.shape[0] - len(s), dtype=bool)])
    return vt[keep].T


def reconstruct_cg(g: Sinogram | np.ndarray, op: OperatorMatrix,
                   max_iter: int = 2000, tol: float = 1e-10,
                   x_true: np.ndarray | None = None,
                   x_even: np.ndarray | None = None
                   ) -> tuple[ScalarField2D, ReconstructionReport]:
    """Conjugate gradient on the normal equations A^T A x = A^T g from x = 0.

    Starting from zero keeps every iterate in the row space of A, so the
    limit is the minimum-norm least-squares solution; components along the
    near-kernel are never introduced.

    Each step minimizes the data misfit ||A x - g|| over the grown Krylov
    space, so that history is nonincreasing; the normal-equation gradient
    ||A^T (A x - g)|| oscillates in general and is only the stopping signal.
    """
    if isinstance(g, Sinogram):
        b = g.values.ravel()
    else:
        b = np.asarray(g, dtype=float).ravel()
    if b.size != op.matrix.shape[0]:
        raise ValueError(f"data length {b.size} does not match operator rows "
                         f"{op.matrix.shape[0]}")
    A = op.matrix
    x = np.zeros(A.shape[1])
    r = b.copy()
    s = A.T @ r
    p = s.copy()
    gamma = float(s @ s)
    grad_hist = [math.sqrt(gamma)]
    res_hist = [float(np.linalg.norm(r))]
    norm0 = grad_hist[0]
    it = 0
    while it < max_iter and grad_hist[-1] > tol * norm0 and gamma > 0.0:
        q = A @ p
        qq = float(q @ q)
        if qq == 0.0:
            break
        alpha = gamma / qq
        x += alpha * p
        r -= alpha * q
        s = A.T @ r
        gamma_new = float(s @ s)
        grad_hist.append(math.sqrt(gamma_new))
        res_hist.append(float(np.linalg.norm(r)))
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
        it += 1
    bn = float(np.linalg.norm(b))
    report = ReconstructionReport(
        iterations=it,
        residual_history=np.array(res_hist),
        gradient_history=np.array(grad_hist),
        data_residual=res_hist[-1] / bn if bn > 0 else 0.0,
    )
    if x_true is not None:
        xt = np.asarray(x_true, dtype=float).ravel()
        report.error_vs_truth = float(np.linalg.norm(x - xt) / np.linalg.norm(xt))
    if x_even is not None:
        xe = np.asarray(x_even, dtype=float).ravel()
        report.error_vs_even = float(np.linalg.norm(x - xe) / np.linalg.norm(xe))
    field = ScalarField2D(op.window, x.reshape(op.window.nx, op.window.ny))
    return field, report


def node_permutation(grid: Grid2D, transform, tol: float = 1e-9) -> np.ndarray:
    """Permutation of flattened grid nodes induced by an isometry.

    `transform` maps (n, 2) points to (n, 2) points and must carry the node
    set onto itself within `tol`; raises ValueError otherwise.
    """
    nodes = grid.nodes().reshape(-1, 2)
    images = np.asarray(transform(nodes), dtype=float)
    fi = (images[:, 0] - grid.ox) / grid.h
    fj = (images[:, 1] - grid.oy) / grid.h
    ii = np.rint(fi).astype(np.int64)
    jj = np.rint(fj).astype(np.int64)
    ok = ((np.abs(fi - ii) <= tol / grid.h) & (np.abs(fj - jj) <= tol / grid.h)
          & (ii >= 0) & (ii < grid.nx) & (jj >= 0) & (jj < grid.ny))
    if not np.all(ok):
        raise ValueError("transform does not map the node set onto itself")
    perm = ii * grid.ny + jj
    if len(np.unique(perm)) != len(perm):
        raise ValueError("transform is not a node permutation")
    return perm


def odd_subspace_dimension(grid: Grid2D, line: Line2D) -> int:
    """Dimension of nodal vectors antisymmetric under the mirror across `line`.

    Character count for the order-2 group: (n - #fixed nodes) / 2. The grid
    node set must be mirror-symmetric about the line.
    """
    perm = node_permutation(grid, line.reflect)
    fixed = int(np.sum(perm == np.arange(len(perm))))
    return (len(perm) - fixed) // 2


def sign_isotypic_dimension(grid: Grid2D, n_lines: int,
                            motion: RigidMotion2D = RigidMotion2D()) -> int:
    """Multiplicity of the determinant character in the node permutation
    representation of the dihedral group of `n_lines` mirror lines.

    Computed by the character formula (1/|G|) * sum_g sign(g) * #fix(g);
    this is the exact dimension of nodal vectors odd across every line.
    """
    from .fields import _dihedral_elements
    inv = motion.inverse()
    total = 0.0
    n = grid.nx * grid.ny
    for mat, sign in _dihedral_elements(n_lines):
        def transform(pts, mat=mat):
            return motion.apply(inv.apply(pts) @ mat.T)
        perm = node_permutation(grid, transform)
        total += sign * int(np.sum(perm == np.arange(n)))
    dim = total / (2 * n_lines)
    if abs(dim - round(dim)) > 1e-9:
        raise ValueError(f"non-integer isotypic dimension {dim}")
    return int(round(dim))


@dataclass
class TangentCheck:
    param: float
    base_point: tuple[float, float]
    clearance: float
    intersects: bool


@dataclass
class TangentReport:
    verdict: str                      # CONSISTENT or NECESSARY-CONDITION-VIOLATED
    checks: list[TangentCheck]
    hull: ConvexHull2D
    worst_clearance: float
    skipped_singular: int


def tangent_criterion(centers: CenterSet, f: ScalarField2D, tau: float = 1e-8,
                      clearance_tol: float = 1e-9) -> TangentReport:
    """Test whether every sampled tangent line meets the support hull.

    A tangent line strictly missing the hull is incompatible with the
    transform annihilating f (unless f = 0), so the report flags
    NECESSARY-CONDITION-VIOLATED; otherwise CONSISTENT. Non-smooth
    parameters are skipped.
    """
    from .errors import SingularPointError
    hull = hull_of_support(f, tau)
    checks: list[TangentCheck] = []
    skipped = 0
    worst = -math.inf
    for sparam in centers.params:
        try:
            tl = centers.tangent_at(float(sparam))
        except SingularPointError:
            skipped += 1
            continue
        hit, clear = line_intersects_hull(tl, hull)
        checks.append(TangentCheck(float(sparam), tl.point, clear, hit))
        worst = max(worst, clear)
    if not checks:
        raise EmptySupportError("no smooth tangent available on this center set")
    verdict = "NECESSARY-CONDITION-VIOLATED" if worst > clearance_tol else "CONSISTENT"
    return TangentReport(verdict, checks, hull, worst, skipped)
