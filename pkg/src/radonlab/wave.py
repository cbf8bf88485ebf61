"""Free-space wave equation: leapfrog FDTD and the spherical-mean solution formula.

The solver integrates u_tt = Laplacian(u) with u(0) = 0, u_t(0) = f on a
domain enlarged enough that, by finite speed of propagation, no wave can
reach the boundary within the simulated time; boundaries then need no
special treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, CflError
from .fields import GaussianBump, Grid2D, Phantom, ScalarField2D, sample_phantom
from .geometry import CenterSet
from .radon import RadiusGrid, forward_sinogram

DEFAULT_CFL = 0.5
# Margin (in cells) beyond the strict finite-speed requirement.
BOUNDARY_PAD_CELLS = 4


@dataclass(frozen=True)
class WaveState:
    """Leapfrog pair (u at time t, u at time t - dt) on the computational grid."""

    grid: Grid2D
    u: np.ndarray = field(repr=False)
    u_prev: np.ndarray = field(repr=False)
    t: float = 0.0
    dt: float = 0.0

    def __post_init__(self):
        limit = self.grid.h / math.sqrt(2.0)
        if self.dt <= 0 or self.dt > limit + 1e-15:
            raise CflError(f"dt={self.dt:g} violates the stability bound "
                           f"h/sqrt(2) = {limit:g}")
        for name in ("u", "u_prev"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (self.grid.nx, self.grid.ny):
                raise ValueError(f"{name} shape {a.shape} does not match the grid")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("wave state must be finite")

    @classmethod
    def initial(cls, f: ScalarField2D, dt: float) -> "WaveState":
        """State at t = 0 with u = 0 and discrete velocity exactly f."""
        z = np.zeros_like(f.values)
        return cls(f.grid, z, -dt * f.values, 0.0, dt)


@dataclass(frozen=True)
class ProbeTrace:
    """Time series of the solution at fixed probe points."""

    probes: np.ndarray = field(repr=False)   # (k, 2)
    times: np.ndarray = field(repr=False)    # (nt,)
    values: np.ndarray = field(repr=False)   # (nt, k)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("probe times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("probe values must be finite")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class WaveResult:
    trace: ProbeTrace
    energies: np.ndarray | None = None       # sampled discrete energy
    energy_times: np.ndarray | None = None
    snapshots: list[tuple[float, ScalarField2D]] = field(default_factory=list)
    final_state: WaveState | None = None
    global_max: float = 0.0                  # max |u| over domain and time


def _laplacian(u: np.ndarray, h: float) -> np.ndarray:
    lap = np.zeros_like(u)
    lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2]
                       - 4.0 * u[1:-1, 1:-1]) / (h * h)
    return lap


def total_energy(state: WaveState) -> float:
    """Discrete energy 0.5 * sum h^2 (u_t^2 + |grad u|^2).

    u_t is the leapfrog midpoint difference (u - u_prev)/dt; the gradient is
    centered on the current level. For the t = 0 state built by
    WaveState.initial this evaluates to 0.5 * h^2 * ||f||^2 exactly.
    """
    h = state.grid.h
    ut = (state.u - state.u_prev) / state.dt
    gx, gy = np.gradient(state.u, h)
    return float(0.5 * h * h * np.sum(ut * ut + gx * gx + gy * gy))


def _build_domain(f: ScalarField2D, probes: np.ndarray, duration: float) -> Grid2D:
    """Enlarge the field grid so support and probes sit > duration from the boundary."""
    h = f.grid.h
    x0, x1, y0, y1 = f.grid.rect
    if len(probes):
        x0 = min(x0, float(np.min(probes[:, 0])))
        x1 = max(x1, float(np.max(probes[:, 0])))
        y0 = min(y0, float(np.min(probes[:, 1])))
        y1 = max(y1, float(np.max(probes[:, 1])))
    pad = duration + BOUNDARY_PAD_CELLS * h
    # keep the node lattice of f.grid so the field embeds without resampling
    kx0 = int(math.ceil((f.grid.ox - (x0 - pad)) / h))
    kx1 = int(math.ceil(((x1 + pad) - (f.grid.ox + (f.grid.nx - 1) * h)) / h))
    ky0 = int(math.ceil((f.grid.oy - (y0 - pad)) / h))
    ky1 = int(math.ceil(((y1 + pad) - (f.grid.oy + (f.grid.ny - 1) * h)) / h))
    kx0, kx1, ky0, ky1 = (max(k, 0) for k in (kx0, kx1, ky0, ky1))
    return Grid2D(f.grid.ox - kx0 * h, f.grid.oy - ky0 * h, h,
                  f.grid.nx + kx0 + kx1, f.grid.ny + ky0 + ky1)


def _probe_weights(grid: Grid2D, probes: np.ndarray):
    fx = (probes[:, 0] - grid.ox) / grid.h
    fy = (probes[:, 1] - grid.oy) / grid.h
    if np.any(fx < 0) or np.any(fx > grid.nx - 1) or np.any(fy < 0) or np.any(fy > grid.ny - 1):
        raise ValueError("probe outside the computational domain")
    i0 = np.clip(np.floor(fx).astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fy).astype(np.int64), 0, grid.ny - 2)
    dx = fx - i0
    dy = fy - j0
    w = np.stack([(1 - dx) * (1 - dy), dx * (1 - dy), (1 - dx) * dy, dx * dy])
    return i0, j0, w


def fdtd_solve(f: ScalarField2D, duration: float, probes,
               cfl: float = DEFAULT_CFL, snapshot_stride: int = 0,
               energy_stride: int = 0, domain: Grid2D | None = None) -> WaveResult:
    """Leapfrog solution of u_tt = Lap u, u(0) = 0, u_t(0) = f.

    Parameters
    ----------
    f : initial velocity, zero outside its grid.
    duration : final time T.
    probes : (k, 2) points recorded each step by bilinear interpolation.
    cfl : fraction of the stability limit dt = cfl * h / sqrt(2); must be in (0, 1].
    snapshot_stride, energy_stride : record a field snapshot / the discrete
        energy every so many steps (0 = off).
    domain : optional explicit computational grid; must contain the probes.
        When omitted, the grid is enlarged so that the distance from support
        and probes to the boundary exceeds `duration` (finite speed keeps
        boundary effects out of the run).

    The first step uses the third-order start u^1 = dt*f + dt^3/6 * Lap f,
    preserving the scheme's second-order global accuracy.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not 0 < cfl <= 1.0:
        raise CflError(f"cfl must be in (0, 1], got {cfl}")
    probes = np.asarray(probes, dtype=float).reshape(-1, 2)
    grid = domain if domain is not None else _build_domain(f, probes, duration)
    h = grid.h
    dt0 = cfl * h / math.sqrt(2.0)
    n_steps = max(1, int(math.ceil(duration / dt0 - 1e-12)))
    dt = duration / n_steps

    # embed f on the enlarged grid; origins differ by whole cells
    u0 = np.zeros((grid.nx, grid.ny))
    oi = int(round((f.grid.ox - grid.ox) / h))
    oj = int(round((f.grid.oy - grid.oy) / h))
    if (oi < 0 or oj < 0 or oi + f.grid.nx > grid.nx or oj + f.grid.ny > grid.ny
            or abs(f.grid.ox - (grid.ox + oi * h)) > 1e-9 * h):
        raise ValueError("explicit domain does not contain the field grid on-lattice")
    fv = np.zeros((grid.nx, grid.ny))
    fv[oi:oi + f.grid.nx, oj:oj + f.grid.ny] = f.values

    i0, j0, w = _probe_weights(grid, probes)

    def record(u, out):
        vals = (w[0] * u[i0, j0] + w[1] * u[i0 + 1, j0]
                + w[2] * u[i0, j0 + 1] + w[3] * u[i0 + 1, j0 + 1])
        out.append(vals)

    trace_vals: list[np.ndarray] = []
    snapshots: list[tuple[float, ScalarField2D]] = []
    energies: list[float] = []
    energy_times: list[float] = []
    global_max = 0.0

    u_prev = u0
    record(u_prev, trace_vals)
    if snapshot_stride:
        snapshots.append((0.0, ScalarField2D(grid, u_prev.copy())))

    u = dt * fv + (dt ** 3 / 6.0) * _laplacian(fv, h)
    for n in range(1, n_steps + 1):
        t = n * dt
        record(u, trace_vals)
        global_max = max(global_max, float(np.max(np.abs(u))))
        if snapshot_stride and n % snapshot_stride == 0:
            snapshots.append((t, ScalarField2D(grid, u.copy())))
        if energy_stride and n % energy_stride == 0:
            energies.append(total_energy(WaveState(grid, u, u_prev, t, dt)))
            energy_times.append(t - 0.5 * dt)
        if n == n_steps:
            break
        u_next = 2.0 * u - u_prev + (dt * dt) * _laplacian(u, h)
        u_prev, u = u, u_next

    times = dt * np.arange(n_steps + 1)
    trace = ProbeTrace(probes, times, np.array(trace_vals))
    return WaveResult(
        trace=trace,
        energies=np.array(energies) if energies else None,
        energy_times=np.array(energy_times) if energy_times else None,
        snapshots=snapshots,
        final_state=WaveState(grid, u, u_prev, n_steps * dt, dt),
        global_max=global_max,
    )


def u_from_sinogram(radii: RadiusGrid, rf_mean: np.ndarray, t: float,
                    n: int = 2, c_norm: float = 1.0, n_quad: int = 256) -> float:
    """Wave solution at the sinogram's center from mean-normalized radial data.

    n = 2 evaluates c_norm * integral_0^t r (t^2 - r^2)^{-1/2} m(r) dr with
    the substitution r = t sin(theta), which turns the endpoint singularity
    into a smooth integrand: c_norm * integral_0^{pi/2} t sin(theta)
    m(t sin theta) d(theta), trapezoid on a uniform theta grid.

    n = 3 reduces, by differentiating the running integral of r*m(r), to
    c_norm * t * m(t).

    rf_mean holds the mean of f over circles |y - x| = r on `radii`, which
    must cover [0, t].
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return 0.0
    if t > radii.r_max + 1e-12 or radii.r_min > 0.0:
        raise ValueError(f"radius grid [{radii.r_min}, {radii.r_max}] does not "
                         f"cover [0, {t}]")
    rf_mean = np.asarray(rf_mean, dtype=float)
    rs = radii.values
    if n == 3:
        return float(c_norm * t * np.interp(t, rs, rf_mean))
    if n != 2:
        raise ValueError("dimension must be 2 or 3")
    theta = np.linspace(0.0, 0.5 * math.pi, n_quad + 1)
    r = t * np.sin(theta)
    integrand = t * np.sin(theta) * np.interp(r, rs, rf_mean)
    return float(c_norm * np.trapezoid(integrand, theta))


def formula_trace(radii: RadiusGrid, rf_mean: np.ndarray, times,
                  n: int = 2, c_norm: float = 1.0, n_quad: int = 256) -> np.ndarray:
    return np.array([u_from_sinogram(radii, rf_mean, float(t), n, c_norm, n_quad)
                     for t in np.asarray(times, dtype=float)])


def gaussian_sphere_mean(r, d: float, sigma: float, amplitude: float = 1.0):
    """Mean of amplitude*exp(-|y-a|^2/sigma^2) over the 3D sphere of radius r
    centered at distance d from a. Closed form; the d -> 0 limit is smooth."""
    r = np.asarray(r, dtype=float)
    x = 2.0 * d * r / sigma ** 2
    small = x < 1e-6
    # difference form keeps every exponent nonpositive (no overflow)
    exact = (np.exp(-((d - r) ** 2) / sigma ** 2) - np.exp(-((d + r) ** 2) / sigma ** 2)) \
        / np.where(small, 1.0, 2.0 * x)
    series = np.exp(-(d * d + r * r) / sigma ** 2) * (1.0 + x * x / 6.0)
    return amplitude * np.where(small, series, exact)


@dataclass
class CalibrationResult:
    dimension: int
    c_norm: float
    residual: float        # relative L2 misfit after scaling
    detail: str = ""


_CALIBRATION_CACHE: dict[int, CalibrationResult] = {}


def calibrate_formula(n: int, sigma: float = 0.2, duration: float | None = None,
                      n_theta: int = 128, use_cache: bool = True) -> CalibrationResult:
    """Fit the formula's normalization constant against an independent solution.

    n = 2: least-squares scalar fit of the formula trace to an FDTD trace at
    the center of a gaussian initial velocity (grid h = sigma/8).
    n = 3: fit of t * m(t) to the closed-form solution t * (sphere mean at
    radius t) for a gaussian, which that formula should reproduce with
    constant 1 under the mean normalization.

    Raises CalibrationError when the post-fit residual exceeds 10%: the two
    routes then disagree in shape, not just scale.
    """
    if use_cache and n in _CALIBRATION_CACHE:
        return _CALIBRATION_CACHE[n]
    if duration is None:
        duration = 6.0 * sigma
    if n == 3:
        radii = RadiusGrid(0.0, duration * 1.25, 400)
        m = gaussian_sphere_mean(radii.values, 0.0, sigma)
        times = np.linspace(0.0, duration, 200)
        u_f = formula_trace(radii, m, times, n=3)
        u_ref = times * gaussian_sphere_mean(times, 0.0, sigma)
        c, resid = _scalar_fit(u_f, u_ref)
        result = CalibrationResult(3, c, resid, f"gaussian sigma={sigma:g}, Kirchhoff form")
    elif n == 2:
        h = sigma / 8.0
        phantom = GaussianBump((0.0, 0.0), sigma)
        grid = Grid2D.centered(6.0 * sigma + 2 * h, h)
        f = sample_phantom(phantom, grid)
        run = fdtd_solve(f, duration, [(0.0, 0.0)])
        u_d = run.trace.values[:, 0]
        radii = RadiusGrid(0.0, duration * 1.25, 400)
        sino = forward_sinogram(phantom, _point_center(0.0, 0.0), radii,
                                n_theta, normalization="mean")
        u_f = formula_trace(radii, sino.values[0], run.trace.times, n=2)
        c, resid = _scalar_fit(u_f, u_d)
        result = CalibrationResult(2, c, resid,
                                   f"gaussian sigma={sigma:g} vs FDTD h=sigma/8")
    else:
        raise ValueError("dimension must be 2 or 3")
    if result.residual > 0.10:
        raise CalibrationError(
            f"calibration residual {result.residual:.3f} above 10%: the formula "
            f"path and the reference solution disagree beyond a constant")
    if use_cache:
        _CALIBRATION_CACHE[n] = result
    return result


def _point_center(x: float, y: float):
    from .geometry import FinitePointCenters
    return FinitePointCenters(np.array([[x, y]]))


def _scalar_fit(model: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    denom = float(model @ model)
    if denom == 0.0:
        raise CalibrationError("formula trace is identically zero")
    c = float(model @ ref) / denom
    resid = float(np.linalg.norm(c * model - ref) / np.linalg.norm(ref))
    return c, resid


@dataclass
class ProbeArrival:
    probe: tuple[float, float]
    distance: float            # to the thresholded support of f
    first_arrival: float | None
    causal: bool               # arrival not earlier than distance - 2h
    quiet_ok: bool | None      # for quiet probes: field small on the dual ball


@dataclass
class FiniteSpeedReport:
    entries: list[ProbeArrival]
    amplitude_threshold: float
    reference_max: float
    ok: bool


def check_finite_speed(trace: ProbeTrace, f: ScalarField2D, eps: float,
                       amplitude_tau: float = 1e-4,
                       support_tau: float = 1e-4) -> FiniteSpeedReport:
    """Causality report for a probe trace.

    For each probe: the first time |u| exceeds amplitude_tau * max|u| must
    not precede (distance to the support) - 2h. Probes that never exceed the
    threshold through time T are checked the dual way: f must be below
    amplitude_tau * max|f| on the ball of radius T - eps around the probe
    (solutions with u(0) = 0 extend oddly in time, so quiet on [0, T] means
    quiet on (-T, T)).

    The support is thresholded at support_tau * max|f|, consistent with the
    amplitude threshold: arrival is detected at the same relative level the
    support is cut at.
    """
    h = f.grid.h
    ref = trace.max_abs()
    fmax = f.max_abs()
    mask = f.support_mask(support_tau)
    nodes = f.grid.nodes()
    sup = nodes[mask]
    entries = []
    ok = True
    T = float(trace.times[-1])
    for k in range(trace.values.shape[1]):
        p = trace.probes[k]
        if len(sup):
            d = float(np.min(np.hypot(sup[:, 0] - p[0], sup[:, 1] - p[1])))
        else:
            d = math.inf
        hot = np.abs(trace.values[:, k]) > amplitude_tau * ref if ref > 0 else \
            np.zeros(len(trace.times), dtype=bool)
        if np.any(hot):
            t_first = float(trace.times[np.argmax(hot)])
            causal = t_first >= d - 2.0 * h
            entry = ProbeArrival((float(p[0]), float(p[1])), d, t_first, causal, None)
            ok = ok and causal
        else:
            ball = np.hypot(nodes[..., 0] - p[0], nodes[..., 1] - p[1]) < max(T - eps, 0.0)
            quiet_ok = bool(np.all(np.abs(f.values[ball]) <= amplitude_tau * fmax)) \
                if fmax > 0 else True
            entry = ProbeArrival((float(p[0]), float(p[1])), d, None, True, quiet_ok)
            ok = ok and quiet_ok
        entries.append(entry)
    return FiniteSpeedReport(entries, amplitude_tau, ref, ok)


@dataclass
class NodalReport:
    residual: float            # max |u| on the center set / global max |u|
    max_on_centers: float
    global_max: float
    zero_field: bool
    duration: float


def nodal_residual(f: ScalarField2D, centers: CenterSet, duration: float,
                   cfl: float = DEFAULT_CFL) -> NodalReport:
    """How close the center set is to a nodal set of the wave driven by f.

    Runs the FDTD solver with probes at the center samples and returns
    max over probes and time of |u|, normalized by the global max of |u|
    over the whole domain and run. Zero fields report residual 0 with a flag.
    """
    if f.max_abs() == 0.0:
        return NodalReport(0.0, 0.0, 0.0, True, duration)
    run = fdtd_solve(f, duration, centers.points, cfl=cfl)
    on_centers = run.trace.max_abs()
    gmax = max(run.global_max, 1e-300)
    return NodalReport(on_centers / gmax, on_centers, run.global_max, False, duration)
