"""Principal-value Riesz transforms and commutators on sampled functions.

R_j f(g) = p.v. int K_j(g, g') f(g') dg' is evaluated as a cell sum over
g' != g, corrected inside the pv_cut ball by the cancellation term

    sum_{0 < d_K(g, g') <= pv_cut} K_j(g, g') (f(g') - f(g)) mu,

which equals the plain far sum plus f(g) times the (nearly vanishing) window
sum of the kernel. Only cells in the support of f contribute, so atoms and
indicators of small balls are cheap on large grids.

The remaining functions build the test functions and atoms used in the
necessity arguments and drive the desk-scale experiments; each returns a
report model rather than asserting anything.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.analysis.oscillation_bmo import bmo_norm, bmo_norm_weighted, mean_oscillation, region_mask, weighted_median
from src.analysis.sampled import Ball, BallFamily, GridSpec, SampledFunction, Weight
from src.analysis.sector import ConeSampler, contains_arrays, scaled_sector
from src.core.models import (
    DistributionReport,
    DistributionRow,
    GrowthReport,
    NormResult,
    SectorSpec,
    ThetaFit,
    TwoWeightReport,
    Weak11Report,
)
from src.core.points import GroupMode
from src.groups.sphere import KoranyiSphereGrid
from src.kernels.kernel_table import BaseKernel
from src.utils.parallel import parallel_map
from src.utils.quadrature import gauss_legendre_panels

logger = logging.getLogger(__name__)

PAIR_BLOCK = 1 << 21


def _check_kernel(kernel: BaseKernel, grid: GridSpec) -> None:
    if kernel.group.mode != grid.mode or kernel.group.n != grid.n:
        raise ValueError(f"Kernel on {kernel.group.name} cannot act on a {grid.mode.value} grid with n={grid.n}")


def _window_cells(grid: GridSpec, center: np.ndarray, r: float) -> np.ndarray:
    """Flat indices of the cells whose centres fall in the coordinate box of B(center, r)."""
    lo, hi = grid.ball_box(center, r)
    lower, h, shape = np.array(grid.lower), grid.spacing, np.array(grid.shape)
    first = np.clip(np.ceil((lo - lower) / h - 0.5), 0, shape - 1).astype(int)
    last = np.clip(np.floor((hi - lower) / h - 0.5), 0, shape - 1).astype(int)
    ranges = [np.arange(a, b + 1) for a, b in zip(first, last)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape)


def near_kernel_sums(kernel: BaseKernel, grid: GridSpec, cells: np.ndarray, pv_cut: float) -> np.ndarray:
    """sum_{0 < d_K(g_i, g') <= pv_cut} K_j(g_i, g') mu for each listed cell g_i."""
    centers = grid.centers()
    out = np.zeros(cells.size)
    for k, i in enumerate(cells):
        window = _window_cells(grid, centers[i], pv_cut)
        pts = centers[window]
        d = grid.group.distance_arrays(pts, centers[i][None, :])
        keep = (d > 0) & (d <= pv_cut)
        if np.any(keep):
            out[k] = float(np.sum(kernel.pair(centers[i][None, :], pts[keep]))) * grid.cell_measure
    return out


def riesz_apply(
    kernel: BaseKernel,
    f: SampledFunction,
    pv_cut: float,
    workers: Optional[int] = 1,
) -> SampledFunction:
    """Principal-value R_j f on the grid of f.

    Args:
        kernel: Calibrated (or closed-form abelian) kernel
        f: Input function
        pv_cut: Radius of the near-field cancellation window
        workers: Threads over blocks of output cells

    Raises:
        ValueError: If pv_cut is below two grid resolutions or the kernel
            lives on another group
    """
    grid = f.grid
    _check_kernel(kernel, grid)
    floor = 2.0 * grid.koranyi_resolution
    if pv_cut < floor:
        raise ValueError(f"pv_cut {pv_cut:g} is below twice the grid resolution ({floor:g})")

    support = np.flatnonzero(f.flat != 0.0)
    if support.size == 0:
        return f.with_values(np.zeros(grid.size))
    centers = grid.centers()
    src_pts = centers[support]
    src_mass = f.flat[support] * grid.cell_measure

    block = max(1, PAIR_BLOCK // support.size)
    starts = list(range(0, grid.size, block))

    def far_block(start: int) -> np.ndarray:
        targets = centers[start:start + block]
        kern = kernel.pair(targets[:, None, :], src_pts[None, :, :])
        return kern @ src_mass

    out = np.concatenate(parallel_map(far_block, starts, workers))
    out[support] -= f.flat[support] * near_kernel_sums(kernel, grid, support, pv_cut)
    logger.debug(f"R_{kernel.j.label} applied: {support.size} source cells, {grid.size} targets, pv_cut={pv_cut:g}")
    return f.with_values(out)


def hilbert_fft_oracle(f: SampledFunction, pad: int = 8) -> SampledFunction:
    """R f on the line through the Fourier multiplier i sgn(xi), with zero padding.

    Raises:
        ValueError: If f does not live on an abelian grid with n = 1
    """
    if f.grid.mode != GroupMode.ABELIAN or f.grid.n != 1:
        raise ValueError("The Fourier oracle is only available on the real line")
    values = f.flat
    size = values.size * pad
    xi = np.fft.fftfreq(size, d=float(f.grid.spacing[0]))
    transformed = np.fft.ifft(1j * np.sign(xi) * np.fft.fft(values, n=size)).real
    return f.with_values(transformed[: values.size])


def commutator_apply(
    kernel: BaseKernel,
    b: SampledFunction,
    f: SampledFunction,
    pv_cut: float,
    workers: Optional[int] = 1,
) -> SampledFunction:
    """[b, R_j] f = b R_j f - R_j(b f).

    Raises:
        ValueError: If b and f live on different grids
    """
    if b.grid != f.grid:
        raise ValueError("Symbol and input live on different grids")
    return b * riesz_apply(kernel, f, pv_cut, workers) - riesz_apply(kernel, b * f, pv_cut, workers)


def weak_l1_report(u: SampledFunction, thresholds: Sequence[float], f: Optional[SampledFunction] = None) -> DistributionReport:
    """Superlevel measures |{|u| > lambda}|, with the L log L functional of f when given."""
    mags = np.abs(u.flat)
    rows = []
    for lam in sorted(float(t) for t in thresholds):
        measure = float(np.count_nonzero(mags > lam)) * u.cell_measure
        rows.append(DistributionRow(
            threshold=lam,
            measure=measure,
            llogl=None if f is None else llogl_functional(f, lam),
        ))
    return DistributionReport(rows=rows)


def llogl_functional(f: SampledFunction, lam: float) -> float:
    """int (|f|/lambda)(1 + log+(|f|/lambda))."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    ratio = np.abs(f.flat) / lam
    log_plus = np.log(np.maximum(ratio, 1.0))
    return float(np.sum(ratio * (1.0 + log_plus)) * f.cell_measure)


# Test functions ------------------------------------------------------------------------

def phi_test_function(b: SampledFunction, ball: Ball) -> Tuple[SampledFunction, float]:
    """Balanced +-1 function on a ball aligned with b - m_b(B).

    Cells of B are ordered by b - m; the lower half gets -1 and the upper
    half +1 (the middle cell 0 when the count is odd), so that phi sums to
    zero, phi (b - m) >= 0 and (1/|B|) int phi (b - m) is the mean
    oscillation of b about its median.

    Returns:
        Tuple (phi, M)
    """
    mask = region_mask(b.grid, ball)
    cells = np.flatnonzero(mask)
    values = np.zeros(b.grid.size)
    if cells.size == 0:
        return b.with_values(values), 0.0
    m = weighted_median(b.flat[cells])
    centered = b.flat[cells] - m
    order = cells[np.argsort(centered, kind="stable")]
    half = cells.size // 2
    values[order[:half]] = -1.0
    values[order[cells.size - half:]] = 1.0
    M = float(np.mean(values[cells] * centered))
    return b.with_values(values), M


def psi_test_function(b: SampledFunction, F: np.ndarray) -> SampledFunction:
    """sgn(b) chi_F."""
    mask = region_mask(b.grid, F)
    return b.with_values(np.where(mask, np.sign(b.flat), 0.0))


@dataclass(frozen=True)
class Atom:
    """A mean-zero function supported in a ball with ||a||_q <= |B|^{1/q - 1}.

    Attributes:
        function: The sampled atom
        ball: Supporting ball
        q: Integrability exponent (math.inf allowed)
        support: Flat mask of the cells of the ball
    """
    function: SampledFunction
    ball: Ball
    q: float
    support: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.ball.center

    @property
    def radius(self) -> float:
        return self.ball.radius

    @property
    def ball_measure(self) -> float:
        return float(np.count_nonzero(self.support)) * self.function.cell_measure

    def norm(self) -> float:
        vals = np.abs(self.function.flat)
        if math.isinf(self.q):
            return float(np.max(vals))
        return float(np.sum(vals ** self.q) * self.function.cell_measure) ** (1.0 / self.q)


def make_atom(grid: GridSpec, ball: Ball, pattern: str = "two-block", q: float = math.inf) -> Atom:
    """A (1, q)-atom on a grid ball.

    ``two-block`` splits the ball cells by the first horizontal coordinate of
    c^{-1} o g into two equal halves carrying -A and +A, with A chosen so the
    L^q norm is exactly |B|^{1/q - 1}. ``radial`` uses cos(pi d_K(c, g) / r)
    minus its ball average, rescaled to the same norm.

    Raises:
        ValueError: If q <= 1, the pattern is unknown or the ball holds fewer than two cells
    """
    if not q > 1:
        raise ValueError(f"Atoms need q > 1, got {q}")
    mask = region_mask(grid, ball)
    cells = np.flatnonzero(mask)
    if cells.size < 2:
        raise ValueError(f"Ball {ball.describe()} holds {cells.size} cells, an atom needs two")
    group = grid.group
    mu = grid.cell_measure
    ball_measure = cells.size * mu
    target = ball_measure ** (1.0 / q - 1.0)
    local = group.compose_arrays(group.inverse_arrays(np.asarray(ball.center, dtype=float)), grid.centers()[cells])
    values = np.zeros(grid.size)

    if pattern == "two-block":
        order = cells[np.argsort(local[:, 0], kind="stable")]
        half = cells.size // 2
        support_measure = 2 * half * mu
        amplitude = target if math.isinf(q) else target / support_measure ** (1.0 / q)
        values[order[:half]] = -amplitude
        values[order[cells.size - half:]] = amplitude
    elif pattern == "radial":
        profile = np.cos(math.pi * group.norm_arrays(local) / ball.radius)
        profile -= np.mean(profile)
        if math.isinf(q):
            size = float(np.max(np.abs(profile)))
        else:
            size = float(np.sum(np.abs(profile) ** q) * mu) ** (1.0 / q)
        values[cells] = profile * target / size
    else:
        raise ValueError(f"Unknown atom pattern: {pattern}")

    return Atom(SampledFunction(grid, values), ball, q, mask)


# Growth of the endpoint criteria ---------------------------------------------------------

def _log_fit(radii: Sequence[float], values: Sequence[float], second: float) -> GrowthReport:
    x = np.log(np.asarray(radii, dtype=float))
    y = np.asarray(values, dtype=float)
    if x.size >= 2:
        slope, intercept = np.polyfit(x, y, 1)
        fitted = slope * x + intercept
        total = float(np.sum((y - np.mean(y)) ** 2))
        r_squared = 1.0 - float(np.sum((y - fitted) ** 2)) / total if total > 0 else 1.0
    else:
        slope, intercept, r_squared = 0.0, float(y[0]) if y.size else 0.0, 1.0
    return GrowthReport(
        radii=[float(r) for r in radii],
        values=[float(v) for v in y],
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        second_factor=float(second),
    )


def _check_inside(grid: GridSpec, ball: Ball, g_tilde: np.ndarray) -> None:
    d = float(grid.group.distance_arrays(g_tilde[None, :], np.asarray(ball.center, dtype=float)[None, :])[0])
    if not d < ball.radius:
        raise ValueError(f"Base point lies at distance {d:g} from the ball centre, outside radius {ball.radius:g}")


def _escape_radii(group, g_tilde: np.ndarray, center: np.ndarray, sigma: np.ndarray, level: float) -> np.ndarray:
    """For each sphere point, the rho where d_K(g~ o delta_rho sigma, c) first reaches ``level``."""
    start = float(group.distance_arrays(g_tilde[None, :], center[None, :])[0])
    upper = 2.0 * (level + start) + 1.0
    out = np.empty(sigma.shape[0])
    for k, s in enumerate(sigma):
        def gap(rho: float) -> float:
            p = group.compose_arrays(g_tilde, group.dilate_arrays(rho, s))
            return float(group.distance_arrays(p[None, :], center[None, :])[0]) - level
        out[k] = brentq(gap, 0.0, upper, xtol=1e-12)
    return out


def h1b_growth(
    kernel: BaseKernel,
    b: SampledFunction,
    atom: Atom,
    g_tilde: np.ndarray,
    radii: Sequence[float],
    r_o: float,
    sphere_cells: int = 48,
    seed: int = 0,
) -> GrowthReport:
    """(int_{B(g~,R) \\ r_o B} |K_j(g, g~)| dg) |int b a| along a radius ladder.

    With g = g~ o delta_rho sigma the kernel is rho^{-Q} K_j(sigma), so the
    inner integral is sum_sigma w_sigma |K_j(sigma)| log+(R / rho_min(sigma)),
    rho_min being where the ray leaves r_o B.

    Raises:
        ValueError: If g~ is outside the atom's ball or r_o <= 1
    """
    grid = b.grid
    _check_kernel(kernel, grid)
    g_tilde = np.asarray(g_tilde, dtype=float)
    _check_inside(grid, atom.ball, g_tilde)
    if not r_o > 1:
        raise ValueError(f"r_o must exceed 1, got {r_o}")
    group = grid.group
    sphere = KoranyiSphereGrid.build(group, sphere_cells, sphere_cells, seed=seed)
    weights = sphere.weights * np.abs(kernel.values(sphere.points))
    rho_min = _escape_radii(group, g_tilde, np.asarray(atom.center, dtype=float), sphere.points, r_o * atom.radius)
    second = abs(float(np.sum(b.flat * atom.function.flat) * grid.cell_measure))
    values = []
    for R in radii:
        first = float(np.sum(weights * np.log(np.maximum(R / rho_min, 1.0))))
        values.append(first * second)
    report = _log_fit(radii, values, second)
    logger.info(f"(h1b) growth for {kernel.j.label}: slope {report.slope:.4g}, |int b a| = {second:.4g}")
    return report


def h1b_condition(
    kernel: BaseKernel,
    b: SampledFunction,
    atom: Atom,
    g_tilde: np.ndarray,
    far_radius: float,
    r_o: float = 2.0,
    sphere_cells: int = 48,
) -> float:
    """The (h1b) product truncated at far_radius."""
    return h1b_growth(kernel, b, atom, g_tilde, [far_radius], r_o, sphere_cells).values[0]


def lb_condition(
    kernel: BaseKernel,
    b: SampledFunction,
    ball: Ball,
    f: SampledFunction,
    g_tilde: np.ndarray,
    r_o: float,
    far_radius: Optional[float] = None,
) -> float:
    """(1/|B|) int_B |b - b_B| times |int_{(r_o B)^c} K_j(g~, g') f(g') dg'| as a cell sum.

    Raises:
        ValueError: If g~ is not in the ball or f and b live on different grids
    """
    grid = b.grid
    if f.grid != grid:
        raise ValueError("Symbol and input live on different grids")
    _check_kernel(kernel, grid)
    g_tilde = np.asarray(g_tilde, dtype=float)
    _check_inside(grid, ball, g_tilde)
    centers = grid.centers()
    far = grid.group.distance_arrays(centers, np.asarray(ball.center, dtype=float)[None, :]) >= r_o * ball.radius
    if far_radius is not None:
        far &= grid.group.distance_arrays(centers, g_tilde[None, :]) <= far_radius
    cells = np.flatnonzero(far & (f.flat != 0.0))
    if cells.size == 0:
        return 0.0
    tail = float(np.sum(kernel.pair(g_tilde[None, :], centers[cells]) * f.flat[cells]) * grid.cell_measure)
    return mean_oscillation(b, ball) * abs(tail)


def lb_growth(
    kernel: BaseKernel,
    b: SampledFunction,
    ball: Ball,
    spec: SectorSpec,
    g_tilde: np.ndarray,
    N_list: Sequence[float],
    sigma_samples: int = 2000,
    seed: int = 0,
    panels_per_unit: int = 4,
) -> GrowthReport:
    """The (lb) product for f_N = chi_{G cap B(g~, N)}, G the sector at g~ with scale r.

    With g' = g~ o delta_rho sigma one has K_j(g~, g') = rho^{-Q} K_j(sigma^{-1}),
    so the tail integral is sum_sigma w_sigma K_j(sigma^{-1}) int chi d(log rho),
    computed with Gauss-Legendre panels in log rho whose edges sit at every N.

    Raises:
        ValueError: If an N does not exceed the inner truncation
    """
    grid = b.grid
    _check_kernel(kernel, grid)
    g_tilde = np.asarray(g_tilde, dtype=float)
    _check_inside(grid, ball, g_tilde)
    group = kernel.group
    region = scaled_sector(spec, group.point(g_tilde), ball.radius)
    start = 0.5 * region.inner_distance
    Ns = sorted(float(N) for N in N_list)
    if Ns[0] <= start:
        raise ValueError(f"N must exceed {start:g}, got {Ns[0]:g}")

    sigma, surface = ConeSampler.build(region, seed).directions(sigma_samples, seed + 1)
    kern = kernel.values(group.inverse_arrays(sigma))
    edges = [math.log(start)] + [math.log(N) for N in Ns]
    nodes, node_w, segment = [], [], []
    for k in range(len(Ns)):
        panels = max(1, math.ceil(panels_per_unit * (edges[k + 1] - edges[k])))
        u, w = gauss_legendre_panels(edges[k], edges[k + 1], panels, order=8)
        nodes.append(u)
        node_w.append(w)
        segment.append(np.full(u.size, k))
    u, w, segment = np.concatenate(nodes), np.concatenate(node_w), np.concatenate(segment)

    rho = np.exp(u)
    pts = group.compose_arrays(
        g_tilde, group.dilate_arrays(rho[None, :], sigma[:, None, :])
    ).reshape(-1, group.dim)
    inside = contains_arrays(region, pts)
    far = group.distance_arrays(pts, np.asarray(ball.center, dtype=float)[None, :]) >= region.inner_distance
    chi = (inside & far).reshape(sigma.shape[0], u.size) * w[None, :]

    first = mean_oscillation(b, ball)
    values = []
    for k in range(len(Ns)):
        radial = np.sum(chi[:, segment <= k], axis=1)
        tail = abs(float(np.sum(surface * kern * radial)))
        values.append(first * tail)
    report = _log_fit(Ns, values, first)
    logger.info(f"(lb) growth for {kernel.j.label}: slope {report.slope:.4g}, oscillation {first:.4g}")
    return report


# Experiments ------------------------------------------------------------------------------

def weak11_experiment(
    kernel: BaseKernel,
    b: SampledFunction,
    g_prime: np.ndarray,
    eps_list: Sequence[float],
    target: Optional[np.ndarray] = None,
    thresholds: Optional[Sequence[float]] = None,
    samples: int = 4096,
    seed: int = 0,
) -> Weak11Report:
    """[b, R_j] f_eps at a far target for f_eps = eps^{-Q} chi_{B(g', eps)} / |B(0,1)|.

    [b, R_j] f_eps(g) = E_u K_j(g, g' delta_eps u)(b(g) - b(g' delta_eps u)) for
    u uniform in B(0,1), estimated with antithetic pairs (u, u^{-1}). The
    limit is K_j(g, g')(b(g) - b(g')); its superlevel measures give the
    lambda |{...}| <= C ||f||_1 comparison with ||f_eps||_1 = 1.

    Raises:
        ValueError: If an eps is below the grid resolution or g' is not a cell centre
    """
    grid = b.grid
    _check_kernel(kernel, grid)
    group = grid.group
    g_prime = np.asarray(g_prime, dtype=float)
    if min(eps_list) < grid.koranyi_resolution:
        raise ValueError(f"eps {min(eps_list):g} is below the grid resolution {grid.koranyi_resolution:g}")
    centers = grid.centers()
    cell = int(grid.nearest_cells(g_prime[None, :])[0])
    if not np.allclose(centers[cell], g_prime, atol=1e-9):
        raise ValueError(f"{tuple(g_prime)} is not a grid cell centre")

    b_prime = float(b.evaluate(g_prime[None, :])[0])
    limit = kernel.pair(centers, g_prime[None, :]) * (b.flat - b_prime)
    limit[cell] = 0.0
    if target is None:
        dist = group.distance_arrays(centers, g_prime[None, :])
        eligible = dist >= 8.0 * max(eps_list)
        if not np.any(eligible):
            raise ValueError("No grid cell lies far enough from g' for the largest eps")
        target = centers[int(np.argmax(np.where(eligible, np.abs(limit), -1.0)))]
    target = np.asarray(target, dtype=float)

    u = group.sample_ball_arrays(np.zeros(group.dim), 1.0, samples // 2, seed)
    u = np.concatenate([u, group.inverse_arrays(u)])
    b_target = float(b.evaluate(target[None, :])[0])
    limit_target = float(kernel.pair(target[None, :], g_prime[None, :])[0]) * (b_target - b_prime)
    errors = []
    for eps in eps_list:
        h = group.compose_arrays(g_prime, group.dilate_arrays(eps, u))
        value = float(np.mean(kernel.pair(target[None, :], h) * (b_target - b.evaluate(h))))
        errors.append(abs(value - limit_target))

    mags = np.abs(limit)
    top = float(np.max(mags))
    if thresholds is None:
        thresholds = list(top * np.logspace(-2, 0, 9, endpoint=False)) if top > 0 else [1.0]
    thresholds = sorted(float(t) for t in thresholds)
    measures = [float(np.count_nonzero(mags > t)) * grid.cell_measure for t in thresholds]
    weak_constant = max((t * m for t, m in zip(thresholds, measures)), default=0.0)
    logger.info(
        f"weak(1,1) experiment for {kernel.j.label}: errors {[f'{e:.3e}' for e in errors]}, "
        f"weak constant {weak_constant:.4g}"
    )
    return Weak11Report(
        epsilons=[float(e) for e in eps_list],
        errors=errors,
        target=tuple(float(x) for x in target),
        limit_value=abs(limit_target),
        thresholds=thresholds,
        measures=measures,
        weak_constant=weak_constant,
    )


def fit_theta(
    kernel: BaseKernel,
    b: SampledFunction,
    family: Sequence[SampledFunction],
    pv_cut: float,
    thresholds: Sequence[float],
    workers: Optional[int] = 1,
) -> ThetaFit:
    """theta_b from |{|[b,R_j] f| > lambda}| against int (|f|/lambda)(1 + log+(|f|/lambda)).

    theta_lsq minimises sum (y - theta x)^2 over all (f, lambda) pairs,
    theta_sup is the largest ratio y / x; residual is relative to |y|.
    """
    xs, ys = [], []
    for f in family:
        report = weak_l1_report(commutator_apply(kernel, b, f, pv_cut, workers), thresholds, f)
        for row in report.rows:
            if row.llogl and row.llogl > 0:
                xs.append(row.llogl)
                ys.append(row.measure)
    x, y = np.asarray(xs), np.asarray(ys)
    if x.size == 0:
        return ThetaFit(theta_lsq=0.0, theta_sup=0.0, residual=0.0, points=0)
    theta = float(np.sum(x * y) / np.sum(x * x))
    norm_y = float(np.linalg.norm(y))
    residual = float(np.linalg.norm(y - theta * x)) / norm_y if norm_y > 0 else 0.0
    return ThetaFit(theta_lsq=theta, theta_sup=float(np.max(y / x)), residual=residual, points=int(x.size))


def linfty_bmo_experiment(
    kernel: BaseKernel,
    b: SampledFunction,
    f: SampledFunction,
    family: BallFamily,
    pv_cut: float,
    workers: Optional[int] = 1,
) -> NormResult:
    """||[b, R_j] f||_BMO over a ball family for bounded compactly supported f."""
    return bmo_norm(commutator_apply(kernel, b, f, pv_cut, workers), family)


def two_weight_experiment(
    kernel: BaseKernel,
    b: SampledFunction,
    mu: Weight,
    lam: Weight,
    p: float,
    family: BallFamily,
    pv_cut: float,
    max_balls: int = 16,
    workers: Optional[int] = 1,
) -> TwoWeightReport:
    """||b||_{BMO_nu} against sup_B ||[b,R_j] chi_B||_{L^p(lambda)} / ||chi_B||_{L^p(mu)}.

    Raises:
        ValueError: If p <= 1 or the family is empty
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    balls = list(family)
    if not balls:
        raise ValueError("Empty ball family")
    nu = mu.power_of(lam, p)
    left = bmo_norm_weighted(b, nu, family).value
    picks = np.unique(np.linspace(0, len(balls) - 1, min(max_balls, len(balls))).astype(int))
    mu_cell = b.cell_measure
    right = 0.0
    for k in picks:
        _, mask = balls[k]
        chi = b.with_values(mask.astype(float))
        u = commutator_apply(kernel, b, chi, pv_cut, workers)
        num = float(np.sum(np.abs(u.flat) ** p * lam.flat) * mu_cell) ** (1.0 / p)
        den = float(np.sum(mu.flat[mask]) * mu_cell) ** (1.0 / p)
        right = max(right, num / den)
    ratio = left / right if right > 0 else math.inf
    logger.info(f"Two-weight experiment p={p:g}: left {left:.4g}, right {right:.4g}")
    return TwoWeightReport(p=p, left=left, right=right, ratio=ratio, balls_tested=int(picks.size))


def far_field_annuli(u: SampledFunction, center: np.ndarray, radius: float) -> List[Dict[str, float]]:
    """sum_{2^l r <= d_K(c, g) < 2^{l+1} r} |u| mu for l = 0, 1, ... while the annulus meets the grid."""
    grid = u.grid
    d = grid.group.distance_arrays(grid.centers(), np.asarray(center, dtype=float)[None, :])
    rows = []
    level = 0
    while 2.0 ** level * radius <= float(np.max(d)):
        inner, outer = 2.0 ** level * radius, 2.0 ** (level + 1) * radius
        ring = (d >= inner) & (d < outer)
        rows.append({
            "level": level,
            "inner": inner,
            "outer": outer,
            "cells": int(np.count_nonzero(ring)),
            "sum": float(np.sum(np.abs(u.flat[ring])) * grid.cell_measure),
        })
        level += 1
    return rows
