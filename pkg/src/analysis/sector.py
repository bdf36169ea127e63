"""Twisted truncated sectors and their sampled certificates.

For a direction point g~ with d_K(g~) = 1, an aperture epsilon and an inner
radius r_o, the sector based at g with scale r is

    G = g o U_{s >= r_o r / alpha} delta_s(B(g~, epsilon)),

alpha being the smallest norm on B(g~, epsilon). For g1 in B(g, r) and g2 in
G one has g2^{-1} o g1 = delta_s(q^{-1} o v) with q in B(g~, epsilon) and
|v| < epsilon, so by homogeneity |K_j(g1, g2)| d_K(g1, g2)^Q only depends on
the "reach set" {q^{-1} o v}. The aperture is chosen so that the kernel keeps
its sign and half its size on that set (and on the reflected set for the
reversed pair order).
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from src.core.errors import KernelDegenerateError, VerificationError
from src.core.group_factory import GroupFactory
from src.core.models import LowerBoundReport, SectorSpec, VolumeReport, VolumeRow
from src.core.points import GroupMode, GroupPoint
from src.groups.group_core import quasi_triangle_constant
from src.groups.sphere import KoranyiSphereGrid, euclidean_sphere_area
from src.kernels.kernel_table import BaseKernel
from src.utils.report_io import read_json, write_json

logger = logging.getLogger(__name__)

BALL_SAMPLES = 4096
MAX_DYADIC_STEPS = 12
SEARCH_NODES = 65
GOLDEN_ITERATIONS = 60
CHUNK = 8192
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _common_sign(values: np.ndarray) -> int:
    if values.size and np.all(values > 0):
        return 1
    if values.size and np.all(values < 0):
        return -1
    return 0


@dataclass(frozen=True)
class SectorRegion:
    """A sector spec placed at a base point with a scale.

    Attributes:
        spec: Direction, aperture and radii
        base: Translation g
        r: Scale (1 for the unscaled construction)
    """
    spec: SectorSpec
    base: GroupPoint
    r: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"Sector scale must be positive, got {self.r}")
        if not self.base.is_heisenberg or self.base.n != self.spec.n:
            raise ValueError(f"Sector base {self.base!r} does not live on H^{self.spec.n}")

    @property
    def direction(self) -> np.ndarray:
        return np.array(self.spec.direction)

    @property
    def s_min(self) -> float:
        """Smallest admissible dilation r_o r / alpha."""
        return self.spec.r_o * self.r / self.spec.alpha

    @property
    def inner_distance(self) -> float:
        """The truncation r_o r."""
        return self.spec.r_o * self.r


def scaled_sector(spec: SectorSpec, g: GroupPoint, r: float = 1.0) -> SectorRegion:
    """The sector of ``spec`` translated to g with r_o replaced by r_o r."""
    return SectorRegion(spec=spec, base=g, r=r)


# Direction point ---------------------------------------------------------------

def _reach_points(group, direction: np.ndarray, eps: float, count: int, seed: int) -> np.ndarray:
    q = group.sample_ball_arrays(direction, eps, count, seed)
    v = group.sample_ball_arrays(np.zeros(group.dim), eps, count, seed + 1)
    return group.compose_arrays(group.inverse_arrays(q), v)


def _aperture_holds(
    kernel: BaseKernel, direction: np.ndarray, eps: float, quasi: float, k_inv: float, k_dir: float,
    samples: int, seed: int,
) -> Tuple[bool, float]:
    group = kernel.group
    Q = group.Q
    ball = group.sample_ball_arrays(group.inverse_arrays(direction), 4.0 * quasi * eps, samples, seed)
    ball_vals = kernel.values(ball)
    margin = float(np.min(np.abs(ball_vals)) / abs(k_inv))
    ok = _common_sign(ball_vals) == np.sign(k_inv) and margin > 0.5

    reach = _reach_points(group, direction, eps, samples, seed + 2)
    scale = group.norm_arrays(reach) ** Q
    forward = kernel.values(reach) * scale
    backward = kernel.values(group.inverse_arrays(reach)) * scale
    ok = ok and _common_sign(forward) == np.sign(k_inv) and np.min(np.abs(forward)) > 0.5 * abs(k_inv)
    ok = ok and _common_sign(backward) == np.sign(k_dir) and np.min(np.abs(backward)) > 0.5 * abs(k_dir)
    return bool(ok), margin


def find_direction_point(
    kernel: BaseKernel,
    sphere_grid: int = 64,
    seed: int = 0,
    ball_samples: int = BALL_SAMPLES,
    quasi_constant: Optional[float] = None,
    threshold: float = 1e-12,
) -> SectorSpec:
    """Direction point, aperture and radii of a sector for kernel.j.

    g~ maximises min(|K_j(sigma^{-1})|, |K_j(sigma)|) over a unit-sphere grid,
    so both pair orders keep a large kernel. The spec records both values and
    the one-sided maximum of |K_j(sigma^{-1})|. epsilon is the largest 2^{-k}
    whose safety ball B(g~^{-1}, 4 C epsilon) and reach sets keep sign and
    half the size; r_o = 2^gamma is the smallest such power above 1/epsilon.

    Args:
        kernel: Heisenberg kernel
        sphere_grid: Cells per axis of the sphere grid
        seed: Seed of the ball samples
        ball_samples: Points per verification sample
        quasi_constant: Quasi-triangle constant; estimated when omitted
        threshold: Smallest admissible sphere maximum of |K_j|

    Returns:
        Immutable sector spec

    Raises:
        ValueError: If the kernel is not on H^n
        KernelDegenerateError: If |K_j| stays below threshold on the grid or no aperture qualifies
    """
    group = kernel.group
    if group.mode != GroupMode.HEISENBERG:
        raise ValueError("Sectors are built on the Heisenberg group only")
    grid = KoranyiSphereGrid.build(group, sphere_grid, sphere_grid, seed=0)
    k_inv_all = kernel.values(group.inverse_arrays(grid.points))
    k_dir_all = kernel.values(grid.points)
    score = np.minimum(np.abs(k_inv_all), np.abs(k_dir_all))
    best = int(np.argmax(score))
    if not np.isfinite(score[best]) or score[best] <= threshold:
        logger.error(f"Kernel {kernel.j} vanishes to {score[best]:.3e} on the whole sphere grid")
        raise KernelDegenerateError(f"No sphere grid point carries |K_{kernel.j}| above {threshold}")

    direction = group.dilate_arrays(1.0 / float(group.norm_arrays(grid.points[best])), grid.points[best])
    k_inv = float(kernel.values(group.inverse_arrays(direction)[None, :])[0])
    k_dir = float(kernel.values(direction[None, :])[0])
    quasi = quasi_constant or quasi_triangle_constant(GroupMode.HEISENBERG.value, group.n, 200_000, seed)

    chosen = None
    for k in range(1, MAX_DYADIC_STEPS + 1):
        eps = 2.0 ** (-k)
        if 4.0 * quasi * eps >= 1.0:
            continue
        ok, margin = _aperture_holds(kernel, direction, eps, quasi, k_inv, k_dir, ball_samples, seed + 10 * k)
        if ok:
            chosen = (k, eps, margin)
            break
    if chosen is None:
        raise KernelDegenerateError(f"No dyadic aperture down to 2^-{MAX_DYADIC_STEPS} keeps K_{kernel.j} single-signed")
    k, eps, margin = chosen

    norms = group.norm_arrays(group.sample_ball_arrays(direction, eps, ball_samples, seed + 1000))
    alpha = min(float(np.min(norms)), 1.0)
    beta = max(float(np.max(norms)), 1.0)
    spec = SectorSpec(
        j=kernel.j.label,
        n=group.n,
        direction=tuple(float(c) for c in direction),
        epsilon=eps,
        r_o=2.0 ** (k + 1),
        alpha=alpha,
        beta=beta,
        kernel_at_direction=k_inv,
        kernel_at_reflection=k_dir,
        direction_maximum=float(np.max(np.abs(k_inv_all))),
        ball_margin=margin,
        quasi_constant=quasi,
        calibration_id=kernel.calibration_id,
    )
    logger.info(
        f"Sector for {spec.j}: epsilon=2^-{k}, r_o={spec.r_o:g}, alpha={alpha:.4f}, beta={beta:.4f}, "
        f"K(g~^-1)={k_inv:.6g}, K(g~)={k_dir:.6g}, one-sided max={spec.direction_maximum:.6g}, margin={margin:.3f}"
    )
    return spec


# Membership --------------------------------------------------------------------

def _offsets(region: SectorRegion, u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """d_K(delta_{1/s} u, g~) for u of shape (N, dim) and s of shape (N, M)."""
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, region.spec.n)
    scaled = group.dilate_arrays(1.0 / s, u[:, None, :])
    return group.distance_arrays(scaled, region.direction)


def contains_arrays(region: SectorRegion, points: np.ndarray) -> np.ndarray:
    """Vectorised membership test for an (N, dim) array."""
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, region.spec.n)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(points.shape[0], dtype=bool)
    ce = region.spec.quasi_constant * region.spec.epsilon
    for start in range(0, points.shape[0], CHUNK):
        u = group.compose_arrays(group.inverse_arrays(region.base.coords), points[start:start + CHUNK])
        d = group.norm_arrays(u)
        lo = np.maximum(d / (1.0 + ce), region.s_min)
        hi = d / (1.0 - ce)
        live = (d > 0) & (lo <= hi)
        if not np.any(live):
            continue
        u, lo, hi = u[live], np.log(lo[live]), np.log(hi[live])

        frac = np.linspace(0.0, 1.0, SEARCH_NODES)
        log_s = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        vals = _offsets(region, u, np.exp(log_s))
        k = np.argmin(vals, axis=1)
        rows = np.arange(u.shape[0])
        a = log_s[rows, np.maximum(k - 1, 0)]
        b = log_s[rows, np.minimum(k + 1, SEARCH_NODES - 1)]
        best = vals[rows, k]
        for _ in range(GOLDEN_ITERATIONS):
            c = b - GOLDEN * (b - a)
            e = a + GOLDEN * (b - a)
            fc = _offsets(region, u, np.exp(np.stack([c, e], axis=1)))
            left = fc[:, 0] < fc[:, 1]
            b = np.where(left, e, b)
            a = np.where(left, a, c)
            best = np.minimum(best, np.min(fc, axis=1))
        hit = best < region.spec.epsilon
        idx = np.flatnonzero(live) + start
        out[idx] = hit
    return out


def sector_contains(region: SectorRegion, p: GroupPoint) -> bool:
    """True iff p = g o delta_s(q) for some s >= r_o r / alpha and q in B(g~, epsilon)."""
    return bool(contains_arrays(region, p.coords[None, :])[0])


def sample_region_points(region: SectorRegion, s_max: float, count: int, seed: int) -> np.ndarray:
    """Points g o delta_s(q) with q uniform in B(g~, epsilon) and log s uniform on [s_min, s_max]."""
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, region.spec.n)
    rng = np.random.default_rng(seed)
    q = group.sample_ball_arrays(region.direction, region.spec.epsilon, count, seed + 1)
    s = np.exp(rng.uniform(math.log(region.s_min), math.log(max(s_max, region.s_min)), size=count))
    return group.compose_arrays(region.base.coords, group.dilate_arrays(s, q))


# Polar sampling of the cone over the sector ---------------------------------------

@dataclass(frozen=True)
class ConeSampler:
    """Uniform sampler of B(g, R) restricted to a polar cone holding the sector.

    Every sector point is g o delta_rho(sigma) with sigma the radial projection
    of some q in B(g~, epsilon); the cone is a phase window times a cap of
    directions omega around g~'s, both padded beyond the sampled projections.
    """
    region: SectorRegion
    phi_window: Tuple[float, float]
    omega_center: np.ndarray
    cap_angle: float
    cone_measure: float
    phi_mean: float

    @classmethod
    def build(cls, region: SectorRegion, seed: int = 0, samples: int = 20000) -> "ConeSampler":
        n = region.spec.n
        group = GroupFactory.create_group(GroupMode.HEISENBERG.value, n)
        q = group.sample_ball_arrays(region.direction, region.spec.epsilon, samples, seed)
        sigma = group.dilate_arrays(1.0 / group.norm_arrays(q), q)
        phi = np.arctan2(sigma[:, -1], np.sum(sigma[:, :-1] ** 2, axis=1))
        width = float(np.max(phi) - np.min(phi))
        pad = 0.1 * width + 1e-3
        window = (max(float(np.min(phi)) - pad, -math.pi / 2), min(float(np.max(phi)) + pad, math.pi / 2))

        z0 = region.direction[:-1]
        if np.linalg.norm(z0) < 1e-12:
            omega0 = np.eye(2 * n)[0]
            cap = math.pi
        else:
            omega0 = z0 / np.linalg.norm(z0)
            zs = sigma[:, :-1]
            omega = zs / np.maximum(np.linalg.norm(zs, axis=1, keepdims=True), 1e-300)
            angle = float(np.max(np.arccos(np.clip(omega @ omega0, -1.0, 1.0))))
            cap = min(1.1 * angle + 1e-3, math.pi)

        psi = np.linspace(0.0, cap, 2049)
        density = np.sin(psi) ** (2 * n - 2)
        cap_measure = euclidean_sphere_area(2 * n - 1) * float(trapezoid(density, psi)) if n > 1 else 2.0 * cap
        phi_grid = np.linspace(window[0], window[1], 2049)
        phi_measure = float(trapezoid(np.cos(phi_grid) ** (n - 1), phi_grid))
        return cls(
            region, window, omega0, cap, phi_measure * cap_measure / group.Q, phi_measure / (window[1] - window[0])
        )

    def _directions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        d = self.omega_center.size
        psi_grid = np.linspace(0.0, self.cap_angle, 2049)
        cdf = np.concatenate([[0.0], np.cumsum(
            0.5 * (np.sin(psi_grid[1:]) ** (d - 2) + np.sin(psi_grid[:-1]) ** (d - 2)) * np.diff(psi_grid)
        )])
        psi = np.interp(rng.uniform(0.0, cdf[-1], size=count), cdf, psi_grid)
        v = rng.standard_normal((count, d))
        v -= (v @ self.omega_center)[:, None] * self.omega_center[None, :]
        v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
        return np.cos(psi)[:, None] * self.omega_center[None, :] + np.sin(psi)[:, None] * v

    def directions(self, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """Sphere points of the cone with the surface measure each one carries.

        The weights sum to Q * cone_measure in expectation.
        """
        rng = np.random.default_rng(seed)
        n = self.region.spec.n
        phi = rng.uniform(self.phi_window[0], self.phi_window[1], size=count)
        omega = self._directions(rng, count)
        sigma = np.concatenate([np.sqrt(np.cos(phi))[:, None] * omega, np.sin(phi)[:, None]], axis=1)
        weights = np.cos(phi) ** (n - 1) / self.phi_mean
        return sigma, weights * (2 * n + 2) * self.cone_measure / count

    def sample(self, R: float, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Uniform cone points of B(g, R).

        Returns:
            Tuple (points, measures, hits): coordinates, the Haar measure each
            point represents, and sector membership
        """
        n = self.region.spec.n
        Q = 2 * n + 2
        sigma, surface = self.directions(count, seed)
        rho = R * np.random.default_rng(seed + 1).uniform(0.0, 1.0, size=count) ** (1.0 / Q)
        group = GroupFactory.create_group(GroupMode.HEISENBERG.value, n)
        points = group.compose_arrays(self.region.base.coords, group.dilate_arrays(rho, sigma))
        measures = surface * R ** Q / Q
        return points, measures, contains_arrays(self.region, points)


# Certificates ------------------------------------------------------------------------

def lower_bound_verify(
    kernel: BaseKernel,
    region: SectorRegion,
    pair_count: int = 10_000,
    seed: int = 0,
    strict: bool = False,
) -> LowerBoundReport:
    """Sampled check of |K_j(g1, g2)| d_K(g1, g2)^Q >= C with constant sign.

    g1 is uniform in B(g, r); g2 runs through the sector with log-uniform
    dilations up to 100 r_o r. Both argument orders are reported.

    Raises:
        VerificationError: If strict and a sign flips or the bound is not positive
    """
    group = kernel.group
    spec = region.spec
    rng_seed = seed
    g1 = group.sample_ball_arrays(region.base.coords, region.r, pair_count, rng_seed)
    g2 = sample_region_points(region, 100.0 * region.inner_distance, pair_count, rng_seed + 7)
    weight = group.distance_arrays(g1, g2) ** group.Q
    forward = kernel.pair(g1, g2) * weight
    backward = kernel.pair(g2, g1) * weight
    sign_f, sign_b = _common_sign(forward), _common_sign(backward)
    c_f, c_b = float(np.min(np.abs(forward))), float(np.min(np.abs(backward)))
    report = LowerBoundReport(
        pair_count=pair_count,
        c_est=min(c_f, c_b),
        c_est_forward=c_f,
        c_est_backward=c_b,
        sign_forward=sign_f,
        sign_backward=sign_b,
        sign_constant=sign_f != 0 and sign_b != 0,
        predicted=0.5 * abs(spec.kernel_at_direction),
        predicted_backward=0.5 * abs(spec.kernel_at_reflection),
    )
    logger.info(
        f"Lower bound for {spec.j} at r={region.r:g}: C_est={report.c_est:.6g}, "
        f"signs ({sign_f}, {sign_b}), predicted {report.predicted:.6g}"
    )
    if strict and (not report.sign_constant or report.c_est <= 0):
        logger.error(f"Sector certificate failed for {spec.j}: {report.model_dump()}")
        raise VerificationError(f"Kernel lower bound failed on the sector for {spec.j}")
    return report


def analytic_lower_band(spec: SectorSpec) -> float:
    """|delta_{(0.99/(1+beta)) R} B(g~, epsilon)| / R^Q."""
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, spec.n)
    return group.unit_ball_volume() * (0.99 * spec.epsilon / (1.0 + spec.beta)) ** group.Q


def volume_regularity(
    region: SectorRegion,
    radii: Sequence[float],
    mc_count: int = 200_000,
    seed: int = 0,
) -> VolumeReport:
    """Monte-Carlo ratios |B(g, R) n G| / R^Q.

    Points are drawn uniformly from the part of B(g, R) lying in a polar cone
    that contains the sector, so the hit rate does not decay with the aperture.

    Raises:
        ValueError: If a radius does not exceed 2 r_o r
    """
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, region.spec.n)
    floor = 2.0 * region.inner_distance
    if any(R <= floor for R in radii):
        raise ValueError(f"Radii must exceed 2 r_o r = {floor}, got {list(radii)}")
    sampler = ConeSampler.build(region, seed)
    rows: List[VolumeRow] = []
    for k, R in enumerate(radii):
        _, measures, hits = sampler.sample(R, mc_count, seed + 101 * (k + 1))
        contrib = measures * hits * mc_count / R ** group.Q
        rows.append(VolumeRow(
            radius=float(R),
            ratio=float(np.mean(contrib)),
            std_error=float(np.std(contrib) / math.sqrt(mc_count)),
            hits=int(np.count_nonzero(hits)),
        ))
    ratios = [row.ratio for row in rows]
    band = max(ratios) / min(ratios) if min(ratios) > 0 else float("inf")
    logger.info(f"Volume ratios for {region.spec.j}: {[f'{x:.4e}' for x in ratios]} (band {band:.3f})")
    return VolumeReport(
        rows=rows,
        unit_ball_volume=group.unit_ball_volume(),
        analytic_lower_band=analytic_lower_band(region.spec),
        band_ratio=band,
    )


def infimum_distance(region: SectorRegion, count: int = 20000, seed: int = 0) -> float:
    """Smallest sampled d_K(g, g') over sector points near the inner truncation."""
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, region.spec.n)
    pts = sample_region_points(region, 1.5 * region.s_min, count, seed)
    return float(np.min(group.distance_arrays(pts, region.base.coords[None, :])))


# Export ------------------------------------------------------------------------------

def export_sector_spec(spec: SectorSpec, path: Union[str, Path]) -> Path:
    return write_json(path, spec.model_dump(mode="json"))


def load_sector_spec(path: Union[str, Path]) -> SectorSpec:
    return SectorSpec.model_validate(read_json(path))
