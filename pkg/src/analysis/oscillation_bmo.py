"""Medians, mean and local oscillations, BMO norms and A_p constants on grids.

All integrals are Riemann sums over cells of equal measure. Norms are
suprema over an explicit BallFamily, which is reported with every result.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.analysis.dyadic import DyadicCube, DyadicSystem
from src.analysis.sampled import Ball, BallFamily, GridSpec, SampledFunction, Weight
from src.analysis.sector import ConeSampler, scaled_sector
from src.core.models import EFReport, NormResult, SectorSpec
from src.core.points import GroupPoint
from src.kernels.kernel_table import BaseKernel

logger = logging.getLogger(__name__)

Region = Union[np.ndarray, Ball, DyadicCube]


def default_lambda(Q: int) -> float:
    """1 / 2^{Q+2}, the level used by the oscillation norm comparison."""
    return 2.0 ** (-(Q + 2))


def region_mask(grid: GridSpec, region: Region) -> np.ndarray:
    """Flat boolean mask of a ball, a cube, a mask or an index array."""
    if isinstance(region, Ball):
        if not grid.contains_ball(region.center, region.radius):
            raise ValueError(f"Ball {region.describe()} leaves the sampling box")
        return grid.ball_mask(region.center, region.radius)
    if isinstance(region, DyadicCube):
        return region.mask(grid)
    region = np.asarray(region)
    if region.dtype == bool:
        if region.size != grid.size:
            raise ValueError(f"Mask has {region.size} entries, grid has {grid.size} cells")
        return region.ravel()
    mask = np.zeros(grid.size, dtype=bool)
    mask[region.astype(int)] = True
    return mask


def weighted_median(values: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """Smallest m with mass{v <= m} >= W/2 and mass{v >= m} >= W/2.

    Raises:
        ValueError: If there are no values
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("Median of an empty region")
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float).ravel()
    uniq, inverse = np.unique(values, return_inverse=True)
    mass = np.bincount(inverse, weights=weights)
    total = float(np.sum(mass))
    below = np.cumsum(mass)
    above = total - below + mass
    half = 0.5 * total * (1.0 - 1e-12)
    k = int(np.flatnonzero((below >= half) & (above >= half))[0])
    return float(uniq[k])


def median(b: SampledFunction, region: Region) -> float:
    """Median value of b over a region, weighted by cell measure."""
    mask = region_mask(b.grid, region)
    if not np.any(mask):
        raise ValueError("Median of an empty region")
    return weighted_median(b.flat[mask])


def mean_oscillation(b: SampledFunction, ball: Ball) -> float:
    """(1/|B|) int_B |b - b_B|."""
    vals = b.flat[region_mask(b.grid, ball)]
    if vals.size == 0:
        return 0.0
    return float(np.mean(np.abs(vals - np.mean(vals))))


def _sup(family: BallFamily, score) -> NormResult:
    best, where = 0.0, None
    for ball, mask in family:
        value = score(mask)
        if where is None or value > best:
            best, where = value, ball
    return NormResult(
        value=float(best),
        family=family.describe(),
        argmax_center=None if where is None else tuple(float(c) for c in where.center),
        argmax_radius=None if where is None else float(where.radius),
        balls_evaluated=len(family),
    )


def bmo_norm(b: SampledFunction, family: BallFamily) -> NormResult:
    """sup over the family of the mean oscillation."""
    vals = b.flat

    def score(mask: np.ndarray) -> float:
        v = vals[mask]
        return float(np.mean(np.abs(v - np.mean(v))))

    return _sup(family, score)


def bmo_norm_weighted(b: SampledFunction, nu: Weight, family: BallFamily) -> NormResult:
    """sup over the family of (1/nu(B)) int_B |b - b_B|, b_B the unweighted average."""
    vals, w, mu = b.flat, nu.flat, b.cell_measure

    def score(mask: np.ndarray) -> float:
        v = vals[mask]
        return float(np.sum(np.abs(v - np.mean(v))) * mu / (np.sum(w[mask]) * mu))

    return _sup(family, score)


def ap_constant(w: Weight, p: float, family: BallFamily) -> float:
    """[w]_{A_p} = sup_B avg_B(w) * avg_B(w^{-1/(p-1)})^{p-1}.

    Raises:
        ValueError: If p <= 1
    """
    if not p > 1:
        raise ValueError(f"A_p needs p > 1, got {p}")
    key = (float(p), repr(sorted(family.describe().items())))
    if key in w.ap_cache:
        return w.ap_cache[key]
    vals = w.flat
    dual = vals ** (-1.0 / (p - 1.0))
    result = _sup(family, lambda m: float(np.mean(vals[m]) * np.mean(dual[m]) ** (p - 1.0))).value
    w.ap_cache[key] = result
    return result


def local_mean_oscillation(f: SampledFunction, S: Region, lam: float) -> float:
    """w_lambda(f; S) = inf_c ((f - c) chi_S)^*(lambda |S|).

    The rearrangement at lambda|S| is at most alpha iff |f - c| <= alpha on
    mass >= (1 - lambda)|S|, so the infimum is half the narrowest value window
    holding ceil((1 - lambda) N) of the N cells.

    Raises:
        ValueError: If lambda is outside (0, 1)
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    vals = np.sort(f.flat[region_mask(f.grid, S)])
    count = vals.size
    if count == 0:
        return 0.0
    keep = min(count, max(1, math.ceil((1.0 - lam) * count - 1e-9)))
    widths = vals[keep - 1:] - vals[: count - keep + 1]
    return 0.5 * float(np.min(widths))


def oscillation_norm_proxy(
    b: SampledFunction, system: DyadicSystem, lam: Optional[float] = None, nu: Optional[Weight] = None
) -> NormResult:
    """sup over all cubes of w_lambda(b; S) |S| / nu(S) (nu defaults to Lebesgue)."""
    lam = default_lambda(system.group.Q) if lam is None else lam
    best, where, count = 0.0, None, 0
    for cubes in system.levels:
        for cube in cubes:
            mask = cube.mask(b.grid)
            value = local_mean_oscillation(b, mask, lam)
            if nu is not None:
                value *= np.count_nonzero(mask) * b.cell_measure / nu.measure(mask)
            count += 1
            if where is None or value > best:
                best, where = value, cube
    return NormResult(
        value=float(best),
        family={"dyadic_depth": system.depth, "grid": b.grid.descriptor(), "lambda": lam},
        argmax_center=tuple(float(c) for c in where.inner.center),
        argmax_radius=float(where.outer.radius),
        balls_evaluated=count,
    )


@dataclass(frozen=True)
class EFCertificate:
    """Sets E (grid cells of S) and F (sampled far points) with their report."""
    E_cells: np.ndarray
    F_points: np.ndarray
    F_measures: np.ndarray
    report: EFReport


def ef_sets(
    kernel: BaseKernel,
    b: SampledFunction,
    S: DyadicCube,
    spec: SectorSpec,
    k0: Optional[float] = None,
    samples: int = 20000,
    seed: int = 0,
    lam: Optional[float] = None,
) -> EFCertificate:
    """Sets E in S and F far from S on which b(g) - b(g') and K_j(g, g') keep their signs.

    F_{k0} is the part of B(c, k0 r2) inside the sector of ``spec`` based at
    the cube centre c with scale r2, sampled through its polar cone; b is
    evaluated there through ``b.source``. With m the median of b over F_{k0},
    the cells of S where |b - m| is largest (mass >= lambda |S|) are split
    into E1 (b >= m) and E2 (b < m); E1 is paired with F2 = {b <= m} and E2
    with F1 = {b >= m}, keeping the larger E.

    Raises:
        ValueError: If k0 does not exceed r_o
    """
    grid = b.grid
    group = grid.group
    Q = group.Q
    lam = default_lambda(Q) if lam is None else lam
    k0 = 2.0 * spec.r_o if k0 is None else k0
    if not k0 > spec.r_o:
        raise ValueError(f"k0 must exceed r_o = {spec.r_o}, got {k0}")

    cells = S.cell_indices(grid)
    measure_S = cells.size * grid.cell_measure
    w = local_mean_oscillation(b, cells, lam)
    if w == 0.0:
        logger.info(f"Cube at level {S.level}: b does not oscillate, trivial certificate")
        report = EFReport(
            w=0.0, median_far=float(b.flat[cells[0]]), measure_S=measure_S, measure_E=0.0, measure_F=0.0,
            product_constant=0.0, min_difference=0.0, difference_sign=0, kernel_sign=0, kernel_lower=0.0,
            properties_hold=True, k0=k0,
        )
        return EFCertificate(np.array([], dtype=int), np.empty((0, grid.dim)), np.empty(0), report)

    center, r2 = S.outer.center, S.outer.radius
    region = scaled_sector(spec, GroupPoint(center, n=grid.n, mode=grid.mode), r2)
    points, measures, hits = ConeSampler.build(region, seed).sample(k0 * r2, samples, seed + 1)
    far, far_measure = points[hits], measures[hits]
    b_far = b.evaluate(far)
    m = weighted_median(b_far, far_measure)

    b_S = b.flat[cells]
    order = np.argsort(-np.abs(b_S - m), kind="stable")
    top = cells[order[: int(math.floor(lam * cells.size)) + 1]]
    b_top = b.flat[top]
    E1, E2 = top[b_top >= m], top[b_top < m]
    if E1.size >= E2.size:
        E, F_mask = E1, b_far <= m
    else:
        E, F_mask = E2, b_far >= m
    F, F_meas = far[F_mask], far_measure[F_mask]

    E_pts = grid.centers()[E]
    diff = b.flat[E][:, None] - b_far[F_mask][None, :]
    kern = np.empty((E.size, F.shape[0]))
    dist = np.empty((E.size, F.shape[0]))
    for i, p in enumerate(E_pts):
        kern[i] = kernel.pair(p[None, :], F)
        dist[i] = group.distance_arrays(p[None, :], F)

    def sign(values: np.ndarray) -> int:
        if values.size and np.all(values > 0):
            return 1
        if values.size and np.all(values < 0):
            return -1
        return 0

    measure_E = E.size * grid.cell_measure
    measure_F = float(np.sum(F_meas))
    min_diff = float(np.min(np.abs(diff))) if diff.size else 0.0
    kernel_lower = float(np.min(np.abs(kern) * dist ** Q)) if kern.size else 0.0
    d_sign, k_sign = sign(diff), sign(kern)
    holds = min_diff >= w * (1.0 - 1e-12) and d_sign != 0 and k_sign != 0 and kernel_lower > 0
    report = EFReport(
        w=w,
        median_far=m,
        measure_S=measure_S,
        measure_E=measure_E,
        measure_F=measure_F,
        product_constant=measure_E * measure_F / (measure_S ** 2 * k0 ** Q),
        min_difference=min_diff,
        difference_sign=d_sign,
        kernel_sign=k_sign,
        kernel_lower=kernel_lower,
        properties_hold=bool(holds),
        k0=k0,
    )
    logger.info(
        f"E x F for cube level {S.level}: w={w:.4g}, |E|={measure_E:.3e}, |F|={measure_F:.3e}, "
        f"signs ({d_sign}, {k_sign}), holds={holds}"
    )
    return EFCertificate(E, F, F_meas, report)
