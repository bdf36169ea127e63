"""Riesz-transform kernels K_j of X_j (-Delta)^{-1/2} on H^n.

Two independent evaluation paths are provided:

* the closed reduction K_j(g) = c * d_K(g)^{-Q-1} F_j(g), with
  F_j = x_j A_n(i phi) - i y_j B_n(i phi) for X-type fields,
  H_j = y_j A_n(i phi) + i x_j B_n(i phi) for Y-type fields and the contour integrals

      A_n(w) = int_R [sinh(lam+w)/(lam+w)]^{1/2} cosh(lam+w) (cosh lam)^{-n-3/2} d lam,
      B_n(w) = int_R (lam+w) [sinh(lam+w)/(lam+w)]^{3/2} (cosh lam)^{-n-3/2} d lam;

* heat-kernel subordination K_j(g) = pi^{-1/2} int_0^inf h^{-1/2} (X_j p_h)(g) dh.

The single constant c is fitted by least squares against the second path.
For real phi, A_n(i phi) is real and even in phi and B_n(i phi) = i b(phi)
with b real and odd, so the raw value x_j A + y_j b is real.
"""

import cmath
import logging
import math
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import optimize
from scipy.special import gamma
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from src.core.errors import BranchError, CalibrationError, UndefinedPhaseError
from src.core.group_factory import GroupFactory
from src.core.models import (
    Calibration,
    ContourValue,
    NonvanishingReport,
    PhaseAngle,
    QuadratureConfig,
    RieszKernelValue,
    ZeroScanReport,
)
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.groups.sphere import KoranyiSphereGrid
from src.kernels.heat_kernel import DEFAULT_QUADRATURE, heat_vector_field
from src.utils.parallel import parallel_map
from src.utils.quadrature import adaptive_quad

logger = logging.getLogger(__name__)

BRANCH_MONITOR_NODES = 4001
ZERO_THRESHOLD = 1e-8
ZERO_XTOL = 1e-10
SUBORDINATION_LOWER_SPAN = 6.0
CALIBRATION_GATE = 1e-4
MIN_CALIBRATION_POINTS = 8


# Phase and contour integrals ----------------------------------------------

def phase_of(g: GroupPoint) -> PhaseAngle:
    """phi = arg(|z|^2 + i t) in [-pi/2, pi/2].

    Raises:
        UndefinedPhaseError: At the identity
    """
    if not g.is_heisenberg:
        raise ValueError("The phase is defined on the Heisenberg group only")
    if g.is_identity():
        raise UndefinedPhaseError("The phase arg(|z|^2 + i t) is undefined at the identity")
    return PhaseAngle(phi=math.atan2(g.t, float(np.dot(g.z, g.z))))


def _sinh_ratio(u: complex, guard: float) -> complex:
    if abs(u) < guard:
        return 1.0 + u * u / 6.0
    return cmath.sinh(u) / u


def _log_cosh(lam: float) -> float:
    a = abs(lam)
    return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


def _contour_integrand(kind: str, n: int, w: complex, guard: float):
    power = n + 1.5

    def integrand(lam: float) -> complex:
        u = lam + w
        root = cmath.sqrt(_sinh_ratio(u, guard))
        damping = math.exp(-power * _log_cosh(lam))
        if kind == "A":
            return root * cmath.cosh(u) * damping
        return u * root ** 3 * damping

    return integrand


def branch_continuity(w: complex, cfg: QuadratureConfig, nodes: int = BRANCH_MONITOR_NODES) -> bool:
    """True iff the argument of sinh(lam+w)/(lam+w) turns by less than pi/2 between
    adjacent monitoring nodes and never crosses the principal cut."""
    lam = np.linspace(-cfg.truncation, cfg.truncation, nodes)
    u = lam + w
    small = np.abs(u) < cfg.guard_radius
    safe_u = np.where(small, 1.0, u)
    ratio = np.where(small, 1.0 + u * u / 6.0, np.sinh(safe_u) / safe_u)
    increments = np.angle(ratio[1:] / ratio[:-1])
    if np.any(np.abs(increments) >= math.pi / 2):
        return False
    on_left = (ratio.real[1:] < 0) & (ratio.real[:-1] < 0)
    flips = np.sign(ratio.imag[1:]) * np.sign(ratio.imag[:-1]) < 0
    return not bool(np.any(on_left & flips))


def _contour(kind: str, n: int, w: complex, cfg: QuadratureConfig, strict: bool) -> ContourValue:
    if n < 1:
        raise ValueError(f"Contour integrals need n >= 1, got {n}")
    w = complex(w)
    if abs(w.imag) > math.pi / 2 + 1e-12:
        raise ValueError(f"|Im w| must be <= pi/2, got {w.imag}")
    f = _contour_integrand(kind, n, w, cfg.guard_radius)
    lam_max = cfg.truncation
    re, re_err = adaptive_quad(lambda lam: f(lam).real, -lam_max, lam_max, cfg, points=[0.0])
    im, im_err = adaptive_quad(lambda lam: f(lam).imag, -lam_max, lam_max, cfg, points=[0.0])
    # |integrand| <= (cosh lam)^{-n} / sqrt(|lam + w|) beyond Lambda
    tail = 2.0 * 2.0 ** n * math.exp(-n * lam_max) / (n * math.sqrt(max(lam_max - abs(w), 1.0)))
    continuous = branch_continuity(w, cfg)
    if not continuous:
        message = f"Square-root branch jumped along the contour for {kind}_{n}({w})"
        if strict:
            raise BranchError(message)
        logger.warning(message)
    return ContourValue(real=re, imag=im, error=re_err + im_err + tail, branch_continuous=continuous)


def contour_A(n: int, w: complex, cfg: QuadratureConfig = DEFAULT_QUADRATURE, strict: bool = False) -> ContourValue:
    """A_n(w) for |Im w| <= pi/2."""
    return _contour("A", n, w, cfg, strict)


def contour_B(n: int, w: complex, cfg: QuadratureConfig = DEFAULT_QUADRATURE, strict: bool = False) -> ContourValue:
    """B_n(w) for |Im w| <= pi/2."""
    return _contour("B", n, w, cfg, strict)


def contour_oracle(kind: str, n: int, phi: float = 0.0, dps: int = 30) -> complex:
    """A_n(i phi) or B_n(i phi) at ``dps`` digits through mpmath.

    Shares no code with :func:`contour_A`/:func:`contour_B`, so the two act as
    cross-checks of each other.
    """
    if kind not in ("A", "B"):
        raise ValueError(f"Unknown contour integral {kind!r}; expected 'A' or 'B'")
    if n < 1:
        raise ValueError(f"Contour integrals need n >= 1, got {n}")
    if abs(phi) > math.pi / 2 + 1e-12:
        raise ValueError(f"|Im w| must be <= pi/2, got {phi}")
    with mpmath.workdps(dps):
        w = mpmath.mpc(0, phi)
        power = mpmath.mpf(n) + mpmath.mpf(3) / 2

        def integrand(lam):
            u = lam + w
            ratio = mpmath.sinh(u) / u if u != 0 else mpmath.mpf(1)
            root = mpmath.sqrt(ratio)
            damping = mpmath.cosh(lam) ** (-power)
            if kind == "A":
                return root * mpmath.cosh(u) * damping
            return u * root ** 3 * damping

        value = mpmath.quad(integrand, [-mpmath.inf, 0, mpmath.inf])
    return complex(value)


@lru_cache(maxsize=8192)
def phase_pair(n: int, phi: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Tuple[complex, complex]:
    """(A_n(i phi), B_n(i phi)), cached; raises BranchError on a branch jump."""
    w = complex(0.0, phi)
    return contour_A(n, w, cfg, strict=True).value, contour_B(n, w, cfg, strict=True).value


# Formula path ------------------------------------------------------------------

def raw_from_phase(j: VectorFieldId, x_k: float, y_k: float, a_val: complex, b_val: complex) -> complex:
    """F_j (X-type) or H_j (Y-type) from the field's own coordinates and A, B."""
    if j.is_x_type:
        return x_k * a_val - 1j * y_k * b_val
    return y_k * a_val + 1j * x_k * b_val


def analytic_constant(n: int) -> float:
    """Constant of the closed reduction obtained by carrying out the subordination
    integral in closed form: -(2n+1) Gamma(n+1/2) / (4 pi^{n+3/2})."""
    return -(2 * n + 1) * float(gamma(n + 0.5)) / (4.0 * math.pi ** (n + 1.5))


def riesz_formula_eval(
    j: VectorFieldId,
    g: GroupPoint,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    calibration: Optional[Calibration] = None,
) -> RieszKernelValue:
    """Formula-path value d_K^{-Q-1} F_j(g) (or H_j), optionally calibrated.

    Raises:
        UndefinedPhaseError: At the identity
        BranchError: If the contour integrals leave the principal branch
    """
    phi = phase_of(g).phi
    group = GroupFactory.for_point(g)
    a_val, b_val = phase_pair(g.n, phi, cfg)
    k = j.coordinate
    d = group.norm(g)
    raw = raw_from_phase(j, float(g.x[k]), float(g.y[k]), a_val, b_val) * d ** (-group.Q - 1)
    calibrated = None
    cal_id = None
    if calibration is not None:
        calibrated = (calibration.constant * raw).real
        cal_id = calibration.calibration_id
    return RieszKernelValue(
        j=j.label, raw_real=raw.real, raw_imag=raw.imag, calibrated=calibrated, calibration_id=cal_id
    )


# Subordination path -----------------------------------------------------------

def riesz_subordination_eval(
    j: VectorFieldId,
    g: GroupPoint,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """K_j(g) = pi^{-1/2} int_0^inf h^{-1/2} X_j p_h(g) dh, integrated in u = log h.

    The u-window is centred at log d(g)^2; below it the heat kernel decays like
    exp(-c d^2 / h), above it the integrand decays like h^{-(Q+1)/2}.

    Raises:
        UndefinedPhaseError: At the identity
    """
    if g.is_identity():
        raise UndefinedPhaseError("The Riesz kernel is singular at the identity")
    group = GroupFactory.for_point(g)
    d = group.norm(g)
    u0 = 2.0 * math.log(d)

    def integrand(u: float) -> float:
        h = math.exp(u)
        return math.exp(0.5 * u) * heat_vector_field(j, g, h, cfg)

    outer = cfg.model_copy(update={"abs_tol": cfg.abs_tol * d ** (-group.Q), "rel_tol": max(cfg.rel_tol, 1e-11)})
    value, err = adaptive_quad(
        integrand, u0 - SUBORDINATION_LOWER_SPAN, u0 + cfg.subordination_span, outer, points=[u0]
    )
    logger.debug(f"Subordination {j} at {g.coords.tolist()}: {value:.12e} (error {err:.2e})")
    return value / math.sqrt(math.pi)


def abelian_riesz_closed_form(j: VectorFieldId, x: np.ndarray) -> np.ndarray:
    """-Gamma((n+1)/2) pi^{-(n+1)/2} x_j |x|^{-(n+1)} on points of R^n (vectorised)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    r = np.linalg.norm(x, axis=-1)
    return -gamma((n + 1) / 2.0) * math.pi ** (-(n + 1) / 2.0) * x[..., j.coordinate] * r ** (-(n + 1))


# Calibration --------------------------------------------------------------------

class _ResidualGateError(CalibrationError):
    """Fit residual above the gate; retried with tighter quadrature."""


def _fit(raw: np.ndarray, sub: np.ndarray, gate: float) -> Tuple[complex, float]:
    denom = float(np.sum(np.abs(raw) ** 2))
    if not np.isfinite(denom) or denom <= 1e-30 * max(float(np.sum(sub ** 2)), 1e-300):
        raise CalibrationError("Ill-conditioned calibration: formula values vanish on the sample")
    c = complex(np.sum(np.conj(raw) * sub) / denom)
    residual = float(np.sqrt(np.sum(np.abs(c * raw - sub) ** 2) / np.sum(sub ** 2)))
    if residual >= gate:
        raise _ResidualGateError(f"Calibration residual {residual:.3e} misses the gate {gate:.1e}")
    return c, residual


def calibrate_constant(
    j: VectorFieldId,
    sample: Sequence[GroupPoint],
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    gate: float = CALIBRATION_GATE,
    workers: Optional[int] = 1,
) -> Calibration:
    """Least-squares constant c* with c* raw(g) ~ subordination(g).

    Each retry tightens the quadrature tolerances a hundredfold.

    Args:
        j: Field label
        sample: At least 8 points away from the identity
        cfg: Quadrature settings of the first attempt
        gate: Maximal relative residual
        workers: Threads for the per-point evaluations

    Returns:
        Immutable calibration record

    Raises:
        ValueError: If the sample is too small or contains the identity
        CalibrationError: If the fit is ill-conditioned or never meets the gate
    """
    sample = list(sample)
    if len(sample) < MIN_CALIBRATION_POINTS:
        raise ValueError(f"Calibration needs at least {MIN_CALIBRATION_POINTS} points, got {len(sample)}")
    if any(g.is_identity() for g in sample):
        raise ValueError("Calibration sample must avoid the identity")

    state: Dict[str, object] = {}
    for attempt in Retrying(
        stop=stop_after_attempt(cfg.max_attempts),
        retry=retry_if_exception_type(_ResidualGateError),
        reraise=True,
    ):
        with attempt:
            factor = 100.0 ** (attempt.retry_state.attempt_number - 1)
            local = cfg.model_copy(update={"abs_tol": cfg.abs_tol / factor, "rel_tol": max(cfg.rel_tol / factor, 1e-14)})
            raw = np.array([riesz_formula_eval(j, g, local).raw for g in sample])
            sub = np.array(parallel_map(lambda g: riesz_subordination_eval(j, g, local), sample, workers))
            state["constant"], state["residual"] = _fit(raw, sub, gate)

    constant = state["constant"]
    record = Calibration(
        n=sample[0].n,
        j=j.label,
        constant_real=constant.real,
        constant_imag=constant.imag,
        residual=state["residual"],
        sample_size=len(sample),
        method="fitted",
    )
    logger.info(
        f"Calibrated {j.label} on n={record.n}: c*={constant:.10g}, residual={record.residual:.2e}, "
        f"analytic={analytic_constant(record.n):.10g}"
    )
    return record


def analytic_calibration(n: int, j: VectorFieldId) -> Calibration:
    """Calibration record carrying the closed-form constant instead of a fit."""
    return Calibration(n=n, j=j.label, constant_real=analytic_constant(n), method="analytic")


def default_calibration_sample(n: int, count: int = 8, seed: int = 7) -> List[GroupPoint]:
    """Deterministic points on the unit Korányi sphere, away from the centre axis."""
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < count:
        phi = rng.uniform(-1.2, 1.2)
        omega = rng.standard_normal(2 * n)
        omega /= np.linalg.norm(omega)
        coords = np.concatenate([math.sqrt(math.cos(phi)) * omega, [math.sin(phi)]])
        points.append(GroupPoint(coords, n=n))
    return points


@lru_cache(maxsize=32)
def _fitted_default(n: int, label: str, cfg: QuadratureConfig) -> Calibration:
    j = VectorFieldId.parse(label, n)
    return calibrate_constant(j, default_calibration_sample(n), cfg)


def default_calibration(j: VectorFieldId, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Calibration:
    """Constant fitted on the default sample, computed once per (n, j, cfg).

    The closed form stays available through analytic_calibration and is logged next to
    every fit as a cross-check.
    """
    return _fitted_default(j.n, j.label, cfg)


# Zero scan and non-vanishing ------------------------------------------------------

def _a_real(n: int, phi: float, cfg: QuadratureConfig) -> float:
    return phase_pair(n, float(phi), cfg)[0].real


def zero_scan(n: int, grid: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> ZeroScanReport:
    """Zeros of phi -> A_n(i phi) on [-pi/2, pi/2].

    Sign changes between grid nodes are refined by bisection to 1e-10 in phi;
    touching zeros (local minima of |A| without a sign change) are refined by
    bounded minimisation and kept when below the threshold.

    Raises:
        ValueError: If grid < 64
        BranchError: If any scan node leaves the principal branch
    """
    if grid < 64:
        raise ValueError(f"Zero scan needs grid >= 64, got {grid}")
    phis = np.linspace(-math.pi / 2, math.pi / 2, grid + 1)
    values = np.array([_a_real(n, p, cfg) for p in phis])
    scan_max = float(np.max(np.abs(values)))
    threshold = ZERO_THRESHOLD * scan_max
    f = lambda p: _a_real(n, p, cfg)

    zeros: List[float] = []
    for k in range(grid):
        lo, hi = phis[k], phis[k + 1]
        if abs(values[k]) <= threshold:
            zeros.append(float(lo))
        elif values[k] * values[k + 1] < 0:
            zeros.append(float(optimize.bisect(f, lo, hi, xtol=ZERO_XTOL)))
        elif 0 < k and abs(values[k]) < abs(values[k - 1]) and abs(values[k]) < abs(values[k + 1]):
            res = optimize.minimize_scalar(
                lambda p: abs(f(p)), bounds=(phis[k - 1], hi), method="bounded", options={"xatol": ZERO_XTOL}
            )
            if res.fun <= threshold:
                zeros.append(float(res.x))
    if abs(values[-1]) <= threshold:
        zeros.append(float(phis[-1]))

    unique: List[float] = []
    for z in sorted(zeros):
        if not unique or abs(z - unique[-1]) > 1e-8:
            unique.append(z)
    logger.info(f"Zero scan of A_{n}(i phi) on {grid} cells: {len(unique)} zero(s)")
    return ZeroScanReport(n=n, grid=grid, zeros=unique, scan_max=scan_max, threshold=threshold)


def _sphere_raw(j: VectorFieldId, n: int, phi: np.ndarray, theta: np.ndarray, cfg: QuadratureConfig) -> np.ndarray:
    """Raw kernel on the unit sphere slice through the (x_k, y_k) plane."""
    pairs = [phase_pair(n, float(p), cfg) for p in phi.ravel()]
    a_val = np.array([p[0].real for p in pairs]).reshape(phi.shape)
    b_val = np.array([p[1].imag for p in pairs]).reshape(phi.shape)
    radial = np.sqrt(np.clip(np.cos(phi), 0.0, None))
    x_k = radial * np.cos(theta)
    y_k = radial * np.sin(theta)
    if j.is_x_type:
        return x_k * a_val + y_k * b_val
    return y_k * a_val - x_k * b_val


def _twisted_angles(j: VectorFieldId, n: int, phi: float, cfg: QuadratureConfig) -> Tuple[float, float]:
    a_val, b_val = phase_pair(n, float(phi), cfg)
    a, b = a_val.real, b_val.imag
    base = math.atan2(-a, b) if j.is_x_type else math.atan2(b, a)
    base %= 2 * math.pi
    return base, (base + math.pi) % (2 * math.pi)


def _angle_within(angle: float, lo: float, hi: float) -> bool:
    two_pi = 2 * math.pi
    return any(lo <= angle + shift <= hi for shift in (-two_pi, 0.0, two_pi))


def nonvanishing_report(
    j: VectorFieldId,
    sphere_grid: int,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    threshold: float = 1e-6,
    zeros: Optional[Sequence[float]] = None,
) -> NonvanishingReport:
    """Near-zero cells of K_j on the unit Korányi sphere.

    A cell is near-zero when the kernel changes sign among its corners or its
    centre value is below threshold * max. Each flagged cell is attributed to
    the phase levels {phi_l} (zeros of A_n), the coordinate zero set
    x_j = y_j = 0 (the poles phi = +-pi/2 of the slice), or the twisted curve
    x_j A_n(i phi) + y_j b(phi) = 0 of the fixed-phase argument; cells near
    none of these are counted as unexplained. For n >= 2 the grid is the slice
    through the field's own (x_k, y_k) plane.

    Raises:
        ValueError: If sphere_grid < 32
    """
    if sphere_grid < 32:
        raise ValueError(f"Sphere grid needs at least 32 cells per axis, got {sphere_grid}")
    n = j.n
    group = GroupFactory.create_group(GroupMode.HEISENBERG.value, n)
    grid = KoranyiSphereGrid.build(group, sphere_grid, sphere_grid, plane=j.coordinate if n > 1 else None)
    dphi, dtheta = grid.phi_step, grid.theta_step
    phi_edges = -math.pi / 2 + np.arange(sphere_grid + 1) * dphi
    theta_edges = np.arange(sphere_grid + 1) * dtheta

    centers = _sphere_raw(j, n, grid.phi.reshape(sphere_grid, sphere_grid), grid.theta.reshape(sphere_grid, sphere_grid), cfg)
    pe, te = np.meshgrid(phi_edges, theta_edges, indexing="ij")
    corners = _sphere_raw(j, n, pe, te, cfg)
    scale = float(np.max(np.abs(centers)))
    signs = np.sign(corners)
    changes = (
        (signs[:-1, :-1] != signs[1:, :-1])
        | (signs[:-1, :-1] != signs[:-1, 1:])
        | (signs[:-1, :-1] != signs[1:, 1:])
    )
    flagged = changes | (np.abs(centers) < threshold * scale)

    if zeros is None:
        zeros = zero_scan(n, max(64, sphere_grid), cfg).zeros
    counts = {"phase_zero": 0, "coordinate_zero": 0, "twisted_curve": 0, "unexplained": 0}
    cells: List[Tuple[float, float]] = []
    for p_idx, t_idx in zip(*np.nonzero(flagged)):
        lo_p, hi_p = phi_edges[p_idx], phi_edges[p_idx + 1]
        lo_t, hi_t = theta_edges[t_idx] - dtheta, theta_edges[t_idx + 1] + dtheta
        cells.append((float(0.5 * (lo_p + hi_p)), float(0.5 * (lo_t + hi_t))))
        if any(lo_p - dphi <= z <= hi_p + dphi for z in zeros):
            counts["phase_zero"] += 1
        elif p_idx == 0 or p_idx == sphere_grid - 1:
            counts["coordinate_zero"] += 1
        elif any(
            _angle_within(angle, lo_t, hi_t)
            for p in (lo_p, 0.5 * (lo_p + hi_p), hi_p)
            for angle in _twisted_angles(j, n, p, cfg)
        ):
            counts["twisted_curve"] += 1
        else:
            counts["unexplained"] += 1

    fraction = float(np.count_nonzero(flagged)) / flagged.size
    logger.info(f"Non-vanishing scan for {j.label} on a {sphere_grid}^2 grid: near-zero fraction {fraction:.4e}")
    return NonvanishingReport(
        j=j.label,
        grid=sphere_grid,
        threshold=threshold,
        near_zero_fraction=fraction,
        near_zero_cells=cells,
        locus_counts=counts,
        zeros=list(zeros),
    )
