"""Heat kernel of the sub-Laplacian on H^n and the Gaussian on R^n.

On H^n

    p_h(z, t) = 1 / (2 (4 pi h)^{n+1}) * int_R exp((lam / 4h)(i t - |z|^2 coth lam)) (lam / sinh lam)^n d lam.

The integrand's real part is even in lam and its imaginary part odd, so the
value is (4 pi h)^{-(n+1)} times a half-line integral against cos(lam t / 4h),
done with QUADPACK's oscillatory weight; the odd part over [-Lambda, Lambda]
is kept as an internal consistency residual.

Absolute tolerances are measured in units of (4 pi h)^{-(n+1)}, the size of
p_h at the origin, so accuracy statements are dilation invariant.
"""

import logging
import math
from typing import Tuple, Union

import numpy as np
from scipy.special import gamma, gammaincc

from src.core.errors import TruncationError
from src.core.group_factory import GroupFactory
from src.core.models import HeatValue, QuadratureConfig
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.utils.quadrature import adaptive_quad

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE = QuadratureConfig()
FINITE_DIFFERENCE_QUADRATURE = {"rel_tol": 1e-13, "abs_tol": 1e-15}


def lam_coth(lam: float, guard: float) -> float:
    """lam * coth(lam) with its removable singularity filled in."""
    if abs(lam) < guard:
        l2 = lam * lam
        return 1.0 + l2 / 3.0 - l2 * l2 / 45.0
    return lam / math.tanh(lam)


def lam_over_sinh(lam: float, guard: float) -> float:
    """lam / sinh(lam), overflow-free for large |lam|."""
    a = abs(lam)
    if a < guard:
        l2 = lam * lam
        return 1.0 - l2 / 6.0 + 7.0 * l2 * l2 / 360.0
    if a > 20.0:
        e = math.exp(-a)
        return 2.0 * a * e / (1.0 - e * e)
    return lam / math.sinh(lam)


def _require_positive_time(h: float) -> None:
    if not h > 0:
        raise ValueError(f"Heat time h must be positive, got {h}")


def _heisenberg_data(g: GroupPoint, h: float) -> Tuple[int, float, float, float]:
    if not g.is_heisenberg:
        raise ValueError(f"Expected a Heisenberg point, got {g!r}")
    n = g.n
    zsq = float(np.dot(g.z, g.z))
    return n, zsq / (4.0 * h), g.t / (4.0 * h), (4.0 * math.pi * h) ** (-(n + 1))


def tail_bound(n: int, damping: float, truncation: float, extra_power: int = 0) -> float:
    """Bound of int_{|lam| > Lambda} of the absolute integrand, without the prefactor.

    Uses lam/sinh(lam) <= 2 lam e^{-lam} / (1 - e^{-2 Lambda}) for lam >= Lambda,
    lam coth(lam) >= 1, and an extra factor lam^extra_power for derivative integrands.
    """
    c = 2.0 / (1.0 - math.exp(-2.0 * truncation))
    k = n + extra_power
    moment = gammaincc(k + 1, n * truncation) * gamma(k + 1) / n ** (k + 1)
    return 2.0 * c ** n * moment * math.exp(-damping * truncation)


def heat_eval(g: GroupPoint, h: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> HeatValue:
    """Evaluate p_h(g).

    Args:
        g: Evaluation point (Heisenberg, or abelian for the Gaussian)
        h: Heat time
        cfg: Quadrature settings

    Returns:
        HeatValue with error estimate, tail bound and imaginary residual

    Raises:
        ValueError: If h <= 0
        TruncationError: If the tail beyond the configured Lambda exceeds tolerance
    """
    _require_positive_time(h)
    if g.mode == GroupMode.ABELIAN:
        return HeatValue(value=heat_eval_abelian(g.coords, h), error=0.0)

    n, a, omega, scale = _heisenberg_data(g, h)
    guard = cfg.guard_radius
    if a == 0.0:
        cfg = cfg.model_copy(update={"node_budget": 2 * cfg.node_budget})

    def envelope(lam: float) -> float:
        return math.exp(-a * lam_coth(lam, guard)) * lam_over_sinh(lam, guard) ** n

    lam_max = cfg.truncation
    if omega != 0.0:
        core, err = adaptive_quad(envelope, 0.0, lam_max, cfg, weight="cos", wvar=omega)
        odd, _ = adaptive_quad(envelope, -lam_max, lam_max, cfg, weight="sin", wvar=omega)
    else:
        core, err = adaptive_quad(envelope, 0.0, lam_max, cfg)
        odd = 0.0

    tail = tail_bound(n, a, lam_max)
    tol = max(cfg.abs_tol, cfg.rel_tol * abs(core))
    if tail > tol / 10.0:
        raise TruncationError(
            f"Tail bound {tail:.3e} beyond Lambda={lam_max} exceeds tolerance {tol:.3e} "
            f"at g={g.coords.tolist()}, h={h}"
        )

    value = scale * core
    reliable = err <= 10.0 * tol and value > 0.0
    if not reliable:
        logger.warning(f"Unreliable heat value {value:.6e} (error {scale * err:.3e}) at g={g.coords.tolist()}, h={h}")
    return HeatValue(
        value=value,
        error=scale * (err + tail),
        tail_bound=scale * tail,
        imag_residual=0.5 * scale * odd,
        reliable=reliable,
    )


def heat_eval_abelian(x: Union[np.ndarray, float], h: float) -> float:
    """Gaussian (4 pi h)^{-n/2} exp(-|x|^2 / 4h)."""
    _require_positive_time(h)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float((4.0 * math.pi * h) ** (-x.size / 2.0) * math.exp(-float(np.dot(x, x)) / (4.0 * h)))


def heat_vector_field(
    j: VectorFieldId,
    g: GroupPoint,
    h: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    method: str = "analytic",
) -> float:
    """Evaluate (X_j p_h)(g).

    Args:
        j: Field label
        g: Evaluation point
        h: Heat time
        cfg: Quadrature settings
        method: "analytic" differentiates under the integral sign; "finite-difference"
            applies central differences to heat_eval

    Returns:
        The derivative value

    Raises:
        ValueError: If h <= 0 or the method is unknown
        TruncationError: If the tail beyond Lambda exceeds tolerance
    """
    _require_positive_time(h)
    if method == "finite-difference":
        group = GroupFactory.for_point(g)
        fd_cfg = cfg.model_copy(update=FINITE_DIFFERENCE_QUADRATURE)
        return group.apply_vector_field(j, lambda p: heat_eval(p, h, fd_cfg).value, g)
    if method != "analytic":
        raise ValueError(f"Unknown method '{method}'. Supported: analytic, finite-difference")

    if g.mode == GroupMode.ABELIAN:
        return -g.coords[j.coordinate] / (2.0 * h) * heat_eval_abelian(g.coords, h)

    n, a, omega, scale = _heisenberg_data(g, h)
    guard = cfg.guard_radius
    k = j.coordinate
    xk, yk = float(g.x[k]), float(g.y[k])
    if a == 0.0:
        cfg = cfg.model_copy(update={"node_budget": 2 * cfg.node_budget})

    def cos_part(lam: float) -> float:
        lc = lam_coth(lam, guard)
        return math.exp(-a * lc) * lam_over_sinh(lam, guard) ** n * lc

    def sin_part(lam: float) -> float:
        return math.exp(-a * lam_coth(lam, guard)) * lam_over_sinh(lam, guard) ** n * lam

    lam_max = cfg.truncation
    if omega != 0.0:
        c_int, c_err = adaptive_quad(cos_part, 0.0, lam_max, cfg, weight="cos", wvar=omega)
        s_int, s_err = adaptive_quad(sin_part, 0.0, lam_max, cfg, weight="sin", wvar=omega)
    else:
        c_int, c_err = adaptive_quad(cos_part, 0.0, lam_max, cfg)
        s_int, s_err = 0.0, 0.0

    tail = tail_bound(n, a, lam_max, extra_power=1)
    tol = max(cfg.abs_tol, cfg.rel_tol * max(abs(c_int), abs(s_int)))
    if tail > tol / 10.0:
        raise TruncationError(
            f"Tail bound {tail:.3e} beyond Lambda={lam_max} exceeds tolerance {tol:.3e} "
            f"for {j} at g={g.coords.tolist()}, h={h}"
        )

    if j.is_x_type:
        combo = -xk * c_int - yk * s_int
    else:
        combo = -yk * c_int + xk * s_int
    return scale * combo / (2.0 * h)
