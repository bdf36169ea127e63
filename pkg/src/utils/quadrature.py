"""Adaptive quadrature with an escalating node budget, plus fixed Gauss panels."""

import logging
import warnings
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from src.core.errors import QuadratureError
from src.core.models import QuadratureConfig

logger = logging.getLogger(__name__)


def _tolerance(value: float, cfg: QuadratureConfig, slack: float) -> float:
    return slack * max(cfg.abs_tol, cfg.rel_tol * abs(value))


def adaptive_quad(
    func: Callable[[float], float],
    a: float,
    b: float,
    cfg: QuadratureConfig,
    weight: Optional[str] = None,
    wvar: Optional[float] = None,
    points: Optional[Sequence[float]] = None,
    strict: bool = False,
    slack: float = 10.0,
) -> Tuple[float, float]:
    """Integrate func over [a, b] with scipy's QUADPACK wrapper.

    Each attempt doubles the subinterval limit; an attempt whose error
    estimate exceeds ``slack`` times the configured tolerance is retried.

    Args:
        func: Real integrand
        a: Lower limit
        b: Upper limit
        cfg: Tolerances and base node budget
        weight: Optional QUADPACK weight ("cos" or "sin" for oscillatory factors)
        wvar: Frequency of the weight
        points: Optional breakpoints (not combinable with a weight)
        strict: Raise QuadratureError after the last attempt instead of returning
        slack: Multiple of the tolerance accepted as converged

    Returns:
        Tuple of (value, error estimate)

    Raises:
        QuadratureError: If strict and no attempt converged
    """
    last = {"value": 0.0, "error": np.inf}
    kwargs = {"epsabs": cfg.abs_tol, "epsrel": cfg.rel_tol}
    if weight is not None:
        kwargs.update(weight=weight, wvar=wvar)
    elif points is not None:
        kwargs["points"] = list(points)

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(cfg.max_attempts),
            retry=retry_if_exception_type(QuadratureError),
            reraise=True,
        ):
            with attempt:
                limit = cfg.node_budget * 2 ** (attempt.retry_state.attempt_number - 1)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    value, error = integrate.quad(func, a, b, limit=limit, **kwargs)
                last.update(value=value, error=error)
                if not np.isfinite(value) or error > _tolerance(value, cfg, slack):
                    raise QuadratureError(
                        f"Quadrature on [{a:.6g}, {b:.6g}] reached error {error:.3e} "
                        f"for value {value:.6e} with limit {limit}"
                    )
    except QuadratureError:
        if strict:
            raise
        logger.warning(
            f"Quadrature on [{a:.6g}, {b:.6g}] did not reach tolerance "
            f"(value={last['value']:.6e}, error={last['error']:.3e})"
        )
    return float(last["value"]), float(last["error"])


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [a, b].

    Args:
        a: Left end
        b: Right end
        panels: Number of equal panels
        order: Nodes per panel

    Returns:
        Tuple of (nodes, weights), both of length panels * order
    """
    if panels < 1 or order < 1:
        raise ValueError(f"Panels and order must be positive, got {panels}, {order}")
    ref_nodes, ref_weights = special.roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights
