"""Vectorised Riesz kernels for bulk work.

The formula path needs A_n(i phi) and b(phi) = Im B_n(i phi) at the phase of
every evaluation point. For grids with 10^5 cells this is done through
cubic-spline tables of both functions on [-pi/2, pi/2]; single points can
still go through :func:`src.kernels.riesz_kernel.riesz_formula_eval`.
"""

import logging
import math
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from src.core.base_group import BaseGroup
from src.core.group_factory import GroupFactory
from src.core.models import Calibration, QuadratureConfig
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.kernels.heat_kernel import DEFAULT_QUADRATURE
from src.kernels.riesz_kernel import abelian_riesz_closed_form, default_calibration, phase_pair

logger = logging.getLogger(__name__)


class PhaseTable:
    """Cubic splines of phi -> A_n(i phi) (even) and phi -> b(phi) (odd).

    Only the nodes with phi >= 0 are integrated; the rest follow by symmetry.

    Attributes:
        n: Group dimension
        nodes: Spline nodes on [-pi/2, pi/2]
    """

    def __init__(self, n: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE):
        count = cfg.table_nodes if cfg.table_nodes % 2 == 1 else cfg.table_nodes + 1
        self.n = n
        self.nodes = np.linspace(-math.pi / 2, math.pi / 2, count)
        half = count // 2
        a_half = np.empty(half + 1)
        b_half = np.empty(half + 1)
        for k, phi in enumerate(self.nodes[half:]):
            a_val, b_val = phase_pair(n, float(phi), cfg)
            a_half[k], b_half[k] = a_val.real, b_val.imag
        b_half[0] = 0.0
        a_vals = np.concatenate([a_half[:0:-1], a_half])
        b_vals = np.concatenate([-b_half[:0:-1], b_half])
        self._a = CubicSpline(self.nodes, a_vals)
        self._b = CubicSpline(self.nodes, b_vals)
        logger.info(f"Phase table for n={n} built on {count} nodes")

    def a(self, phi: np.ndarray) -> np.ndarray:
        return self._a(np.clip(phi, -math.pi / 2, math.pi / 2))

    def b(self, phi: np.ndarray) -> np.ndarray:
        return self._b(np.clip(phi, -math.pi / 2, math.pi / 2))


@lru_cache(maxsize=16)
def phase_table(n: int, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> PhaseTable:
    return PhaseTable(n, cfg)


class BaseKernel(ABC):
    """Interface of a real convolution kernel K_j on a group.

    ``values`` works on coordinate arrays; the two-point kernel is
    K_j(g1, g2) = K_j(g2^{-1} o g1). Values at the identity are 0.

    Attributes:
        group: Group the kernel lives on
        j: Field label
    """

    def __init__(self, group: BaseGroup, j: VectorFieldId):
        if j.n != group.n or j.mode != group.mode:
            raise ValueError(f"Field {j} does not belong to {group.name}")
        self.group = group
        self.j = j

    @abstractmethod
    def values(self, points: np.ndarray) -> np.ndarray:
        """K_j at each row of an (N, dim) array."""

    @property
    @abstractmethod
    def calibration_id(self) -> str:
        """Identifier of the normalisation in use."""

    def pair(self, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
        """K_j(g1, g2) for broadcastable coordinate arrays; the result drops the last axis."""
        g1, g2 = np.broadcast_arrays(np.asarray(g1, dtype=float), np.asarray(g2, dtype=float))
        diff = self.group.compose_arrays(self.group.inverse_arrays(g2), g1)
        return self.values(diff.reshape(-1, self.group.dim)).reshape(diff.shape[:-1])

    def __call__(self, g: GroupPoint) -> float:
        return float(self.values(np.atleast_2d(g.coords))[0])

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.j.label}, {self.group.name}, {self.calibration_id})"


class CalibratedKernel(BaseKernel):
    """c* d_K^{-Q-1} F_j (or H_j) evaluated through a phase table."""

    def __init__(
        self,
        n: int,
        j: VectorFieldId,
        calibration: Optional[Calibration] = None,
        cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    ):
        super().__init__(GroupFactory.create_group(GroupMode.HEISENBERG.value, n), j)
        self.calibration = calibration or default_calibration(j, cfg)
        if self.calibration.n != n or self.calibration.j != j.label:
            raise ValueError(
                f"Calibration for {self.calibration.j} on n={self.calibration.n} "
                f"does not match {j.label} on n={n}"
            )
        self.table = phase_table(n, cfg)

    @property
    def calibration_id(self) -> str:
        return self.calibration.calibration_id

    def phases(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        zsq = np.sum(points[:, : 2 * self.group.n] ** 2, axis=1)
        return np.arctan2(points[:, -1], zsq)

    def raw_values(self, points: np.ndarray) -> np.ndarray:
        """d_K^{-Q-1} (x_j A + y_j b) for X-type, d_K^{-Q-1} (y_j A - x_j b) for Y-type."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.group.n
        k = self.j.coordinate
        d = self.group.norm_arrays(points)
        phi = self.phases(points)
        a_val, b_val = self.table.a(phi), self.table.b(phi)
        xk, yk = points[:, k], points[:, n + k]
        combo = xk * a_val + yk * b_val if self.j.is_x_type else yk * a_val - xk * b_val
        out = np.zeros(points.shape[0])
        nz = d > 0
        out[nz] = combo[nz] * d[nz] ** (-self.group.Q - 1)
        return out

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.calibration.constant_real * self.raw_values(points)

    def export_rows(self, points: np.ndarray) -> Tuple[List[str], List[List[float]]]:
        """Kernel-table rows (x..., y..., t, phi, Re raw, Im raw, calibrated)."""
        points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, self.group.dim)
        n = self.group.n
        header = [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
        header += ["t", "phi", "raw_real", "raw_imag", "calibrated"]
        if points.shape[0] == 0:
            return header, []
        raw = self.raw_values(points)
        phi = self.phases(points)
        cal = self.values(points)
        rows = [list(p) + [f, r, 0.0, c] for p, f, r, c in zip(points.tolist(), phi, raw, cal)]
        return header, rows


class AbelianKernel(BaseKernel):
    """Euclidean Riesz kernel -Gamma((n+1)/2) pi^{-(n+1)/2} x_j |x|^{-(n+1)}."""

    def __init__(self, n: int, j: VectorFieldId):
        super().__init__(GroupFactory.create_group(GroupMode.ABELIAN.value, n), j)

    @property
    def calibration_id(self) -> str:
        return "closed-form"

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(points, axis=1)
        out = np.zeros(points.shape[0])
        nz = r > 0
        out[nz] = abelian_riesz_closed_form(self.j, points[nz])
        return out

    def export_rows(self, points: np.ndarray) -> Tuple[List[str], List[List[float]]]:
        points = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, self.group.dim)
        header = [f"x{i + 1}" for i in range(self.group.n)] + ["kernel"]
        if points.shape[0] == 0:
            return header, []
        return header, [list(p) + [v] for p, v in zip(points.tolist(), self.values(points))]


def build_kernel(
    mode: str,
    n: int,
    j: VectorFieldId,
    calibration: Optional[Calibration] = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> BaseKernel:
    """Kernel instance for a mode; Heisenberg kernels default to the fitted constant."""
    if GroupMode(mode) == GroupMode.ABELIAN:
        return AbelianKernel(n, j)
    return CalibratedKernel(n, j, calibration, cfg)
