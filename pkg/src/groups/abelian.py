"""Euclidean R^n exposed through the group interface.

It is the step-one instance with classical closed-form kernels and serves
as the oracle for the Heisenberg code paths.
"""

import logging
import math
from typing import Union

import numpy as np
from scipy.special import gamma

from src.core.base_group import BaseGroup
from src.core.points import GroupMode, VectorFieldId

logger = logging.getLogger(__name__)


class AbelianGroup(BaseGroup):
    """R^n with addition, isotropic dilations and the Euclidean norm (Q = n)."""

    def __init__(self, n: int = 1):
        super().__init__(n)
        logger.debug(f"AbelianGroup initialized with n={n}")

    @property
    def mode(self) -> GroupMode:
        return GroupMode.ABELIAN

    @property
    def Q(self) -> int:
        return self.n

    @property
    def name(self) -> str:
        return f"Euclidean space R^{self.n}"

    def compose_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)

    def inverse_arrays(self, a: np.ndarray) -> np.ndarray:
        return -np.asarray(a, dtype=float)

    def dilate_arrays(self, lam: Union[float, np.ndarray], a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) * np.asarray(lam, dtype=float)[..., None]

    def norm_arrays(self, a: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)

    def field_coefficients(self, j: VectorFieldId, a: np.ndarray) -> np.ndarray:
        coeffs = np.zeros(self.dim)
        coeffs[j.coordinate] = 1.0
        return coeffs

    def field_curve(self, j: VectorFieldId, s: float) -> np.ndarray:
        out = np.zeros(self.dim)
        out[j.coordinate] = s
        return out

    def ball_half_widths(self, r: float) -> np.ndarray:
        return np.full(self.n, float(r))

    def unit_ball_volume(self) -> float:
        return float(math.pi ** (self.n / 2.0) / gamma(self.n / 2.0 + 1.0))
