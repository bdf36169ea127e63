"""The Heisenberg group H^n with the Korányi norm."""

import logging
import math
from typing import Union

import numpy as np
from scipy.special import beta as beta_fn, gamma

from src.core.base_group import BaseGroup
from src.core.points import GroupMode, VectorFieldId

logger = logging.getLogger(__name__)


class HeisenbergGroup(BaseGroup):
    """H^n = R^{2n} x R with law

        [x,y,t] o [x',y',t'] = [x+x', y+y', t+t' + 2<y,x'> - 2<x,y'>],

    dilations delta_lam[x,y,t] = [lam x, lam y, lam^2 t], homogeneous
    dimension Q = 2n+2 and Korányi norm (|z|^4 + t^2)^{1/4}.

    Example:
        group = HeisenbergGroup(1)
        group.compose_arrays(np.array([1., 0., 0.]), np.array([0., 1., 0.]))
        # array([ 1.,  1., -2.])
    """

    def __init__(self, n: int = 1):
        super().__init__(n)
        logger.debug(f"HeisenbergGroup initialized with n={n}")

    @property
    def mode(self) -> GroupMode:
        return GroupMode.HEISENBERG

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def name(self) -> str:
        return f"Heisenberg group H^{self.n}"

    def split(self, a: np.ndarray):
        """Views (x, y, t) of a coordinate array."""
        a = np.asarray(a, dtype=float)
        n = self.n
        return a[..., :n], a[..., n:2 * n], a[..., 2 * n]

    def horizontal_sq(self, a: np.ndarray) -> np.ndarray:
        """|z|^2 = sum of x_j^2 + y_j^2."""
        a = np.asarray(a, dtype=float)
        return np.sum(a[..., :2 * self.n] ** 2, axis=-1)

    def compose_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        xa, ya, ta = self.split(a)
        xb, yb, tb = self.split(b)
        x = xa + xb
        y = ya + yb
        t = ta + tb + 2.0 * np.sum(ya * xb, axis=-1) - 2.0 * np.sum(xa * yb, axis=-1)
        return np.concatenate([x, y, t[..., None]], axis=-1)

    def inverse_arrays(self, a: np.ndarray) -> np.ndarray:
        return -np.asarray(a, dtype=float)

    def dilate_arrays(self, lam: Union[float, np.ndarray], a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        lam = np.asarray(lam, dtype=float)[..., None]
        scale = np.concatenate(
            [np.broadcast_to(lam, lam.shape[:-1] + (2 * self.n,)), lam ** 2], axis=-1
        )
        return a * scale

    def norm_arrays(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return (self.horizontal_sq(a) ** 2 + a[..., 2 * self.n] ** 2) ** 0.25

    def field_coefficients(self, j: VectorFieldId, a: np.ndarray) -> np.ndarray:
        x, y, _ = self.split(a)
        coeffs = np.zeros(self.dim)
        k = j.coordinate
        if j.is_x_type:
            coeffs[k] = 1.0
            coeffs[-1] = 2.0 * y[k]
        else:
            coeffs[self.n + k] = 1.0
            coeffs[-1] = -2.0 * x[k]
        return coeffs

    def field_curve(self, j: VectorFieldId, s: float) -> np.ndarray:
        out = np.zeros(self.dim)
        out[j.coordinate if j.is_x_type else self.n + j.coordinate] = s
        return out

    def ball_half_widths(self, r: float) -> np.ndarray:
        return np.concatenate([np.full(2 * self.n, float(r)), [float(r) ** 2]])

    def unit_ball_volume(self) -> float:
        # integral over |z| < 1 of 2 sqrt(1 - |z|^4) in polar coordinates of R^{2n}
        n = self.n
        return float(math.pi ** n * beta_fn(n / 2.0, 1.5) / gamma(n))
