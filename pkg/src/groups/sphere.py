"""Polar coordinates for the homogeneous norm and unit-sphere grids.

Every g != 0 of H^n is delta_rho(sigma) with |sigma| = 1 and

    sigma = (sqrt(cos phi) * omega, sin phi),  omega in S^{2n-1},  phi in [-pi/2, pi/2],

and Haar measure splits as dg = rho^{Q-1} d rho d sigma with
d sigma = cos^{n-1}(phi) d phi d omega.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma

from src.core.base_group import BaseGroup
from src.core.points import GroupMode


def euclidean_sphere_area(dim: int) -> float:
    """Surface measure of S^{dim-1} in R^dim."""
    return float(2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0))


@dataclass(frozen=True)
class KoranyiSphereGrid:
    """Quadrature grid on the unit sphere of the homogeneous norm.

    Attributes:
        points: Sphere points, shape (M, dim)
        weights: Surface weights with sum(weights) = Q |B(0,1)|
        phi: Phase coordinate of each point (zeros in abelian mode)
        theta: Angle in the chosen (x_k, y_k) plane, NaN for random directions
        phi_step: Cell width in phi (0 for abelian grids)
        theta_step: Cell width in theta (0 when directions are random)
    """
    points: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    phi_step: float
    theta_step: float

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def build(
        cls,
        group: BaseGroup,
        phi_cells: int,
        theta_cells: int,
        plane: Optional[int] = None,
        seed: int = 0,
    ) -> "KoranyiSphereGrid":
        """Cell-centred grid on the unit sphere.

        Args:
            group: Group instance
            phi_cells: Cells along phi
            theta_cells: Cells along theta, or random directions when n >= 2
            plane: For n >= 2, restrict omega to the (x_k, y_k) plane with this
                0-based k; the result is a slice and its weights are not a
                sphere quadrature
            seed: Seed of the random directions

        Raises:
            ValueError: If a cell count is not positive
        """
        if phi_cells < 1 or theta_cells < 1:
            raise ValueError(f"Cell counts must be positive, got {phi_cells}, {theta_cells}")
        if group.mode == GroupMode.ABELIAN:
            return cls._abelian(group, theta_cells, seed)

        n = group.n
        dphi = math.pi / phi_cells
        phis = -math.pi / 2 + (np.arange(phi_cells) + 0.5) * dphi
        if n == 1 or plane is not None:
            k = 0 if plane is None else plane
            if not 0 <= k < n:
                raise ValueError(f"Plane index must be in 0..{n - 1}, got {k}")
            dtheta = 2 * math.pi / theta_cells
            thetas = (np.arange(theta_cells) + 0.5) * dtheta
            phi_g, theta_g = np.meshgrid(phis, thetas, indexing="ij")
            phi_g, theta_g = phi_g.ravel(), theta_g.ravel()
            omega = np.zeros((phi_g.size, 2 * n))
            omega[:, k] = np.cos(theta_g)
            omega[:, n + k] = np.sin(theta_g)
            weights = np.full(phi_g.size, dphi * dtheta)
        else:
            rng = np.random.default_rng(seed)
            dirs = rng.standard_normal((theta_cells, 2 * n))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            phi_g = np.repeat(phis, theta_cells)
            theta_g = np.full(phi_g.size, np.nan)
            omega = np.tile(dirs, (phi_cells, 1))
            dtheta = 0.0
            weights = (
                np.cos(phi_g) ** (n - 1) * dphi * euclidean_sphere_area(2 * n) / theta_cells
            )
        radial = np.sqrt(np.cos(phi_g))[:, None]
        points = np.concatenate([radial * omega, np.sin(phi_g)[:, None]], axis=1)
        return cls(points, weights, phi_g, theta_g, dphi, dtheta)

    @classmethod
    def _abelian(cls, group: BaseGroup, cells: int, seed: int) -> "KoranyiSphereGrid":
        n = group.n
        if n == 1:
            points = np.array([[-1.0], [1.0]])
            weights = np.ones(2)
            theta = np.array([math.pi, 0.0])
            step = 0.0
        elif n == 2:
            step = 2 * math.pi / cells
            theta = (np.arange(cells) + 0.5) * step
            points = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            weights = np.full(cells, step)
        else:
            rng = np.random.default_rng(seed)
            points = rng.standard_normal((cells, n))
            points /= np.linalg.norm(points, axis=1, keepdims=True)
            weights = np.full(cells, euclidean_sphere_area(n) / cells)
            theta = np.full(cells, np.nan)
            step = 0.0
        return cls(points, weights, np.zeros(points.shape[0]), theta, 0.0, step)
