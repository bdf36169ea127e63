"""Abstract base class for the groups the toolkit computes on."""

import logging
from abc import ABC, abstractmethod
from typing import Callable, List, Union

import numpy as np

from .errors import EvaluationError
from .models import GroupMetricInfo
from .points import GroupMode, GroupPoint, VectorFieldId, coordinate_dim

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, List[float]]


class BaseGroup(ABC):
    """Interface every group instance implements.

    Points travel either as :class:`GroupPoint` objects (the public API) or as
    float arrays of shape (..., dim) for vectorised work; the abstract methods
    are the array forms and the point forms are derived from them here.

    Attributes:
        n: Dimension parameter
    """

    def __init__(self, n: int):
        """Initialize the group.

        Args:
            n: Dimension parameter (n >= 1)

        Raises:
            ValueError: If n < 1
        """
        if n < 1:
            raise ValueError(f"Group dimension n must be >= 1, got {n}")
        self.n = n

    # Array forms --------------------------------------------------------

    @abstractmethod
    def compose_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Group law on coordinate arrays of shape (..., dim)."""

    @abstractmethod
    def inverse_arrays(self, a: np.ndarray) -> np.ndarray:
        """Inversion on coordinate arrays."""

    @abstractmethod
    def dilate_arrays(self, lam: Union[float, np.ndarray], a: np.ndarray) -> np.ndarray:
        """Dilation delta_lam; lam may broadcast against the leading axes of a."""

    @abstractmethod
    def norm_arrays(self, a: np.ndarray) -> np.ndarray:
        """Homogeneous norm of each point."""

    @abstractmethod
    def field_coefficients(self, j: VectorFieldId, a: np.ndarray) -> np.ndarray:
        """Coefficients of the field j in the coordinate frame at each point, shape (..., dim)."""

    @abstractmethod
    def field_curve(self, j: VectorFieldId, s: float) -> np.ndarray:
        """The point exp(s X_j), so that s -> g o exp(s X_j) is an integral curve through g."""

    @abstractmethod
    def ball_half_widths(self, r: float) -> np.ndarray:
        """Half-widths of the coordinate box enclosing B(0, r)."""

    @abstractmethod
    def unit_ball_volume(self) -> float:
        """Lebesgue measure of B(0, 1) in coordinates."""

    @property
    @abstractmethod
    def mode(self) -> GroupMode:
        """Which group this is."""

    @property
    @abstractmethod
    def Q(self) -> int:
        """Homogeneous dimension."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Human-readable group name."""

    # Derived array helpers ----------------------------------------------

    @property
    def dim(self) -> int:
        return coordinate_dim(self.n, self.mode)

    def distance_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """d(a, b) = |b^{-1} o a| elementwise."""
        return self.norm_arrays(self.compose_arrays(self.inverse_arrays(b), a))

    def ball_volume(self, r: float) -> float:
        return self.unit_ball_volume() * r ** self.Q

    def sample_ball_arrays(self, center: np.ndarray, r: float, count: int, seed: int) -> np.ndarray:
        """Uniform points of B(center, r) as an array of shape (count, dim).

        Points are drawn from the coordinate box around B(0, r), rejected
        outside the ball and left-translated by ``center``; left translation
        preserves Haar measure, so the result is uniform on B(center, r).
        """
        if r <= 0:
            raise ValueError(f"Ball radius must be positive, got {r}")
        if count < 0:
            raise ValueError(f"Sample count must be non-negative, got {count}")
        out = np.empty((count, self.dim))
        if count == 0:
            return out
        rng = np.random.default_rng(seed)
        half = self.ball_half_widths(r)
        filled = 0
        while filled < count:
            batch = max(64, int(1.5 * (count - filled) / self.acceptance_fraction()) + 16)
            cand = rng.uniform(-half, half, size=(batch, self.dim))
            keep = cand[self.norm_arrays(cand) < r]
            take = min(keep.shape[0], count - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return self.compose_arrays(np.asarray(center, dtype=float), out)

    def acceptance_fraction(self) -> float:
        """|B(0,1)| over the volume of its enclosing coordinate box."""
        return self.unit_ball_volume() / float(np.prod(2.0 * self.ball_half_widths(1.0)))

    # Point forms ----------------------------------------------------------

    def _check(self, *points: GroupPoint) -> None:
        for p in points:
            if p.mode != self.mode or p.n != self.n:
                raise ValueError(
                    f"Point {p!r} does not belong to {self.name} (mode={self.mode.value}, n={self.n})"
                )

    def point(self, coords: ArrayLike) -> GroupPoint:
        return GroupPoint(np.asarray(coords, dtype=float), n=self.n, mode=self.mode)

    def identity(self) -> GroupPoint:
        return GroupPoint.identity(self.n, self.mode)

    def compose(self, g: GroupPoint, h: GroupPoint) -> GroupPoint:
        self._check(g, h)
        return self.point(self.compose_arrays(g.coords, h.coords))

    def inverse(self, g: GroupPoint) -> GroupPoint:
        self._check(g)
        return self.point(self.inverse_arrays(g.coords))

    def dilate(self, lam: float, g: GroupPoint) -> GroupPoint:
        if not lam > 0:
            raise ValueError(f"Dilation factor must be positive, got {lam}")
        self._check(g)
        return self.point(self.dilate_arrays(lam, g.coords))

    def norm(self, g: GroupPoint) -> float:
        self._check(g)
        return float(self.norm_arrays(g.coords))

    def distance(self, g: GroupPoint, h: GroupPoint) -> float:
        self._check(g, h)
        return float(self.distance_arrays(g.coords, h.coords))

    def sample_ball(self, center: GroupPoint, r: float, count: int, seed: int) -> List[GroupPoint]:
        self._check(center)
        return [self.point(row) for row in self.sample_ball_arrays(center.coords, r, count, seed)]

    def apply_vector_field(
        self,
        j: VectorFieldId,
        f: Callable[[GroupPoint], float],
        g: GroupPoint,
        step: float = None,
        method: str = "coordinate",
    ) -> float:
        """Central-difference value of X_j f at g.

        Args:
            j: Field label
            f: Function of a point
            g: Evaluation point
            step: Difference step; defaults to 1e-5 * max(1, |g|)
            method: "coordinate" (frame coefficients times partial derivatives)
                or "curve" (derivative along s -> g o exp(s X_j)); both are O(step^2)

        Returns:
            Approximation of (X_j f)(g)

        Raises:
            ValueError: If step <= 0 or method is unknown
            EvaluationError: If f returns a non-finite value
        """
        self._check(g)
        if j.n != self.n or j.mode != self.mode:
            raise ValueError(f"Field {j} does not belong to {self.name}")
        if step is None:
            step = 1e-5 * max(1.0, self.norm(g))
        if not step > 0:
            raise ValueError(f"Difference step must be positive, got {step}")

        def value(coords: np.ndarray) -> float:
            out = float(f(self.point(coords)))
            if not np.isfinite(out):
                raise EvaluationError(f"Function returned {out} at {coords.tolist()}")
            return out

        if method == "curve":
            forward = self.compose_arrays(g.coords, self.field_curve(j, step))
            backward = self.compose_arrays(g.coords, self.field_curve(j, -step))
            return (value(forward) - value(backward)) / (2.0 * step)
        if method != "coordinate":
            raise ValueError(f"Unknown differentiation method '{method}'. Supported: coordinate, curve")

        total = 0.0
        coeffs = self.field_coefficients(j, g.coords)
        for axis in np.flatnonzero(coeffs):
            e = np.zeros(self.dim)
            e[axis] = step
            partial = (value(g.coords + e) - value(g.coords - e)) / (2.0 * step)
            total += coeffs[axis] * partial
        return total

    def metric_info(self, quasi_triangle_constant: float) -> GroupMetricInfo:
        return GroupMetricInfo(n=self.n, Q=self.Q, quasi_triangle_constant=quasi_triangle_constant)

    def __repr__(self) -> str:
        """String representation of the group."""
        return f"{self.__class__.__name__}(n={self.n}, Q={self.Q})"
