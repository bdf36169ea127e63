"""Points of H^n (or of R^n in abelian mode) and first-stratum field labels."""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np


class GroupMode(str, Enum):
    """Which group a point lives in."""
    HEISENBERG = "heisenberg"
    ABELIAN = "abelian"


def coordinate_dim(n: int, mode: GroupMode) -> int:
    """Number of coordinates of a point: 2n+1 on H^n, n on R^n."""
    return 2 * n + 1 if GroupMode(mode) == GroupMode.HEISENBERG else n


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point [x, y, t] of H^n, or x of R^n in abelian mode.

    Coordinates are stored flat as (x_1..x_n, y_1..y_n, t). The array is
    copied on construction and made read-only so points can be shared
    freely across threads.

    Attributes:
        coords: Flat coordinate vector
        n: Dimension parameter of the group
        mode: Heisenberg or abelian

    Example:
        g = GroupPoint.heisenberg([1.0], [0.0], 0.5)
        g.t  # 0.5
    """
    coords: np.ndarray
    n: int
    mode: GroupMode = GroupMode.HEISENBERG

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Group dimension n must be >= 1, got {self.n}")
        mode = GroupMode(self.mode)
        arr = np.array(self.coords, dtype=float).reshape(-1)
        expected = coordinate_dim(self.n, mode)
        if arr.shape[0] != expected:
            raise ValueError(
                f"A {mode.value} point with n={self.n} needs {expected} coordinates, "
                f"got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"Point coordinates must be finite, got {arr.tolist()}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "mode", mode)

    @classmethod
    def heisenberg(cls, x: Sequence[float], y: Sequence[float], t: float) -> "GroupPoint":
        """Build a Heisenberg point from its x, y and t parts."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise ValueError(f"x and y must have the same length, got {x.shape} and {y.shape}")
        return cls(np.concatenate([x, y, [float(t)]]), n=x.shape[0])

    @classmethod
    def abelian(cls, x: Union[float, Sequence[float]]) -> "GroupPoint":
        """Build a point of R^n."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x, n=x.shape[0], mode=GroupMode.ABELIAN)

    @classmethod
    def identity(cls, n: int, mode: GroupMode = GroupMode.HEISENBERG) -> "GroupPoint":
        return cls(np.zeros(coordinate_dim(n, mode)), n=n, mode=mode)

    @property
    def is_heisenberg(self) -> bool:
        return self.mode == GroupMode.HEISENBERG

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.coords[: self.n]

    @property
    def y(self) -> np.ndarray:
        if not self.is_heisenberg:
            raise AttributeError("Abelian points have no y coordinates")
        return self.coords[self.n: 2 * self.n]

    @property
    def z(self) -> np.ndarray:
        """Horizontal part (x, y); equals x in abelian mode."""
        return self.coords[: 2 * self.n] if self.is_heisenberg else self.coords

    @property
    def t(self) -> float:
        if not self.is_heisenberg:
            raise AttributeError("Abelian points have no t coordinate")
        return float(self.coords[-1])

    def is_identity(self) -> bool:
        return not np.any(self.coords)

    def isclose(self, other: "GroupPoint", atol: float = 1e-12) -> bool:
        """Coordinate-wise comparison with an absolute tolerance."""
        return (
            self.mode == other.mode
            and self.n == other.n
            and bool(np.allclose(self.coords, other.coords, rtol=0.0, atol=atol))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupPoint):
            return NotImplemented
        return self.mode == other.mode and self.n == other.n and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash((self.mode, self.n, self.coords.tobytes()))

    def __repr__(self) -> str:
        return f"GroupPoint({self.mode.value}, n={self.n}, coords={self.coords.tolist()})"


@dataclass(frozen=True)
class VectorFieldId:
    """Label of a first-stratum left-invariant field.

    On H^n, indices 1..n are the X-type fields X_j = d/dx_j + 2 y_j d/dt and
    n+1..2n the Y-type fields Y_j = d/dy_j - 2 x_j d/dt. On R^n the index
    runs over 1..n and names the partial derivative d/dx_j.
    """
    index: int
    n: int
    mode: GroupMode = GroupMode.HEISENBERG

    def __post_init__(self):
        top = 2 * self.n if GroupMode(self.mode) == GroupMode.HEISENBERG else self.n
        if not 1 <= self.index <= top:
            raise ValueError(f"Vector field index must be in 1..{top}, got {self.index}")
        object.__setattr__(self, "mode", GroupMode(self.mode))

    @classmethod
    def parse(cls, label: str, n: int, mode: GroupMode = GroupMode.HEISENBERG) -> "VectorFieldId":
        """Parse labels such as ``X1``, ``Y2`` or a bare index ``3``."""
        label = label.strip().upper()
        if label.isdigit():
            return cls(int(label), n, mode)
        if len(label) < 2 or label[0] not in ("X", "Y") or not label[1:].isdigit():
            raise ValueError(f"Cannot parse vector field label '{label}'; use X<k>, Y<k> or an index")
        k = int(label[1:])
        if label[0] == "Y":
            if GroupMode(mode) == GroupMode.ABELIAN:
                raise ValueError("Abelian mode has no Y-type fields")
            if not 1 <= k <= n:
                raise ValueError(f"Y-type index must be in 1..{n}, got {k}")
            return cls(n + k, n, mode)
        return cls(k, n, mode)

    @property
    def is_x_type(self) -> bool:
        return self.mode == GroupMode.ABELIAN or self.index <= self.n

    @property
    def coordinate(self) -> int:
        """0-based position of the field's own coordinate (x_j or y_j) within x or y."""
        return self.index - 1 if self.is_x_type else self.index - 1 - self.n

    @property
    def label(self) -> str:
        return f"X{self.coordinate + 1}" if self.is_x_type else f"Y{self.coordinate + 1}"

    def __str__(self) -> str:
        return self.label
