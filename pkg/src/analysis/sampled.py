"""Functions sampled on coordinate grids, weights and ball families.

Haar measure on H^n (and on R^n) is Lebesgue measure in coordinates, so a
uniform grid gives every cell the same measure, the product of the spacings.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.base_group import BaseGroup
from src.core.errors import EvaluationError
from src.core.group_factory import GroupFactory
from src.core.points import GroupMode, GroupPoint, coordinate_dim

logger = logging.getLogger(__name__)

MIN_BALL_CELLS = 8


class GridSpec(BaseModel):
    """Box in group coordinates with a uniform cell-centred grid.

    Attributes:
        mode: Group mode
        n: Group dimension
        lower: Lower box corner
        upper: Upper box corner
        shape: Cells per axis
    """

    model_config = ConfigDict(frozen=True)

    mode: GroupMode = GroupMode.HEISENBERG
    n: int = Field(default=1, ge=1)
    lower: Tuple[float, ...] = (-1.0, -1.0, -1.0)
    upper: Tuple[float, ...] = (1.0, 1.0, 1.0)
    shape: Tuple[int, ...] = (32, 32, 32)

    @model_validator(mode="after")
    def _check_box(self) -> "GridSpec":
        dim = coordinate_dim(self.n, self.mode)
        if not len(self.lower) == len(self.upper) == len(self.shape) == dim:
            raise ValueError(f"Box and shape need {dim} entries for {self.mode.value} n={self.n}")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Upper corner {self.upper} must exceed lower corner {self.lower}")
        if any(s < 1 for s in self.shape):
            raise ValueError(f"Grid shape must be positive, got {self.shape}")
        return self

    @classmethod
    def cube(
        cls,
        mode: Union[str, GroupMode],
        n: int,
        half_width: float,
        cells: int,
        t_half_width: Optional[float] = None,
        t_cells: Optional[int] = None,
    ) -> "GridSpec":
        """Symmetric box; the t side defaults to half_width^2, matching the dilations."""
        mode = GroupMode(mode)
        dim = coordinate_dim(n, mode)
        lower = [-half_width] * dim
        upper = [half_width] * dim
        shape = [cells] * dim
        if mode == GroupMode.HEISENBERG:
            th = half_width ** 2 if t_half_width is None else t_half_width
            lower[-1], upper[-1] = -th, th
            shape[-1] = cells if t_cells is None else t_cells
        return cls(mode=mode, n=n, lower=tuple(lower), upper=tuple(upper), shape=tuple(shape))

    @property
    def group(self) -> BaseGroup:
        return GroupFactory.create_group(self.mode.value, self.n)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def koranyi_resolution(self) -> float:
        """Smallest homogeneous-norm length of one grid step."""
        h = self.spacing
        if self.mode == GroupMode.HEISENBERG:
            return float(min(np.min(h[:-1]), math.sqrt(h[-1])))
        return float(np.min(h))

    def axes(self) -> List[np.ndarray]:
        return [lo + (np.arange(s) + 0.5) * h for lo, s, h in zip(self.lower, self.shape, self.spacing)]

    def centers(self) -> np.ndarray:
        """Cell centres, shape (size, dim), in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def nearest_cells(self, points: np.ndarray) -> np.ndarray:
        """Flat index of the cell containing each point.

        Raises:
            ValueError: If a point lies outside the box
        """
        points = np.atleast_2d(points)
        rel = (points - np.array(self.lower)) / self.spacing
        idx = np.floor(rel).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            raise ValueError("Point outside the sampling box")
        return np.ravel_multi_index(tuple(idx.T), self.shape)

    def ball_box(self, center: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinate box enclosing B(center, r)."""
        center = np.asarray(center, dtype=float)
        if self.mode == GroupMode.HEISENBERG:
            zc = float(np.linalg.norm(center[:-1]))
            half = np.full(self.dim, r)
            half[-1] = r * r + 2.0 * zc * r
        else:
            half = np.full(self.dim, r)
        return center - half, center + half

    def contains_ball(self, center: np.ndarray, r: float) -> bool:
        lo, hi = self.ball_box(center, r)
        return bool(np.all(lo >= np.array(self.lower) - 1e-12) and np.all(hi <= np.array(self.upper) + 1e-12))

    def ball_mask(self, center: np.ndarray, r: float) -> np.ndarray:
        """Flat boolean mask of the cells whose centres lie in B(center, r)."""
        centers = self.centers()
        return self.group.distance_arrays(centers, np.asarray(center, dtype=float)[None, :]) < r

    def descriptor(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


@dataclass(frozen=True)
class Ball:
    """A metric ball B(center, radius) in coordinates."""
    center: np.ndarray
    radius: float

    def describe(self) -> Dict[str, Any]:
        return {"center": [float(c) for c in self.center], "radius": float(self.radius)}


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Cell values of a function on a GridSpec.

    Attributes:
        grid: The grid
        values: Array of shape grid.shape
        source: Optional exact evaluator on (N, dim) coordinate arrays, used by
            constructions that leave the grid
    """
    grid: GridSpec
    values: np.ndarray
    source: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(arr)):
            raise EvaluationError("Sampled function values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_callable(cls, grid: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> "SampledFunction":
        """Sample func on the cell centres and keep it as the exact source."""
        vals = np.asarray(func(grid.centers()), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("Function returned non-finite values on the grid")
        return cls(grid, vals, source=func)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "SampledFunction":
        return cls.from_callable(grid, lambda p: np.full(p.shape[0], float(value)))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def cell_measure(self) -> float:
        return self.grid.cell_measure

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Exact values through ``source`` when present, else the containing cell's value."""
        points = np.atleast_2d(points)
        if self.source is not None:
            return np.asarray(self.source(points), dtype=float)
        return self.flat[self.grid.nearest_cells(points)]

    def with_values(self, values: np.ndarray) -> "SampledFunction":
        return SampledFunction(self.grid, values)

    def _same_grid(self, other: "SampledFunction") -> None:
        if other.grid != self.grid:
            raise ValueError("Sampled functions live on different grids")

    def __add__(self, other: Union["SampledFunction", float]) -> "SampledFunction":
        if isinstance(other, SampledFunction):
            self._same_grid(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + float(other))

    def __sub__(self, other: Union["SampledFunction", float]) -> "SampledFunction":
        return self + (other * -1.0)

    def __mul__(self, other: Union["SampledFunction", float]) -> "SampledFunction":
        if isinstance(other, SampledFunction):
            self._same_grid(other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * float(other))

    __rmul__ = __mul__
    __radd__ = __add__

    def integral(self, mask: Optional[np.ndarray] = None) -> float:
        vals = self.flat if mask is None else self.flat[mask]
        return float(np.sum(vals) * self.cell_measure)

    def lp_norm(self, p: float, mask: Optional[np.ndarray] = None) -> float:
        vals = np.abs(self.flat if mask is None else self.flat[mask])
        if math.isinf(p):
            return float(np.max(vals)) if vals.size else 0.0
        return float((np.sum(vals ** p) * self.cell_measure) ** (1.0 / p))

    def save(self, stem: Union[str, Path]) -> Tuple[Path, Path]:
        """Write ``stem.bin`` (little-endian float64) and ``stem.json`` (grid sidecar)."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        bin_path, json_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
        self.flat.astype("<f8").tofile(bin_path)
        sidecar = {"grid": self.grid.descriptor(), "cell_measure": self.cell_measure, "dtype": "<f8"}
        json_path.write_text(json.dumps(sidecar, sort_keys=True, indent=2), encoding="utf-8")
        logger.debug(f"Saved sampled function to {bin_path}")
        return bin_path, json_path

    @classmethod
    def load(cls, stem: Union[str, Path]) -> "SampledFunction":
        stem = Path(stem)
        sidecar = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
        grid = GridSpec.model_validate(sidecar["grid"])
        values = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
        if values.size != grid.size:
            raise ValueError(f"Binary holds {values.size} values, grid needs {grid.size}")
        return cls(grid, values)


class Weight:
    """Strictly positive sampled weight with cached A_p constants."""

    def __init__(self, function: SampledFunction):
        if np.any(function.values <= 0):
            raise ValueError("A weight must be strictly positive on every cell")
        self.function = function
        self.ap_cache: Dict[Tuple[float, str], float] = {}

    @classmethod
    def power(cls, grid: GridSpec, exponent: float) -> "Weight":
        """w(g) = d_K(g)^exponent, floored at half the grid resolution near the origin."""
        group = grid.group
        floor = 0.5 * grid.koranyi_resolution
        return cls(SampledFunction.from_callable(
            grid, lambda p: np.maximum(group.norm_arrays(p), floor) ** exponent
        ))

    @classmethod
    def ones(cls, grid: GridSpec) -> "Weight":
        return cls(SampledFunction.constant(grid, 1.0))

    @property
    def flat(self) -> np.ndarray:
        return self.function.flat

    def measure(self, mask: np.ndarray) -> float:
        return self.function.integral(mask)

    def power_of(self, other: "Weight", p: float) -> "Weight":
        """The Bloom weight (self / other)^{1/p}."""
        return Weight(self.function.with_values((self.function.values / other.function.values) ** (1.0 / p)))


class BallFamily:
    """Grid-aligned balls: centres on a coarse lattice times a dyadic radius ladder.

    ``centers`` replaces the lattice by explicit points, so families on
    different grids of one box hold the same balls. Only balls whose
    enclosing coordinate box lies inside the grid box and that hold at least
    MIN_BALL_CELLS cell centres are kept.
    """

    def __init__(
        self,
        grid: GridSpec,
        stride: int = 4,
        radii: Optional[List[float]] = None,
        levels: int = 4,
        centers: Optional[np.ndarray] = None,
    ):
        self.grid = grid
        self.stride = stride
        if radii is None:
            top = 0.5 * float(np.min(np.array(grid.upper) - np.array(grid.lower)))
            radii = [top * 2.0 ** (-k) for k in range(1, levels + 1)]
        self.radii = sorted(radii)
        self._centers = grid.centers()
        self._balls: List[Tuple[Ball, np.ndarray]] = []
        if centers is None:
            axes = [a[stride // 2::stride] if stride > 1 else a for a in grid.axes()]
            lattice = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        else:
            lattice = np.atleast_2d(np.asarray(centers, dtype=float))
            if lattice.shape[1] != grid.dim:
                raise ValueError(f"Ball centres need {grid.dim} coordinates, got {lattice.shape[1]}")
        self._lattice = lattice
        self.explicit_centers = centers is not None
        group = grid.group
        for r in self.radii:
            for c in lattice:
                if not grid.contains_ball(c, r):
                    continue
                mask = group.distance_arrays(self._centers, c[None, :]) < r
                if np.count_nonzero(mask) >= MIN_BALL_CELLS:
                    self._balls.append((Ball(c, r), mask))
        logger.debug(f"Ball family on {grid.shape}: {len(self._balls)} balls")

    def __len__(self) -> int:
        return len(self._balls)

    def __iter__(self) -> Iterator[Tuple[Ball, np.ndarray]]:
        return iter(self._balls)

    def describe(self) -> Dict[str, Any]:
        out = {
            "grid": self.grid.descriptor(),
            "stride": None if self.explicit_centers else self.stride,
            "radii": [float(r) for r in self.radii],
            "balls": len(self._balls),
        }
        if self.explicit_centers:
            out["centers"] = self._lattice.tolist()
        return out


def as_point(grid: GridSpec, coords: np.ndarray) -> GroupPoint:
    return GroupPoint(np.asarray(coords, dtype=float), n=grid.n, mode=grid.mode)


SYMBOLS = ("constant", "log", "bounded", "smooth", "x1")


def symbol_function(grid: GridSpec, name: str) -> SampledFunction:
    """Named test symbols b, each carrying its exact source.

    ``log`` is log d_K floored at half the grid resolution (the BMO prototype),
    ``bounded`` a smooth step across x_1 = 0, ``smooth`` sin(x_1) + cos(x_last)/2,
    ``x1`` the first coordinate.

    Raises:
        ValueError: If the name is unknown
    """
    group = grid.group
    floor = 0.5 * grid.koranyi_resolution
    sources: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
        "constant": lambda p: np.full(p.shape[0], 1.0),
        "log": lambda p: np.log(np.maximum(group.norm_arrays(p), floor)),
        "bounded": lambda p: np.tanh(4.0 * p[:, 0]),
        "smooth": lambda p: np.sin(p[:, 0]) + 0.5 * np.cos(p[:, -1]),
        "x1": lambda p: np.array(p[:, 0], dtype=float),
    }
    if name not in sources:
        raise ValueError(f"Unknown symbol: {name}. Supported: {', '.join(SYMBOLS)}")
    return SampledFunction.from_callable(grid, sources[name])
