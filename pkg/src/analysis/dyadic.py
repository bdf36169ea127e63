"""Dyadic cube systems over a sampling grid.

Cubes are coordinate boxes made of whole grid cells. Passing from level l to
l+1 halves the index range of every horizontal axis and quarters the t range
(on H^n) so cube sides shrink like the dilations do. A grid supports only the
depths at which every axis still splits by its full factor (max_dyadic_depth).
Every cube carries certified balls B(c, r1) within the cube within B(c, r2),
c the box centre:

* r2 is the largest d_K(c^{-1} o v) over the box vertices v; Korányi balls
  are convex and c^{-1} o p is affine in p, so this bounds the whole box.
* r1 keeps c o B(0, r1) inside the box: |x_i|, |y_i| <= r1 and
  |t| + 2 |c_z| r1 <= r1^2 + 2 |c_z| r1 <= tau / 2.

Off the centre axis the shear term makes r1 of order tau / |c_z|, so r2 / r1
grows like 2^l |c_z| with the level. Cubes touching the axis are dilates of
one another and keep the same ratios at every level.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.analysis.sampled import Ball, GridSpec
from src.core.errors import CertificateError
from src.core.points import GroupMode

logger = logging.getLogger(__name__)


def split_factors(grid: GridSpec) -> Tuple[int, ...]:
    """Pieces per axis when passing to the next level: 2 horizontally, 4 along t on H^n."""
    if grid.mode == GroupMode.HEISENBERG:
        return tuple([2] * (grid.dim - 1) + [4])
    return tuple([2] * grid.dim)


def max_dyadic_depth(grid: GridSpec) -> int:
    """Deepest level at which every axis still splits by its full factor."""
    depths = []
    for cells, factor in zip(grid.shape, split_factors(grid)):
        d = 0
        while cells >= factor ** (d + 1):
            d += 1
        depths.append(d)
    return min(depths)


@dataclass(frozen=True)
class DyadicCube:
    """A cube of the system.

    Attributes:
        level: Generation l (0 is the whole box)
        index: Position within its level
        ranges: Half-open cell index range per axis
        lower: Lower coordinate corner
        upper: Upper coordinate corner
        inner: Certified inner ball B1
        outer: Certified outer ball B2
        parent: Index of the parent at level l-1 (None at level 0)
    """
    level: int
    index: int
    ranges: Tuple[Tuple[int, int], ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    inner: Ball
    outer: Ball
    parent: Optional[int] = None

    @property
    def cell_count(self) -> int:
        return int(np.prod([hi - lo for lo, hi in self.ranges]))

    def cell_indices(self, grid: GridSpec) -> np.ndarray:
        """Flat grid indices of the cube's cells."""
        mesh = np.meshgrid(*[np.arange(lo, hi) for lo, hi in self.ranges], indexing="ij")
        return np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape)

    def mask(self, grid: GridSpec) -> np.ndarray:
        out = np.zeros(grid.size, dtype=bool)
        out[self.cell_indices(grid)] = True
        return out

    def measure(self, grid: GridSpec) -> float:
        return self.cell_count * grid.cell_measure

    def contains_point(self, p: np.ndarray) -> bool:
        return bool(np.all(np.asarray(p) >= self.lower) and np.all(np.asarray(p) < self.upper))


class DyadicSystem:
    """Nested partitions of a grid box at levels 0..depth.

    Attributes:
        grid: Sampling grid
        depth: Deepest level
        levels: Cubes per level
        constants: System-wide bounds of 2^{-l} / r1 and 2^{-l} / r2 and of r2 / r1
        level_constants: The same bounds restricted to each level
    """

    def __init__(self, grid: GridSpec, depth: int):
        if depth < 1:
            raise ValueError(f"Dyadic depth must be >= 1, got {depth}")
        limit = max_dyadic_depth(grid)
        if depth > limit:
            raise ValueError(
                f"Dyadic depth {depth} exceeds the {limit} level(s) a {tuple(grid.shape)} grid splits "
                f"by {split_factors(grid)}; refine the grid or lower the depth"
            )
        self.grid = grid
        self.depth = depth
        self.group = grid.group
        self._splits = split_factors(grid)
        self.levels: List[List[DyadicCube]] = []
        root = self._make_cube(0, 0, tuple((0, s) for s in grid.shape), None)
        self.levels.append([root])
        for level in range(1, depth + 1):
            children: List[DyadicCube] = []
            for parent in self.levels[-1]:
                for ranges in self._split(parent.ranges):
                    children.append(self._make_cube(level, len(children), ranges, parent.index))
            self.levels.append(children)
        self.level_constants = [self._constants([level]) for level in range(depth + 1)]
        self.constants = self._constants(range(depth + 1))
        logger.info(
            f"Dyadic system on {grid.shape} to depth {depth}: "
            f"{sum(len(lv) for lv in self.levels)} cubes, r2/r1 <= {self.constants['ratio_max']:.3f}"
        )

    def _split(self, ranges: Tuple[Tuple[int, int], ...]) -> List[Tuple[Tuple[int, int], ...]]:
        per_axis = []
        for (lo, hi), parts in zip(ranges, self._splits):
            edges = [lo + round(k * (hi - lo) / parts) for k in range(parts + 1)]
            per_axis.append([(edges[k], edges[k + 1]) for k in range(parts)])
        return [tuple(combo) for combo in itertools.product(*per_axis)]

    def _make_cube(
        self, level: int, index: int, ranges: Tuple[Tuple[int, int], ...], parent: Optional[int]
    ) -> DyadicCube:
        lo_grid = np.array(self.grid.lower)
        h = self.grid.spacing
        lower = lo_grid + h * np.array([r[0] for r in ranges])
        upper = lo_grid + h * np.array([r[1] for r in ranges])
        center = 0.5 * (lower + upper)
        sides = upper - lower

        vertices = np.array(list(itertools.product(*zip(lower, upper))))
        r2 = float(np.max(self.group.distance_arrays(vertices, center[None, :])))
        if self.grid.mode == GroupMode.HEISENBERG:
            zc = float(np.linalg.norm(center[:-1]))
            tau = sides[-1]
            r1 = min(0.5 * float(np.min(sides[:-1])), -zc + math.sqrt(zc * zc + 0.5 * tau))
        else:
            r1 = 0.5 * float(np.min(sides))
        if not 0.0 < r1 <= r2:
            cube = {"level": level, "ranges": ranges, "lower": lower.tolist(), "upper": upper.tolist()}
            logger.error(f"No inner ball for cube {cube}")
            raise CertificateError(f"Cube at level {level} admits no inner ball (r1={r1}, r2={r2})", cube)
        return DyadicCube(
            level=level,
            index=index,
            ranges=ranges,
            lower=tuple(lower.tolist()),
            upper=tuple(upper.tolist()),
            inner=Ball(center, r1),
            outer=Ball(center, r2),
            parent=parent,
        )

    def _constants(self, levels: Iterable[int]) -> Dict[str, float]:
        scale1, scale2, ratio = [], [], []
        for level in levels:
            size = 2.0 ** (-level)
            for cube in self.levels[level]:
                scale1.append(size / cube.inner.radius)
                scale2.append(size / cube.outer.radius)
                ratio.append(cube.outer.radius / cube.inner.radius)
        return {
            "C1": float(min(scale1)),
            "C1_bar": float(max(scale1)),
            "C2": float(min(scale2)),
            "C2_bar": float(max(scale2)),
            "ratio_max": float(max(ratio)),
        }

    def cubes(self, level: int) -> List[DyadicCube]:
        return self.levels[level]

    def children(self, cube: DyadicCube) -> List[DyadicCube]:
        if cube.level >= self.depth:
            return []
        return [c for c in self.levels[cube.level + 1] if c.parent == cube.index]

    def parent_of(self, cube: DyadicCube) -> Optional[DyadicCube]:
        if cube.parent is None:
            return None
        return self.levels[cube.level - 1][cube.parent]

    def locate(self, point: np.ndarray, level: int) -> DyadicCube:
        """Cube of the given level containing a point of the box."""
        cell = int(self.grid.nearest_cells(np.atleast_2d(point))[0])
        idx = np.unravel_index(cell, self.grid.shape)
        for cube in self.levels[level]:
            if all(lo <= i < hi for i, (lo, hi) in zip(idx, cube.ranges)):
                return cube
        raise ValueError(f"No level-{level} cube holds {list(point)}")

    def containing_cube(self, ball: Ball) -> Optional[DyadicCube]:
        """Smallest cube whose cells hold every cell centre of the ball."""
        mask = self.grid.ball_mask(ball.center, ball.radius)
        best = None
        for level in range(self.depth + 1):
            cube = self.locate(ball.center, level)
            if np.all(cube.mask(self.grid)[mask]):
                best = cube
            else:
                break
        return best

    def certify(self, cube: DyadicCube) -> bool:
        """Check B1 within the cube within B2 on the grid's cell centres."""
        centers = self.grid.centers()
        in_cube = cube.mask(self.grid)
        d_inner = self.group.distance_arrays(centers, cube.inner.center[None, :])
        d_outer = self.group.distance_arrays(centers[in_cube], cube.outer.center[None, :])
        inner_ok = bool(np.all(in_cube[d_inner < cube.inner.radius]))
        outer_ok = bool(np.all(d_outer <= cube.outer.radius * (1 + 1e-12)))
        return inner_ok and outer_ok


def build_dyadic_system(grid: GridSpec, depth: int) -> DyadicSystem:
    """Nested partitions of the grid box at levels 0..depth with certified balls.

    Raises:
        ValueError: If depth < 1 or deeper than the grid splits
        CertificateError: If a cube admits no inner ball
    """
    return DyadicSystem(grid, depth)
