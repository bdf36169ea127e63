"""Unit tests for grids, sampled functions, weights and ball families."""

import math

import numpy as np
import pytest

from src.analysis.sampled import (
    MIN_BALL_CELLS,
    SYMBOLS,
    BallFamily,
    GridSpec,
    SampledFunction,
    Weight,
    as_point,
    symbol_function,
)
from src.core.errors import EvaluationError
from src.core.points import GroupMode


class TestGridSpec:
    """Tests for GridSpec."""

    def test_cube_uses_parabolic_t_side(self):
        """Test the t half-width defaults to half_width^2."""
        grid = GridSpec.cube(GroupMode.HEISENBERG, 1, 2.0, 8)

        assert grid.lower == (-2.0, -2.0, -4.0)
        assert grid.upper == (2.0, 2.0, 4.0)
        assert grid.shape == (8, 8, 8)

    def test_measures(self, small_grid):
        """Test spacing, cell measure and Korányi resolution."""
        assert np.allclose(small_grid.spacing, 1.0 / 6.0)
        assert small_grid.cell_measure == pytest.approx(1.0 / 216.0)
        assert small_grid.koranyi_resolution == pytest.approx(1.0 / 6.0)
        assert small_grid.size == 12 ** 3

    def test_resolution_limited_by_t(self):
        """Test a coarse t axis enters through its square root."""
        grid = GridSpec(lower=(-1.0, -1.0, -1.0), upper=(1.0, 1.0, 1.0), shape=(64, 64, 4))

        assert grid.koranyi_resolution == pytest.approx(2.0 / 64.0)
        coarse = GridSpec(lower=(-1.0, -1.0, -1e-4), upper=(1.0, 1.0, 1e-4), shape=(4, 4, 2))
        assert coarse.koranyi_resolution == pytest.approx(math.sqrt(1e-4))

    def test_bad_box(self):
        """Test inconsistent boxes are rejected."""
        with pytest.raises(ValueError):
            GridSpec(lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0), shape=(2, 2, 2))
        with pytest.raises(ValueError):
            GridSpec(lower=(1.0, 0.0, 0.0), upper=(0.0, 1.0, 1.0), shape=(2, 2, 2))

    def test_centers_and_nearest(self, small_grid):
        """Test cell centres map back to their own cell."""
        centers = small_grid.centers()

        assert centers.shape == (small_grid.size, 3)
        assert np.array_equal(small_grid.nearest_cells(centers[[0, 100, 1727]]), [0, 100, 1727])

    def test_nearest_outside(self, small_grid):
        """Test points outside the box are rejected."""
        with pytest.raises(ValueError, match="outside"):
            small_grid.nearest_cells(np.array([[2.0, 0.0, 0.0]]))

    def test_ball_mask(self, small_grid):
        """Test ball masks respect the Korányi distance."""
        center = np.zeros(3)
        mask = small_grid.ball_mask(center, 0.5)

        d = small_grid.group.norm_arrays(small_grid.centers())
        assert np.array_equal(mask, d < 0.5)
        assert small_grid.contains_ball(center, 0.5)
        assert not small_grid.contains_ball(center, 1.5)

    def test_abelian_grid(self, abelian_grid):
        """Test abelian grids have no parabolic axis."""
        assert abelian_grid.dim == 1
        assert abelian_grid.koranyi_resolution == pytest.approx(8.0 / 512.0)


class TestSampledFunction:
    """Tests for SampledFunction."""

    def test_from_callable_keeps_source(self, x1_function):
        """Test off-grid evaluation goes through the exact source."""
        assert x1_function.evaluate(np.array([[0.123, 5.0, 7.0]]))[0] == pytest.approx(0.123)

    def test_cell_lookup_without_source(self, small_grid):
        """Test grid-only functions evaluate by cell."""
        f = SampledFunction(small_grid, np.arange(small_grid.size, dtype=float))
        center = small_grid.centers()[42]

        assert f.evaluate(center)[0] == 42.0

    def test_non_finite(self, small_grid):
        """Test NaN values are rejected."""
        with pytest.raises(EvaluationError):
            SampledFunction(small_grid, np.full(small_grid.size, np.nan))

    def test_values_read_only(self, x1_function):
        """Test the value array is frozen."""
        with pytest.raises(ValueError):
            x1_function.values[0, 0, 0] = 1.0

    def test_arithmetic(self, small_grid, x1_function):
        """Test sums, differences and products."""
        one = SampledFunction.constant(small_grid, 1.0)

        assert np.allclose((x1_function + one).flat, x1_function.flat + 1.0)
        assert np.allclose((x1_function - one).flat, x1_function.flat - 1.0)
        assert np.allclose((2.0 * x1_function).flat, 2.0 * x1_function.flat)
        assert np.allclose((x1_function * x1_function).flat, x1_function.flat ** 2)

    def test_grid_mismatch(self, x1_function):
        """Test functions on different grids do not combine."""
        other = SampledFunction.constant(GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, 6), 1.0)

        with pytest.raises(ValueError, match="different grids"):
            x1_function + other

    def test_integral_and_norms(self, small_grid):
        """Test the Riemann sums on a constant."""
        one = SampledFunction.constant(small_grid, 1.0)

        assert one.integral() == pytest.approx(8.0)
        assert one.lp_norm(2.0) == pytest.approx(math.sqrt(8.0))
        assert one.lp_norm(math.inf) == 1.0

    def test_save_and_load(self, tmp_path, x1_function):
        """Test the binary format with its grid sidecar."""
        bin_path, json_path = x1_function.save(tmp_path / "b")

        loaded = SampledFunction.load(tmp_path / "b")

        assert bin_path.stat().st_size == 8 * x1_function.grid.size
        assert json_path.exists()
        assert loaded.grid == x1_function.grid
        assert np.array_equal(loaded.values, x1_function.values)

    def test_load_size_mismatch(self, tmp_path, small_grid, x1_function):
        """Test a truncated binary is rejected."""
        x1_function.save(tmp_path / "b")
        (tmp_path / "b.bin").write_bytes(b"\x00" * 16)

        with pytest.raises(ValueError, match="grid needs"):
            SampledFunction.load(tmp_path / "b")


class TestWeight:
    """Tests for Weight."""

    def test_must_be_positive(self, small_grid):
        """Test zero values are rejected."""
        with pytest.raises(ValueError, match="strictly positive"):
            Weight(SampledFunction.constant(small_grid, 0.0))

    def test_power_zero_is_one(self, small_grid):
        """Test |g|^0 = 1."""
        assert np.allclose(Weight.power(small_grid, 0.0).flat, 1.0)

    def test_measure(self, small_grid):
        """Test the weighted measure of the whole box."""
        assert Weight.ones(small_grid).measure(np.ones(small_grid.size, dtype=bool)) == pytest.approx(8.0)

    def test_bloom_weight(self, small_grid):
        """Test (mu / lambda)^{1/p}."""
        mu = Weight.power(small_grid, 1.0)
        lam = Weight.ones(small_grid)

        nu = mu.power_of(lam, 2.0)

        assert np.allclose(nu.flat, np.sqrt(mu.flat))


class TestBallFamily:
    """Tests for BallFamily."""

    def test_balls_inside_and_populated(self, small_grid):
        """Test every kept ball fits in the box and holds enough cells."""
        family = BallFamily(small_grid, stride=3)

        assert len(family) > 0
        for ball, mask in family:
            assert small_grid.contains_ball(ball.center, ball.radius)
            assert np.count_nonzero(mask) >= MIN_BALL_CELLS

    def test_describe(self, small_grid):
        """Test the family description."""
        family = BallFamily(small_grid, stride=4, radii=[0.5])

        info = family.describe()

        assert info["radii"] == [0.5]
        assert info["balls"] == len(family)

    def test_oversized_radii_give_empty_family(self, small_grid):
        """Test balls that leave the box are dropped."""
        assert len(BallFamily(small_grid, radii=[5.0])) == 0


class TestSymbols:
    """Tests for the named symbols."""

    @pytest.mark.parametrize("name", SYMBOLS)
    def test_all_symbols_finite(self, small_grid, name):
        """Test every symbol samples to finite values."""
        b = symbol_function(small_grid, name)

        assert np.all(np.isfinite(b.flat))

    def test_log_floor(self, small_grid):
        """Test log d_K is floored at half the resolution."""
        b = symbol_function(small_grid, "log")

        assert b.evaluate(np.zeros((1, 3)))[0] == pytest.approx(math.log(0.5 / 6.0))

    def test_x1(self, small_grid):
        """Test the coordinate symbol."""
        assert np.array_equal(symbol_function(small_grid, "x1").flat, small_grid.centers()[:, 0])

    def test_unknown(self, small_grid):
        """Test unknown names are rejected."""
        with pytest.raises(ValueError, match="Unknown symbol"):
            symbol_function(small_grid, "zigzag")

    def test_as_point(self, small_grid):
        """Test coordinates become points of the grid's group."""
        g = as_point(small_grid, np.array([0.1, 0.2, 0.3]))

        assert g.n == 1 and g.t == 0.3
