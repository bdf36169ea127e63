"""Unit tests for Riesz transforms, commutators, atoms and the endpoint experiments."""

import math

import numpy as np
import pytest

from src.analysis.commutator_lab import (
    commutator_apply,
    far_field_annuli,
    fit_theta,
    h1b_condition,
    h1b_growth,
    hilbert_fft_oracle,
    lb_condition,
    lb_growth,
    linfty_bmo_experiment,
    llogl_functional,
    make_atom,
    phi_test_function,
    psi_test_function,
    riesz_apply,
    two_weight_experiment,
    weak11_experiment,
    weak_l1_report,
)
from src.analysis.sampled import Ball, BallFamily, GridSpec, SampledFunction, Weight
from src.core.points import GroupMode


@pytest.fixture
def unit_ball():
    """Return B(0, 1/2) on the small grid."""
    return Ball(np.zeros(3), 0.5)


@pytest.fixture
def atom(small_grid, unit_ball):
    """Return a two-block L^infinity atom on B(0, 1/2)."""
    return make_atom(small_grid, unit_ball)


@pytest.fixture
def pv_cut(small_grid):
    """Return the smallest admissible cancellation radius."""
    return 2.0 * small_grid.koranyi_resolution


class TestRieszApply:
    """Tests for riesz_apply and the Fourier oracle."""

    def test_pv_cut_floor(self, kernel_x1, atom, small_grid):
        """Test a cut below two resolutions is rejected."""
        with pytest.raises(ValueError, match="pv_cut"):
            riesz_apply(kernel_x1, atom.function, small_grid.koranyi_resolution)

    def test_zero_input(self, kernel_x1, small_grid, pv_cut):
        """Test R 0 = 0 without touching the kernel."""
        u = riesz_apply(kernel_x1, SampledFunction.constant(small_grid, 0.0), pv_cut)

        assert np.all(u.flat == 0.0)

    def test_kernel_group_mismatch(self, abelian_kernel, atom, pv_cut):
        """Test an abelian kernel cannot act on a Heisenberg grid."""
        with pytest.raises(ValueError, match="cannot act"):
            riesz_apply(abelian_kernel, atom.function, pv_cut)

    def test_linearity(self, kernel_x1, atom, pv_cut):
        """Test R(2f) = 2 R f."""
        once = riesz_apply(kernel_x1, atom.function, pv_cut)
        twice = riesz_apply(kernel_x1, atom.function * 2.0, pv_cut)

        assert np.allclose(twice.flat, 2.0 * once.flat)

    def test_threads_do_not_change_result(self, kernel_x1, atom, pv_cut):
        """Test the block split is invisible in the output."""
        serial = riesz_apply(kernel_x1, atom.function, pv_cut, workers=1)
        threaded = riesz_apply(kernel_x1, atom.function, pv_cut, workers=4)

        assert np.array_equal(serial.flat, threaded.flat)

    def test_hilbert_against_fourier(self, abelian_grid, abelian_kernel):
        """Test the cell sum reproduces the Fourier multiplier on the line."""
        f = SampledFunction.from_callable(abelian_grid, lambda p: np.exp(-4.0 * p[:, 0] ** 2))

        direct = riesz_apply(abelian_kernel, f, 2.0 * abelian_grid.koranyi_resolution)
        oracle = hilbert_fft_oracle(f)

        scale = float(np.max(np.abs(oracle.flat)))
        assert float(np.max(np.abs(direct.flat - oracle.flat))) <= 0.02 * scale

    def test_oracle_needs_the_line(self, atom):
        """Test the oracle refuses Heisenberg grids."""
        with pytest.raises(ValueError, match="real line"):
            hilbert_fft_oracle(atom.function)


class TestCommutatorApply:
    """Tests for commutator_apply."""

    def test_constant_symbol_commutes(self, kernel_x1, small_grid, atom, pv_cut):
        """Test [c, R] = 0."""
        b = SampledFunction.constant(small_grid, 3.0)

        u = commutator_apply(kernel_x1, b, atom.function, pv_cut)

        scale = float(np.max(np.abs(riesz_apply(kernel_x1, atom.function, pv_cut).flat)))
        assert float(np.max(np.abs(u.flat))) <= 1e-12 * scale

    def test_shift_invariance(self, kernel_x1, x1_function, atom, pv_cut):
        """Test [b + c, R] = [b, R]."""
        plain = commutator_apply(kernel_x1, x1_function, atom.function, pv_cut)
        shifted = commutator_apply(kernel_x1, x1_function + 1.0, atom.function, pv_cut)

        assert np.allclose(plain.flat, shifted.flat, atol=1e-10)

    def test_grid_mismatch(self, kernel_x1, atom, pv_cut):
        """Test b and f must share a grid."""
        other = SampledFunction.constant(GridSpec.cube(GroupMode.HEISENBERG, 1, 1.0, 6), 1.0)

        with pytest.raises(ValueError, match="different grids"):
            commutator_apply(kernel_x1, other, atom.function, pv_cut)

    def test_linfty_bmo_of_constant_symbol(self, kernel_x1, small_grid, atom, pv_cut):
        """Test the BMO norm of a vanishing commutator."""
        family = BallFamily(small_grid, stride=4, radii=[0.5])

        result = linfty_bmo_experiment(kernel_x1, SampledFunction.constant(small_grid, 1.0), atom.function, family, pv_cut)

        assert result.value == pytest.approx(0.0, abs=1e-10)


class TestDistribution:
    """Tests for weak_l1_report and llogl_functional."""

    def test_measures_decrease(self, x1_function):
        """Test superlevel measures shrink as the threshold grows."""
        report = weak_l1_report(x1_function, [0.8, 0.1, 0.5])

        assert [row.threshold for row in report.rows] == [0.1, 0.5, 0.8]
        assert report.measures == sorted(report.measures, reverse=True)
        assert all(row.llogl is None for row in report.rows)

    def test_llogl_attached(self, x1_function, small_grid):
        """Test the L log L column is filled when f is given."""
        f = SampledFunction.constant(small_grid, 1.0)

        report = weak_l1_report(x1_function, [1.0], f)

        assert report.rows[0].llogl == pytest.approx(8.0)

    def test_llogl_values(self, small_grid):
        """Test the functional on a constant."""
        f = SampledFunction.constant(small_grid, 1.0)

        assert llogl_functional(f, 1.0) == pytest.approx(8.0)
        assert llogl_functional(f, 0.5) == pytest.approx(8.0 * 2.0 * (1.0 + math.log(2.0)))

    def test_llogl_lambda(self, small_grid):
        """Test lambda must be positive."""
        with pytest.raises(ValueError, match="positive"):
            llogl_functional(SampledFunction.constant(small_grid, 1.0), 0.0)


class TestTestFunctions:
    """Tests for phi, psi and atoms."""

    def test_phi_balanced(self, x1_function, unit_ball):
        """Test phi sums to zero and follows b - m."""
        phi, M = phi_test_function(x1_function, unit_ball)

        mask = x1_function.grid.ball_mask(unit_ball.center, unit_ball.radius)
        assert float(np.sum(phi.flat)) == 0.0
        assert np.all(phi.flat[~mask] == 0.0)
        assert np.all(phi.flat * (x1_function.flat + 1.0 / 12.0) >= 0.0)
        assert M > 0

    def test_psi(self, x1_function):
        """Test psi is sgn(b) on F and zero elsewhere."""
        F = np.array([0, 1000, 1727])

        psi = psi_test_function(x1_function, F)

        assert np.count_nonzero(psi.flat) == 3
        assert np.array_equal(psi.flat[F], np.sign(x1_function.flat[F]))

    @pytest.mark.parametrize("pattern", ["two-block", "radial"])
    @pytest.mark.parametrize("q", [2.0, math.inf])
    def test_atom_size_and_mean(self, small_grid, unit_ball, pattern, q):
        """Test atoms have mean zero and norm exactly |B|^{1/q - 1}."""
        atom = make_atom(small_grid, unit_ball, pattern, q)

        expected = atom.ball_measure ** ((0.0 if math.isinf(q) else 1.0 / q) - 1.0)
        assert abs(atom.function.integral()) <= 1e-12 * atom.norm()
        assert atom.norm() == pytest.approx(expected)
        assert np.all(atom.function.flat[~atom.support] == 0.0)

    def test_atom_errors(self, small_grid, unit_ball):
        """Test invalid exponents, patterns and tiny balls."""
        with pytest.raises(ValueError, match="q > 1"):
            make_atom(small_grid, unit_ball, q=1.0)
        with pytest.raises(ValueError, match="Unknown"):
            make_atom(small_grid, unit_ball, pattern="spiral")
        with pytest.raises(ValueError, match="needs two"):
            make_atom(small_grid, Ball(np.zeros(3), 0.05))


class TestGrowth:
    """Tests for the (h1b) and (lb) growth functionals."""

    def test_h1b_logarithmic(self, kernel_x1, x1_function, atom):
        """Test the truncated integral grows like log R when g~ is the centre."""
        report = h1b_growth(kernel_x1, x1_function, atom, atom.center, [2.0, 4.0, 8.0, 16.0], 2.0, sphere_cells=16)

        assert report.second_factor > 0
        assert report.slope > 0
        assert report.r_squared == pytest.approx(1.0, abs=1e-9)

    def test_h1b_constant_symbol(self, kernel_x1, small_grid, atom):
        """Test a constant b annihilates the mean-zero atom."""
        b = SampledFunction.constant(small_grid, 1.0)

        value = h1b_condition(kernel_x1, b, atom, atom.center, 8.0, sphere_cells=16)

        assert value == pytest.approx(0.0, abs=1e-12)

    def test_h1b_errors(self, kernel_x1, x1_function, atom):
        """Test r_o <= 1 and a base point outside the ball."""
        with pytest.raises(ValueError, match="r_o"):
            h1b_growth(kernel_x1, x1_function, atom, atom.center, [4.0], 1.0)
        with pytest.raises(ValueError, match="outside"):
            h1b_growth(kernel_x1, x1_function, atom, np.array([0.6, 0.0, 0.0]), [4.0], 2.0)

    def test_lb_condition_constant_symbol(self, kernel_x1, small_grid, unit_ball, atom):
        """Test the mean oscillation factor vanishes for constants."""
        b = SampledFunction.constant(small_grid, 1.0)
        f = SampledFunction.constant(small_grid, 1.0)

        assert lb_condition(kernel_x1, b, unit_ball, f, unit_ball.center, 1.5) == 0.0

    def test_lb_growth(self, kernel_x1, x1_function, sector_spec_x1):
        """Test the sector tail keeps growing with N."""
        ball = Ball(np.zeros(3), 0.35)
        base = sector_spec_x1.r_o * ball.radius

        report = lb_growth(kernel_x1, x1_function, ball, sector_spec_x1, ball.center, [2 * base, 4 * base, 8 * base],
                           sigma_samples=400)

        assert report.second_factor > 0
        assert report.values[0] > 0
        assert report.values == sorted(report.values)
        assert report.slope > 0

    def test_lb_growth_floor(self, kernel_x1, x1_function, sector_spec_x1):
        """Test N must exceed half the truncation."""
        ball = Ball(np.zeros(3), 0.35)

        with pytest.raises(ValueError, match="N must exceed"):
            lb_growth(kernel_x1, x1_function, ball, sector_spec_x1, ball.center, [0.1])


class TestExperiments:
    """Tests for the weak(1,1), theta, two-weight and far-field drivers."""

    @pytest.fixture
    def center_cell(self, small_grid):
        """Return the cell centre closest to the origin."""
        centers = small_grid.centers()
        return centers[int(np.argmin(small_grid.group.norm_arrays(centers)))]

    def test_weak11_converges(self, kernel_x1, x1_function, center_cell):
        """Test the commutator of shrinking bumps approaches its limit."""
        report = weak11_experiment(
            kernel_x1, x1_function, center_cell, [0.4, 0.2], target=np.array([3.0, 0.0, 0.0]), seed=1
        )

        assert report.errors[1] < report.errors[0]
        assert report.limit_value > 0
        assert report.measures == sorted(report.measures, reverse=True)
        assert report.weak_constant > 0

    def test_weak11_needs_far_target(self, kernel_x1, x1_function, center_cell):
        """Test the default target search fails on a small box."""
        with pytest.raises(ValueError, match="far enough"):
            weak11_experiment(kernel_x1, x1_function, center_cell, [0.5])

    def test_weak11_errors(self, kernel_x1, x1_function, center_cell):
        """Test eps below resolution and off-centre g'."""
        with pytest.raises(ValueError, match="resolution"):
            weak11_experiment(kernel_x1, x1_function, center_cell, [0.01])
        with pytest.raises(ValueError, match="cell centre"):
            weak11_experiment(kernel_x1, x1_function, np.array([0.01, 0.02, 0.03]), [0.4])

    def test_fit_theta(self, kernel_x1, x1_function, atom, pv_cut):
        """Test the fit collects one point per threshold with positive L log L."""
        fit = fit_theta(kernel_x1, x1_function, [atom.function], pv_cut, [0.1, 1.0])

        assert fit.points == 2
        assert fit.theta_lsq >= 0
        assert fit.theta_sup >= 0

    def test_two_weight_errors(self, kernel_x1, x1_function, small_grid, pv_cut):
        """Test p <= 1 and an empty family are rejected."""
        ones = Weight.ones(small_grid)
        family = BallFamily(small_grid, stride=4, radii=[0.5])

        with pytest.raises(ValueError, match="p must exceed"):
            two_weight_experiment(kernel_x1, x1_function, ones, ones, 1.0, family, pv_cut)
        with pytest.raises(ValueError, match="Empty"):
            two_weight_experiment(kernel_x1, x1_function, ones, ones, 2.0, BallFamily(small_grid, radii=[5.0]), pv_cut)

    def test_two_weight_unweighted(self, kernel_x1, x1_function, small_grid, pv_cut):
        """Test both sides are positive for a non-constant symbol."""
        ones = Weight.ones(small_grid)
        family = BallFamily(small_grid, stride=4, radii=[0.5])

        report = two_weight_experiment(kernel_x1, x1_function, ones, ones, 2.0, family, pv_cut, max_balls=2)

        assert report.left > 0
        assert report.right > 0
        assert report.ratio == pytest.approx(report.left / report.right)
        assert report.balls_tested <= 2

    def test_far_field_annuli(self, x1_function):
        """Test the rings partition the cells beyond the first radius."""
        rows = far_field_annuli(x1_function, np.zeros(3), 0.25)

        d = x1_function.grid.group.norm_arrays(x1_function.grid.centers())
        assert sum(row["cells"] for row in rows) == int(np.count_nonzero(d >= 0.25))
        assert [row["level"] for row in rows] == list(range(len(rows)))
        assert all(row["outer"] == 2 * row["inner"] for row in rows)
