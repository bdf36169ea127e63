"""Unit tests for the heat kernel, the Riesz kernel paths and the kernel tables."""

import math

import numpy as np
import pytest

from src.core.errors import UndefinedPhaseError
from src.core.models import Calibration
from src.core.points import GroupMode, GroupPoint, VectorFieldId
from src.kernels.heat_kernel import heat_eval, heat_eval_abelian, heat_vector_field, lam_coth, lam_over_sinh
from src.kernels.kernel_table import AbelianKernel, CalibratedKernel, build_kernel, phase_table
from src.kernels.riesz_kernel import (
    abelian_riesz_closed_form,
    analytic_calibration,
    analytic_constant,
    calibrate_constant,
    contour_A,
    contour_B,
    contour_oracle,
    default_calibration,
    default_calibration_sample,
    nonvanishing_report,
    phase_of,
    phase_pair,
    riesz_formula_eval,
    riesz_subordination_eval,
    zero_scan,
)


class TestHeatHelpers:
    """Tests for the guarded hyperbolic helpers."""

    @pytest.mark.parametrize("lam", [1e-8, 1e-3, 0.5, 3.0, 25.0, -25.0])
    def test_lam_over_sinh(self, lam):
        """Test agreement with the direct formula away from overflow."""
        assert lam_over_sinh(lam, 1e-6) == pytest.approx(lam / math.sinh(lam), rel=1e-12)

    def test_lam_coth_at_zero(self):
        """Test the removable singularity."""
        assert lam_coth(0.0, 1e-6) == 1.0

    def test_lam_over_sinh_no_overflow(self):
        """Test very large arguments underflow to 0 instead of raising."""
        assert lam_over_sinh(1000.0, 1e-6) == pytest.approx(0.0, abs=1e-300)


class TestHeatEval:
    """Tests for heat_eval."""

    def test_origin_value_h1(self):
        """Test p_h(0) = 1 / (64 h^2) on H^1."""
        value = heat_eval(GroupPoint.identity(1), 1.0)

        assert value.value == pytest.approx(1.0 / 64.0, rel=1e-9)
        assert value.reliable

    def test_scaling(self, sample_point):
        """Test p_{r^2 h}(delta_r g) = r^{-Q} p_h(g)."""
        r = 1.7
        scaled = GroupPoint(sample_point.coords * np.array([r, r, r * r]), n=1)

        base = heat_eval(sample_point, 0.8).value
        dilated = heat_eval(scaled, 0.8 * r * r).value

        assert dilated == pytest.approx(r ** -4 * base, rel=1e-8)

    def test_positive_with_small_imaginary_residual(self, sample_point):
        """Test positivity and the odd-part residual."""
        value = heat_eval(sample_point, 0.5)

        assert value.value > 0
        assert abs(value.imag_residual) < 1e-8 * value.value

    def test_symmetric_under_inversion(self, sample_point):
        """Test p_h(g^{-1}) = p_h(g)."""
        inverse = GroupPoint(-sample_point.coords, n=1)

        assert heat_eval(inverse, 1.0).value == pytest.approx(heat_eval(sample_point, 1.0).value, rel=1e-10)

    @pytest.mark.parametrize("h", [0.0, -1.0])
    def test_non_positive_time(self, sample_point, h):
        """Test h <= 0 is rejected."""
        with pytest.raises(ValueError, match="positive"):
            heat_eval(sample_point, h)

    def test_abelian_gaussian(self):
        """Test the abelian mode returns the Gaussian."""
        g = GroupPoint.abelian([0.3, -0.4])

        value = heat_eval(g, 0.5)

        assert value.value == pytest.approx(math.exp(-0.25 / 2.0) / (2.0 * math.pi), rel=1e-14)
        assert value.value == heat_eval_abelian(g.coords, 0.5)


class TestHeatVectorField:
    """Tests for heat_vector_field."""

    @pytest.mark.parametrize("label", ["X1", "Y1"])
    def test_analytic_matches_finite_difference(self, sample_point, label):
        """Test differentiation under the integral against central differences."""
        j = VectorFieldId.parse(label, 1)

        analytic = heat_vector_field(j, sample_point, 1.0)
        numeric = heat_vector_field(j, sample_point, 1.0, method="finite-difference")

        assert analytic == pytest.approx(numeric, rel=1e-5)

    def test_vanishes_at_origin(self, field_x1):
        """Test X_1 p_h(0) = 0 by symmetry."""
        assert heat_vector_field(field_x1, GroupPoint.identity(1), 1.0) == 0.0

    def test_abelian_derivative(self):
        """Test d/dx of the Gaussian."""
        j = VectorFieldId.parse("X1", 1, GroupMode.ABELIAN)
        g = GroupPoint.abelian(0.6)

        expected = -0.6 / 2.0 * heat_eval_abelian(0.6, 1.0)

        assert heat_vector_field(j, g, 1.0) == pytest.approx(expected)

    def test_unknown_method(self, sample_point, field_x1):
        """Test unknown methods are rejected."""
        with pytest.raises(ValueError, match="Unknown method"):
            heat_vector_field(field_x1, sample_point, 1.0, method="spectral")


class TestPhaseAndContours:
    """Tests for the phase angle and the contour integrals."""

    def test_phase_values(self):
        """Test phi on the horizontal plane and on the centre axis."""
        assert phase_of(GroupPoint.heisenberg([1.0], [0.0], 0.0)).phi == 0.0
        assert phase_of(GroupPoint.heisenberg([0.0], [0.0], 2.0)).phi == pytest.approx(math.pi / 2)
        assert phase_of(GroupPoint.heisenberg([0.0], [0.0], -2.0)).phi == pytest.approx(-math.pi / 2)

    def test_phase_dilation_invariant(self, sample_point):
        """Test the phase does not change under dilations."""
        scaled = GroupPoint(sample_point.coords * np.array([3.0, 3.0, 9.0]), n=1)

        assert phase_of(scaled).phi == pytest.approx(phase_of(sample_point).phi)

    def test_phase_undefined_at_identity(self):
        """Test the identity raises."""
        with pytest.raises(UndefinedPhaseError):
            phase_of(GroupPoint.identity(1))

    def test_contours_at_zero(self):
        """Test A_n(0) is real positive and B_n(0) vanishes by oddness."""
        a = contour_A(1, 0.0)
        b = contour_B(1, 0.0)

        assert a.real > 0
        assert abs(a.imag) < 1e-12
        assert abs(b.value) < 1e-10
        assert a.branch_continuous

    def test_fixed_phase_parity(self):
        """Test A(i phi) is real and B(i phi) is imaginary, with the expected parities."""
        a_pos, b_pos = phase_pair(1, 0.7)
        a_neg, b_neg = phase_pair(1, -0.7)

        assert abs(a_pos.imag) < 1e-9 * abs(a_pos)
        assert abs(b_pos.real) < 1e-9 * abs(b_pos)
        assert a_neg.real == pytest.approx(a_pos.real, rel=1e-9)
        assert b_neg.imag == pytest.approx(-b_pos.imag, rel=1e-9)

    @pytest.mark.parametrize("n", [1, 2])
    def test_high_precision_oracle(self, n):
        """Test the double-precision contours against the mpmath values."""
        a_oracle = contour_oracle("A", n)
        b_oracle = contour_oracle("B", n)

        assert contour_A(n, 0.0).real == pytest.approx(a_oracle.real, rel=1e-9)
        assert abs(b_oracle) < 1e-12

    def test_oracle_off_axis(self):
        """Test the oracle agrees away from phi = 0 as well."""
        a_val, b_val = phase_pair(1, 0.7)

        assert a_val.real == pytest.approx(contour_oracle("A", 1, 0.7).real, rel=1e-9)
        assert b_val.imag == pytest.approx(contour_oracle("B", 1, 0.7).imag, rel=1e-9)

    def test_oracle_rejects_unknown_kind(self):
        """Test only A and B are known."""
        with pytest.raises(ValueError, match="Unknown contour"):
            contour_oracle("C", 1)

    def test_imaginary_part_out_of_range(self):
        """Test |Im w| > pi/2 is rejected."""
        with pytest.raises(ValueError, match="Im w"):
            contour_A(1, complex(0.0, 2.0))


class TestRieszFormula:
    """Tests for the formula path and its constant."""

    def test_analytic_constant_h1(self):
        """Test the closed-form constant -3 / (8 pi^2) on H^1."""
        assert analytic_constant(1) == pytest.approx(-3.0 / (8.0 * math.pi ** 2), rel=1e-14)

    def test_raw_value_is_real(self, sample_point, field_x1):
        """Test the raw formula value has no imaginary part."""
        value = riesz_formula_eval(field_x1, sample_point)

        assert abs(value.raw_imag) < 1e-9 * abs(value.raw_real)
        assert value.calibrated is None

    def test_calibrated_value(self, sample_point, field_x1):
        """Test calibration multiplies the raw value."""
        cal = analytic_calibration(1, field_x1)

        value = riesz_formula_eval(field_x1, sample_point, calibration=cal)

        assert value.calibrated == pytest.approx(cal.constant_real * value.raw_real)
        assert value.calibration_id == cal.calibration_id

    def test_homogeneity(self, sample_point, field_x1):
        """Test raw values scale like r^{-Q} under delta_r."""
        r = 2.0
        scaled = GroupPoint(sample_point.coords * np.array([r, r, r * r]), n=1)

        base = riesz_formula_eval(field_x1, sample_point).raw_real
        dilated = riesz_formula_eval(field_x1, scaled).raw_real

        assert dilated == pytest.approx(r ** -4 * base, rel=1e-10)

    def test_matches_subordination(self, field_x1):
        """Test the analytic constant reproduces the subordination path."""
        g = default_calibration_sample(1, count=1, seed=3)[0]
        cal = analytic_calibration(1, field_x1)

        formula = riesz_formula_eval(field_x1, g, calibration=cal).calibrated
        subordination = riesz_subordination_eval(field_x1, g)

        assert formula == pytest.approx(subordination, rel=1e-4)

    def test_subordination_undefined_at_identity(self, field_x1):
        """Test the identity raises."""
        with pytest.raises(UndefinedPhaseError):
            riesz_subordination_eval(field_x1, GroupPoint.identity(1))


class TestCalibration:
    """Tests for calibration input checks and records."""

    def test_sample_on_unit_sphere(self):
        """Test the default sample lies on d_K = 1 and is deterministic."""
        sample = default_calibration_sample(2, count=5, seed=4)

        norms = [(np.dot(g.z, g.z) ** 2 + g.t ** 2) ** 0.25 for g in sample]

        assert np.allclose(norms, 1.0)
        assert sample == default_calibration_sample(2, count=5, seed=4)

    def test_too_few_points(self, field_x1):
        """Test small samples are rejected."""
        with pytest.raises(ValueError, match="at least 8"):
            calibrate_constant(field_x1, default_calibration_sample(1, count=3))

    def test_identity_in_sample(self, field_x1):
        """Test the identity is rejected."""
        sample = default_calibration_sample(1, count=7) + [GroupPoint.identity(1)]

        with pytest.raises(ValueError, match="identity"):
            calibrate_constant(field_x1, sample)

    @pytest.mark.slow
    def test_fit_recovers_analytic_constant(self, field_x1):
        """Test the least-squares constant against the closed form."""
        record = calibrate_constant(field_x1, default_calibration_sample(1, count=8))

        assert record.method == "fitted"
        assert record.residual < 1e-4
        assert record.constant_real == pytest.approx(analytic_constant(1), rel=1e-4)
        assert abs(record.constant_imag) < 1e-4 * abs(record.constant_real)

    def test_calibration_id_stable(self, field_x1):
        """Test the identifier depends on the record content."""
        a = analytic_calibration(1, field_x1)
        b = Calibration.model_validate(a.model_dump(mode="json"))

        assert a.calibration_id == b.calibration_id
        assert a.calibration_id.startswith("analytic-X1-")


class TestZeroScan:
    """Tests for zero_scan."""

    def test_grid_too_small(self):
        """Test coarse scans are rejected."""
        with pytest.raises(ValueError, match="grid >= 64"):
            zero_scan(1, 32)

    def test_report(self):
        """Test the report is sorted and consistent."""
        report = zero_scan(1, 64)

        assert report.scan_max > 0
        assert report.zeros == sorted(report.zeros)
        assert all(-math.pi / 2 <= z <= math.pi / 2 for z in report.zeros)


class TestKernelTables:
    """Tests for the vectorised kernels."""

    def test_table_matches_direct(self):
        """Test the phase splines against direct contour integrals off the nodes."""
        table = phase_table(1)
        phis = np.array([-1.31, -0.42, 0.05, 0.77, 1.49])

        direct_a = np.array([phase_pair(1, float(p))[0].real for p in phis])
        direct_b = np.array([phase_pair(1, float(p))[1].imag for p in phis])
        scale = max(np.max(np.abs(direct_a)), np.max(np.abs(direct_b)))

        assert np.max(np.abs(table.a(phis) - direct_a)) < 1e-6 * scale
        assert np.max(np.abs(table.b(phis) - direct_b)) < 1e-6 * scale

    def test_table_matches_formula(self, kernel_x1, sample_point, field_x1):
        """Test bulk and single-point evaluations agree."""
        direct = riesz_formula_eval(field_x1, sample_point, calibration=kernel_x1.calibration).calibrated

        assert kernel_x1(sample_point) == pytest.approx(direct, rel=1e-6)

    def test_zero_at_identity(self, kernel_x1):
        """Test the identity gets 0."""
        assert kernel_x1.values(np.zeros((1, 3)))[0] == 0.0

    def test_bulk_homogeneity(self, kernel_x1, rng):
        """Test K(delta_r g) = r^{-Q} K(g) on random points."""
        pts = rng.standard_normal((50, 3))
        scaled = pts * np.array([3.0, 3.0, 9.0])

        base = kernel_x1.values(pts)

        assert np.allclose(kernel_x1.values(scaled), 3.0 ** -4 * base, rtol=1e-10, atol=1e-12 * np.max(np.abs(base)))

    def test_pair_is_left_invariant(self, kernel_x1, rng):
        """Test K(c g1, c g2) = K(g1, g2)."""
        group = kernel_x1.group
        g1, g2, c = rng.standard_normal((3, 20, 3))

        moved = kernel_x1.pair(group.compose_arrays(c, g1), group.compose_arrays(c, g2))

        assert np.allclose(moved, kernel_x1.pair(g1, g2), rtol=1e-9)

    def test_export_rows(self, kernel_x1):
        """Test the export header and an empty export."""
        header, rows = kernel_x1.export_rows(np.zeros((0, 3)))

        assert header == ["x1", "y1", "t", "phi", "raw_real", "raw_imag", "calibrated"]
        assert rows == []

    def test_abelian_hilbert_kernel(self, abelian_kernel):
        """Test the R^1 kernel is -1/(pi x)."""
        x = np.array([[0.5], [-2.0]])

        assert np.allclose(abelian_kernel.values(x), -1.0 / (math.pi * x[:, 0]))

    def test_abelian_oracle_r3(self):
        """Test the R^3 closed form -x_j / (pi^2 |x|^4)."""
        kernel = AbelianKernel(3, VectorFieldId.parse("X2", 3, GroupMode.ABELIAN))
        x = np.array([[1.0, 2.0, -1.0]])

        assert kernel.values(x)[0] == pytest.approx(-2.0 / (math.pi ** 2 * 36.0))

    def test_build_kernel_modes(self, field_x1):
        """Test the factory picks the kernel class by mode."""
        assert isinstance(build_kernel("heisenberg", 1, field_x1), CalibratedKernel)
        assert isinstance(build_kernel("abelian", 1, VectorFieldId.parse("X1", 1, GroupMode.ABELIAN)), AbelianKernel)

    def test_calibration_mismatch(self, field_x1):
        """Test a calibration for another field is rejected."""
        other = analytic_calibration(1, VectorFieldId.parse("Y1", 1))

        with pytest.raises(ValueError, match="does not match"):
            CalibratedKernel(1, field_x1, other)

    def test_default_kernel_uses_fitted_constant(self, field_x1):
        """Test kernels built without a calibration carry the fitted constant, not the closed form."""
        kernel = build_kernel("heisenberg", 1, field_x1)

        cal = kernel.calibration
        assert cal.method == "fitted"
        assert kernel.calibration_id.startswith("fitted-X1-")
        assert cal.constant_real == pytest.approx(analytic_constant(1), rel=1e-6)
        assert cal.residual is not None and cal.residual < 1e-4

    def test_default_calibration_is_cached(self, field_x1):
        """Test the default fit runs once per (n, j, cfg)."""
        first = default_calibration(field_x1)
        second = default_calibration(VectorFieldId.parse("X1", 1))

        assert first is second
        assert CalibratedKernel(1, field_x1).calibration is first


class TestNonvanishing:
    """Tests for nonvanishing_report and the Euclidean closed form."""

    def test_grid_too_small(self, field_x1):
        """Test coarse sphere grids are rejected."""
        with pytest.raises(ValueError, match="at least 32"):
            nonvanishing_report(field_x1, 16)

    def test_report_counts(self, field_x1):
        """Test every flagged cell is attributed to exactly one locus."""
        report = nonvanishing_report(field_x1, 32)

        assert 0.0 <= report.near_zero_fraction < 1.0
        assert sum(report.locus_counts.values()) == len(report.near_zero_cells)
        assert len(report.near_zero_cells) == round(report.near_zero_fraction * 32 * 32)
        assert report.j == "X1"

    def test_hilbert_kernel(self):
        """Test the n = 1 closed form is -1/(pi x)."""
        j = VectorFieldId.parse("X1", 1, GroupMode.ABELIAN)
        x = np.array([[0.5], [-2.0]])

        values = abelian_riesz_closed_form(j, x)

        assert values == pytest.approx(-1.0 / (math.pi * x[:, 0]))
