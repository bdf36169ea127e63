"""Unit tests for Pydantic models."""

import json
import math

import pytest
from pydantic import ValidationError

from src.core.models import (
    Calibration,
    ContourValue,
    DistributionReport,
    DistributionRow,
    ExperimentReport,
    PhaseAngle,
    QuadratureConfig,
    RieszKernelValue,
    SectorSpec,
)


def _sector(**overrides):
    fields = dict(
        j="X1", n=1, direction=(1.0, 0.0, 0.0), epsilon=0.1, r_o=16.0,
        alpha=0.9, beta=1.1, kernel_at_direction=-0.05,
    )
    fields.update(overrides)
    return SectorSpec(**fields)


class TestQuadratureConfig:
    """Tests for QuadratureConfig model."""

    def test_defaults(self):
        """Test the default tolerances."""
        cfg = QuadratureConfig()

        assert cfg.truncation == 40.0
        assert cfg.rel_tol == 1e-10
        assert cfg.max_attempts == 3

    def test_frozen(self):
        """Test that configs are immutable and hashable."""
        cfg = QuadratureConfig()

        with pytest.raises(ValidationError):
            cfg.truncation = 10.0
        assert hash(cfg) == hash(QuadratureConfig())

    def test_attempts_bounded(self):
        """Test the escalation attempts limit."""
        with pytest.raises(ValidationError) as exc_info:
            QuadratureConfig(max_attempts=9)

        assert "max_attempts" in str(exc_info.value)


class TestPhaseAngle:
    """Tests for PhaseAngle model."""

    def test_range(self):
        """Test phases outside [-pi/2, pi/2] are rejected."""
        assert PhaseAngle(phi=math.pi / 2).phi == pytest.approx(math.pi / 2)

        with pytest.raises(ValidationError):
            PhaseAngle(phi=2.0)


class TestValues:
    """Tests for the complex-valued results."""

    def test_contour_value(self):
        """Test the complex view of a contour value."""
        value = ContourValue(real=1.5, imag=-0.5, error=1e-12)

        assert value.value == complex(1.5, -0.5)
        assert value.branch_continuous

    def test_negative_error_rejected(self):
        """Test error estimates are non-negative."""
        with pytest.raises(ValidationError):
            ContourValue(real=0.0, imag=0.0, error=-1.0)

    def test_kernel_value(self):
        """Test the raw complex value."""
        value = RieszKernelValue(j="Y1", raw_real=0.25, raw_imag=0.0)

        assert value.raw == 0.25
        assert value.calibrated is None


class TestCalibration:
    """Tests for Calibration model."""

    def test_identifier_is_stable(self):
        """Test equal calibrations share an id and the method prefixes it."""
        first = Calibration(n=1, j="X1", constant_real=-0.1, method="analytic")
        second = Calibration(n=1, j="X1", constant_real=-0.1, method="analytic")

        assert first.calibration_id == second.calibration_id
        assert first.calibration_id.startswith("analytic-X1-")

    def test_identifier_tracks_constant(self):
        """Test a different constant gives a different id."""
        first = Calibration(n=1, j="X1", constant_real=-0.1)
        second = Calibration(n=1, j="X1", constant_real=-0.2)

        assert first.calibration_id != second.calibration_id
        assert first.constant == complex(-0.1, 0.0)

    def test_identifier_serialised(self):
        """Test the computed id is part of the dump."""
        dumped = Calibration(n=2, j="Y2", constant_real=1.0).model_dump()

        assert "calibration_id" in dumped


class TestSectorSpec:
    """Tests for SectorSpec model."""

    def test_valid(self):
        """Test a well-formed spec."""
        spec = _sector()

        assert spec.r_o * spec.epsilon > 1.0
        assert spec.quasi_constant == 1.0

    def test_inner_radius_must_beat_aperture(self):
        """Test r_o <= 1/epsilon is rejected."""
        with pytest.raises(ValidationError, match="r_o must exceed"):
            _sector(r_o=10.0)

    def test_alpha_beta_bracket_one(self):
        """Test alpha <= 1 <= beta."""
        with pytest.raises(ValidationError):
            _sector(alpha=1.2)
        with pytest.raises(ValidationError):
            _sector(beta=0.8)

    def test_json_round_trip(self):
        """Test a spec loads back from its JSON."""
        spec = _sector(calibration_id="analytic-X1-abc")

        assert SectorSpec.model_validate_json(spec.model_dump_json()) == spec


class TestReports:
    """Tests for report models."""

    def test_distribution_measures(self):
        """Test the measure column view."""
        report = DistributionReport(rows=[DistributionRow(threshold=1.0, measure=0.5),
                                          DistributionRow(threshold=2.0, measure=0.1)])

        assert report.measures == [0.5, 0.1]

    def test_experiment_report_canonical(self):
        """Test the envelope serialises with sorted keys."""
        report = ExperimentReport(
            experiment="bmo median", paper_ref="median m_b(S)", config_hash="0" * 64,
            seed=3, payload={"z": 1, "a": 2},
        )

        text = report.canonical_json()

        assert json.loads(text)["payload"] == {"a": 2, "z": 1}
        assert text.index('"calibration_id"') < text.index('"experiment"')
        assert text == report.canonical_json()

    def test_experiment_report_required(self):
        """Test that the envelope fields are required."""
        with pytest.raises(ValidationError):
            ExperimentReport(experiment="kernel eval", config_hash="x", seed=0)
