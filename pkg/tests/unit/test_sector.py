"""Unit tests for sectors: construction, membership, certificates and export."""

import numpy as np
import pytest

from src.analysis.sector import (
    ConeSampler,
    SectorRegion,
    analytic_lower_band,
    contains_arrays,
    export_sector_spec,
    find_direction_point,
    infimum_distance,
    load_sector_spec,
    lower_bound_verify,
    sample_region_points,
    scaled_sector,
    sector_contains,
    volume_regularity,
)
from src.core.points import GroupPoint, VectorFieldId
from src.kernels.kernel_table import build_kernel


@pytest.fixture
def origin():
    """Return the identity of H^1."""
    return GroupPoint.identity(1)


class TestSectorSpec:
    """Tests for the constructed spec."""

    def test_geometry(self, sector_spec_x1, heisenberg_group):
        """Test the direction is a unit point and r_o exceeds 1/epsilon."""
        spec = sector_spec_x1

        assert float(heisenberg_group.norm_arrays(np.array(spec.direction))) == pytest.approx(1.0)
        assert spec.r_o * spec.epsilon > 1.0
        assert spec.alpha <= 1.0 <= spec.beta
        assert spec.kernel_at_direction != 0.0
        assert spec.j == "X1" and spec.n == 1

    def test_reports_both_pair_orders(self, sector_spec_x1, heisenberg_group):
        """Test K_j(g~^{-1}) and K_j(g~) are both recorded, nonzero and bounded by the one-sided maximum."""
        kernel = build_kernel("heisenberg", 1, VectorFieldId.parse("X1", 1))
        direction = np.array(sector_spec_x1.direction)

        k_inv = float(kernel.values(heisenberg_group.inverse_arrays(direction)[None, :])[0])
        k_dir = float(kernel.values(direction[None, :])[0])

        assert sector_spec_x1.kernel_at_direction == pytest.approx(k_inv, rel=1e-12)
        assert sector_spec_x1.kernel_at_reflection == pytest.approx(k_dir, rel=1e-12)
        assert k_inv != 0.0 and k_dir != 0.0
        assert abs(k_inv) <= sector_spec_x1.direction_maximum * (1 + 1e-9)

    def test_abelian_rejected(self, abelian_kernel):
        """Test sectors need the Heisenberg group."""
        with pytest.raises(ValueError, match="Heisenberg"):
            find_direction_point(abelian_kernel)

    def test_export_and_load(self, tmp_path, sector_spec_x1):
        """Test the spec survives its JSON file."""
        path = export_sector_spec(sector_spec_x1, tmp_path / "sector.json")

        assert load_sector_spec(path) == sector_spec_x1


class TestSectorRegion:
    """Tests for SectorRegion."""

    def test_scale_must_be_positive(self, sector_spec_x1, origin):
        """Test r <= 0 is rejected."""
        with pytest.raises(ValueError, match="positive"):
            SectorRegion(sector_spec_x1, origin, 0.0)

    def test_base_on_wrong_group(self, sector_spec_x1):
        """Test a base point of H^2 is rejected."""
        with pytest.raises(ValueError, match="does not live"):
            SectorRegion(sector_spec_x1, GroupPoint.identity(2))

    def test_radii(self, sector_spec_x1, origin):
        """Test the truncation scales with r."""
        region = scaled_sector(sector_spec_x1, origin, 0.5)

        assert region.inner_distance == pytest.approx(0.5 * sector_spec_x1.r_o)
        assert region.s_min == pytest.approx(0.5 * sector_spec_x1.r_o / sector_spec_x1.alpha)


class TestMembership:
    """Tests for contains_arrays and sector_contains."""

    def test_sampled_points_are_members(self, sector_spec_x1):
        """Test generated sector points pass the membership test."""
        region = scaled_sector(sector_spec_x1, GroupPoint.heisenberg([0.2], [-0.1], 0.05), 1.0)
        pts = sample_region_points(region, 10.0 * region.s_min, 500, seed=4)

        hits = contains_arrays(region, pts)

        assert np.mean(hits) >= 0.99

    def test_base_point_excluded(self, sector_spec_x1, origin):
        """Test the base point is not in its own sector."""
        assert not sector_contains(scaled_sector(sector_spec_x1, origin), origin)

    def test_reversed_direction_excluded(self, sector_spec_x1, origin, heisenberg_group):
        """Test the dilated inverse direction is not in the sector."""
        region = scaled_sector(sector_spec_x1, origin)
        away = heisenberg_group.dilate_arrays(
            5.0 * region.s_min, heisenberg_group.inverse_arrays(region.direction)
        )

        assert not contains_arrays(region, away[None, :])[0]

    def test_inside_truncation_excluded(self, sector_spec_x1, origin, heisenberg_group):
        """Test points closer than r_o r are not in the sector."""
        region = scaled_sector(sector_spec_x1, origin)
        near = heisenberg_group.dilate_arrays(0.5 * region.inner_distance, region.direction)

        assert not contains_arrays(region, near[None, :])[0]

    def test_infimum_distance(self, sector_spec_x1, origin):
        """Test every sector point lies at least r_o r from the base."""
        region = scaled_sector(sector_spec_x1, origin, 2.0)

        assert infimum_distance(region, count=2000) >= region.inner_distance * (1 - 1e-12)


class TestCertificates:
    """Tests for the kernel lower bound and volume regularity."""

    def test_lower_bound(self, kernel_x1, sector_spec_x1, origin):
        """Test |K| d^Q stays bounded below with one sign in both orders."""
        region = scaled_sector(sector_spec_x1, origin, 1.0)

        report = lower_bound_verify(kernel_x1, region, pair_count=2000, seed=1, strict=True)

        assert report.sign_constant
        assert report.c_est > 0
        assert report.pair_count == 2000
        assert report.predicted == pytest.approx(0.5 * abs(sector_spec_x1.kernel_at_direction))

    def test_lower_bound_is_scale_free(self, kernel_x1, sector_spec_x1, origin):
        """Test the sign survives a change of scale and base."""
        base = GroupPoint.heisenberg([1.0], [2.0], -3.0)

        report = lower_bound_verify(kernel_x1, scaled_sector(sector_spec_x1, base, 0.01), pair_count=1000)

        assert report.sign_constant

    @pytest.mark.slow
    def test_volume_rows(self, sector_spec_x1, origin):
        """Test positive ratios per radius."""
        region = scaled_sector(sector_spec_x1, origin)
        radii = [4.0 * region.inner_distance, 8.0 * region.inner_distance]

        report = volume_regularity(region, radii, mc_count=20000, seed=2)

        assert [row.radius for row in report.rows] == radii
        assert all(row.ratio > 0 and row.hits > 0 for row in report.rows)
        assert report.band_ratio >= 1.0
        assert report.analytic_lower_band == pytest.approx(analytic_lower_band(sector_spec_x1))
        assert report.unit_ball_volume == pytest.approx(np.pi ** 2 / 2)

    def test_volume_radius_floor(self, sector_spec_x1, origin):
        """Test radii up to 2 r_o r are rejected."""
        region = scaled_sector(sector_spec_x1, origin)

        with pytest.raises(ValueError, match="exceed"):
            volume_regularity(region, [2.0 * region.inner_distance])


class TestConeSampler:
    """Tests for ConeSampler."""

    def test_weights_sum_on_h1(self, sector_spec_x1, origin):
        """Test the surface weights add up to Q times the cone measure."""
        sampler = ConeSampler.build(scaled_sector(sector_spec_x1, origin), seed=0, samples=4000)

        sigma, weights = sampler.directions(1000, seed=1)

        assert sigma.shape == (1000, 3)
        assert np.sum(weights) == pytest.approx(4.0 * sampler.cone_measure)

    def test_directions_on_unit_sphere(self, sector_spec_x1, origin, heisenberg_group):
        """Test the sampled directions have norm one."""
        sampler = ConeSampler.build(scaled_sector(sector_spec_x1, origin), samples=4000)

        sigma, _ = sampler.directions(200, seed=5)

        assert np.allclose(heisenberg_group.norm_arrays(sigma), 1.0)

    def test_sample_within_radius(self, sector_spec_x1, heisenberg_group):
        """Test cone samples stay in B(g, R)."""
        base = GroupPoint.heisenberg([0.5], [0.0], 0.25)
        sampler = ConeSampler.build(scaled_sector(sector_spec_x1, base), samples=4000)

        points, measures, hits = sampler.sample(3.0, 500, seed=6)

        assert np.all(heisenberg_group.distance_arrays(points, base.coords[None, :]) <= 3.0 + 1e-9)
        assert np.all(measures > 0)
        assert hits.dtype == bool
