import numpy as np
import pytest

from uavinspect.coverage import (
    CameraModel,
    CoverageRequest,
    effective_footprint,
    field_of_view,
    generate_viewpoints,
    standoff_distance,
    surface_tangents,
)
from uavinspect.validation import ValidationError

HERO_CAMERA = CameraModel(resolution_px=4000, focal_length=0.0344, sensor_size=0.00617)


class TestFieldOfView:
    def test_inspection_camera_value(self):
        assert field_of_view(HERO_CAMERA, 0.002) == pytest.approx(4.0)

    def test_linear_in_feature_size(self):
        assert field_of_view(HERO_CAMERA, 0.004) == pytest.approx(
            2.0 * field_of_view(HERO_CAMERA, 0.002)
        )

    def test_half_factor_unit_case(self):
        cam = CameraModel(resolution_px=2, focal_length=1.0, sensor_size=1.0)
        assert field_of_view(cam, 1.0) == pytest.approx(1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            field_of_view(HERO_CAMERA, 0.0)
        with pytest.raises(ValidationError):
            CameraModel(resolution_px=0, focal_length=1.0, sensor_size=1.0)


class TestStandoffDistance:
    def test_inspection_camera_value(self):
        assert standoff_distance(HERO_CAMERA, 4.0) == pytest.approx(22.301, abs=1e-3)

    def test_cancellation(self):
        cam = CameraModel(resolution_px=100, focal_length=0.03, sensor_size=0.006)
        assert standoff_distance(cam, cam.sensor_size / cam.focal_length) == pytest.approx(1.0)

    def test_linear_in_footprint(self):
        assert standoff_distance(HERO_CAMERA, 8.0) == pytest.approx(
            2.0 * standoff_distance(HERO_CAMERA, 4.0)
        )


class TestEffectiveFootprint:
    def test_quarter_overlap(self):
        assert effective_footprint(4.0, 0.25) == pytest.approx(3.0)

    def test_no_overlap(self):
        assert effective_footprint(4.0, 0.0) == pytest.approx(4.0)

    def test_full_overlap_degenerate(self):
        assert effective_footprint(4.0, 1.0) == pytest.approx(0.0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            effective_footprint(4.0, 1.5)


def make_request(extent, overlap=0.0):
    return CoverageRequest(smallest_feature=0.002, overlap_fraction=overlap,
                           surface_extent=extent)


class TestGenerateViewpoints:
    def test_single_viewpoint_centered(self):
        views = generate_viewpoints(make_request((4, 4)), HERO_CAMERA,
                                    surface_origin=(0, 0, 0), surface_normal=(0, 0, 1))
        assert len(views) == 1
        v = views[0]
        # centered over the patch at the standoff distance
        assert v.position[2] == pytest.approx(standoff_distance(HERO_CAMERA, 4.0))
        assert np.allclose(np.abs(v.position[:2]), [2.0, 2.0])
        assert np.allclose(v.orientation, [0, 0, -1])

    def test_two_viewpoints_for_double_width(self):
        views = generate_viewpoints(make_request((8, 4)), HERO_CAMERA,
                                    surface_origin=(0, 0, 0), surface_normal=(0, 0, 1))
        assert len(views) == 2

    def test_three_by_three_grid(self):
        views = generate_viewpoints(make_request((9, 9)), HERO_CAMERA,
                                    surface_origin=(0, 0, 0), surface_normal=(0, 0, 1))
        assert len(views) == 9

    def test_full_overlap_rejected(self):
        with pytest.raises(ValidationError):
            generate_viewpoints(make_request((4, 4), overlap=1.0), HERO_CAMERA,
                                (0, 0, 0), (0, 0, 1))

    def test_standoffs_consistent(self):
        request = make_request((9, 5), overlap=0.3)
        views = generate_viewpoints(request, HERO_CAMERA, (0, 0, 0), (0, 0, 1))
        expected = standoff_distance(
            HERO_CAMERA, field_of_view(HERO_CAMERA, request.smallest_feature)
        )
        assert all(v.standoff == expected for v in views)

    @pytest.mark.parametrize("overlap", [0.0, 0.25, 0.5])
    @pytest.mark.parametrize("extent", [(4, 4), (9, 5), (13, 7)])
    def test_footprints_cover_patch(self, extent, overlap):
        request = make_request(extent, overlap)
        origin = np.array([1.0, -2.0, 4.0])
        normal = np.array([1.0, 0.0, 0.0])
        views = generate_viewpoints(request, HERO_CAMERA, origin, normal)
        footprint = views[0].footprint
        t1, t2 = surface_tangents(normal)
        # rasterize the patch (in-plane coordinates) at the feature resolution
        step = request.smallest_feature
        us = np.arange(0, extent[0], step) + step / 2
        vs = np.arange(0, extent[1], step) + step / 2
        covered = np.zeros((us.size, vs.size), dtype=bool)
        half = footprint / 2
        for view in views:
            in_plane = view.position - view.standoff * normal - origin
            cu, cv = float(in_plane @ t1), float(in_plane @ t2)
            covered |= (
                (np.abs(us[:, None] - cu) <= half) & (np.abs(vs[None, :] - cv) <= half)
            )
        assert covered.all()

    def test_no_overlap_never_needs_more_viewpoints(self):
        for extent in [(4, 4), (9, 5), (12, 8)]:
            base = len(generate_viewpoints(make_request(extent, 0.0), HERO_CAMERA,
                                           (0, 0, 0), (0, 0, 1)))
            for overlap in (0.2, 0.5, 0.75):
                more = len(generate_viewpoints(make_request(extent, overlap), HERO_CAMERA,
                                               (0, 0, 0), (0, 0, 1)))
                assert base <= more
