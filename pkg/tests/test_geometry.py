"""Camera model, back-projection, fusion, and mask lifting.

The round-trip oracle (project after backproject must return the pixel
grid) is the main correctness check for the projection math; fusion is
checked against a brute-force containment argument.
"""

import numpy as np
import pytest

from scenefit.errors import BehindCameraError, EmptyElementError, InputError
from scenefit.geometry import (
    Camera,
    DepthImage,
    PointCloud,
    backproject,
    fuse,
    lift_mask,
    project,
    valid_pixels,
)
from scenefit.rotations import rodrigues


def make_camera(width=32, height=32, fx=40.0, fy=40.0, pose=None, **kw):
    if pose is None:
        pose = np.eye(4)
    return Camera(
        fx=fx,
        fy=fy,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        width=width,
        height=height,
        world_from_camera=pose,
        **kw,
    )


def random_pose(rng):
    T = np.eye(4)
    T[:3, :3] = rodrigues(rng.uniform(-1, 1, 3))
    T[:3, 3] = rng.uniform(-2, 2, 3)
    return T


class TestCamera:
    def test_rejects_non_orthonormal_rotation(self):
        T = np.eye(4)
        T[0, 1] = 0.3
        with pytest.raises(InputError):
            make_camera(pose=T)

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(InputError):
            make_camera(fx=-1.0)

    def test_rejects_non_unit_gravity(self):
        with pytest.raises(InputError):
            make_camera(gravity_dir=np.array([0.0, 0.0, -2.0]))


class TestBackproject:
    def test_principal_point_on_optical_axis(self):
        cam = make_camera(width=33, height=33)  # odd size: integer center
        depth = np.zeros((33, 33))
        depth[16, 16] = 2.0
        cloud = backproject(DepthImage(values=depth), cam)
        assert len(cloud) == 1
        np.testing.assert_allclose(cloud.points[0], [0.0, 0.0, 2.0], atol=1e-12)

    def test_zero_depth_emits_no_point(self):
        cam = make_camera()
        depth = np.zeros((32, 32))
        cloud = backproject(DepthImage(values=depth), cam)
        assert len(cloud) == 0

    def test_one_focal_length_off_axis(self):
        # Pixel one focal length right of center at depth 1 lands at
        # unit lateral offset.
        cam = make_camera(width=101, height=101, fx=30.0, fy=30.0)
        depth = np.zeros((101, 101))
        depth[50, 80] = 1.0  # u - cx = 30 = fx
        cloud = backproject(DepthImage(values=depth), cam)
        np.testing.assert_allclose(cloud.points[0], [1.0, 0.0, 1.0], atol=1e-12)

    def test_dimension_mismatch(self):
        cam = make_camera(width=32, height=32)
        with pytest.raises(InputError):
            backproject(DepthImage(values=np.ones((16, 16))), cam)

    def test_stride_subsamples(self):
        cam = make_camera()
        depth = DepthImage(values=np.ones((32, 32)))
        assert len(backproject(depth, cam, stride=2)) == 16 * 16

    def test_rigid_equivariance(self):
        # Backprojecting with pose T equals T applied to the identity-pose
        # cloud.
        rng = np.random.default_rng(7)
        T = random_pose(rng)
        depth = DepthImage(values=rng.uniform(0.5, 4.0, (32, 32)))
        cam_id = make_camera()
        cam_T = make_camera(pose=T)
        base = backproject(depth, cam_id).points
        moved = backproject(depth, cam_T).points
        expect = base @ T[:3, :3].T + T[:3, 3]
        np.testing.assert_allclose(moved, expect, atol=1e-9)


class TestProject:
    def test_optical_axis_hits_center(self):
        cam = make_camera()
        uv = project(np.array([0.0, 0.0, 2.0]), cam)
        np.testing.assert_allclose(uv, [cam.cx, cam.cy], atol=1e-12)

    def test_behind_camera_raises(self):
        cam = make_camera()
        with pytest.raises(BehindCameraError):
            project(np.array([0.0, 0.0, -1.0]), cam)

    def test_round_trip_random_depths(self):
        # project(backproject(pixel)) returns the original pixel centers.
        rng = np.random.default_rng(42)
        T = random_pose(rng)
        cam = make_camera(pose=T)
        values = rng.uniform(0.2, 5.0, (32, 32))
        values[rng.random((32, 32)) < 0.3] = 0.0  # sprinkle invalid pixels
        depth = DepthImage(values=values)
        cloud = backproject(depth, cam)
        uv = project(cloud.points, cam)
        np.testing.assert_allclose(uv, valid_pixels(depth), atol=1e-6)


class TestFuse:
    def test_duplicate_points_collapse(self):
        a = PointCloud(points=np.array([[0.05, 0.05, 0.05]]))
        b = PointCloud(points=np.array([[0.05, 0.05, 0.05]]))
        fused = fuse([a, b], voxel=0.1)
        assert len(fused) == 1
        np.testing.assert_allclose(fused.points[0], [0.05, 0.05, 0.05])

    def test_zero_voxel_concatenates(self):
        rng = np.random.default_rng(3)
        a = PointCloud(points=rng.normal(size=(10, 3)))
        b = PointCloud(points=rng.normal(size=(5, 3)))
        fused = fuse([a, b], voxel=0.0)
        np.testing.assert_array_equal(
            fused.points, np.vstack([a.points, b.points])
        )

    def test_output_points_near_inputs(self):
        # Brute-force containment: every centroid lies within the voxel
        # half-diagonal of some input point.
        rng = np.random.default_rng(11)
        pts = rng.uniform(-1, 1, (10_000, 3))
        fused = fuse([PointCloud(points=pts)], voxel=0.05)
        half_diag = 0.05 * np.sqrt(3) / 2
        for p in fused.points:
            assert np.min(np.linalg.norm(pts - p, axis=1)) <= half_diag + 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1, 1, (2_000, 3))
        once = fuse([PointCloud(points=pts)], voxel=0.07)
        twice = fuse([once], voxel=0.07)
        np.testing.assert_array_equal(
            np.sort(once.points, axis=0), np.sort(twice.points, axis=0)
        )

    def test_colors_averaged(self):
        pts = np.array([[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]])
        cols = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        fused = fuse([PointCloud(points=pts, colors=cols)], voxel=0.1)
        np.testing.assert_allclose(fused.colors[0], [0.5, 0.5, 0.0])


class TestLiftMask:
    def test_full_mask_equals_backproject(self):
        rng = np.random.default_rng(9)
        cam = make_camera()
        depth = DepthImage(values=rng.uniform(0.5, 3.0, (32, 32)))
        element = lift_mask(
            np.ones((32, 32), bool), depth, cam, id="e", role="supporting"
        )
        np.testing.assert_array_equal(
            element.points.points, backproject(depth, cam).points
        )

    def test_single_pixel(self):
        cam = make_camera(width=33, height=33)
        depth = np.zeros((33, 33))
        depth[16, 16] = 1.0
        mask = np.zeros((33, 33), bool)
        mask[16, 16] = True
        element = lift_mask(
            mask, DepthImage(values=depth), cam, id="dot", role="functional"
        )
        np.testing.assert_allclose(element.points.points[0], [0.0, 0.0, 1.0])
        np.testing.assert_allclose(element.bbox_center("0"), [16.0, 16.0])

    def test_masked_subset_membership(self):
        # lift_mask points are a bit-exact subset of the full backprojection.
        rng = np.random.default_rng(13)
        cam = make_camera(pose=random_pose(rng))
        depth = DepthImage(values=rng.uniform(0.5, 3.0, (32, 32)))
        mask = rng.random((32, 32)) < 0.4
        element = lift_mask(mask, depth, cam, id="e", role="supporting")
        full = {p.tobytes() for p in backproject(depth, cam).points}
        for p in element.points.points:
            assert p.tobytes() in full

    def test_no_valid_depth_raises(self):
        cam = make_camera()
        depth = np.zeros((32, 32))
        depth[0, 0] = 1.0
        mask = np.zeros((32, 32), bool)
        mask[5, 5] = True  # masked pixel has zero depth
        with pytest.raises(EmptyElementError):
            lift_mask(mask, DepthImage(values=depth), cam, id="e", role="functional")


class TestDepthImage:
    def test_rejects_negative(self):
        with pytest.raises(InputError):
            DepthImage(values=np.array([[-0.1]]))

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            DepthImage(values=np.array([[np.nan]]))
