"""Body model: forward kinematics, SDF, part samples, mirroring.

FK is checked against an independent oracle that multiplies 4x4 local
transforms naively along each joint chain; the SDF against a dense
surface-sampling oracle and its exact 1-Lipschitz property.
"""

import numpy as np
import pytest

from scenefit.body import (
    CONTACT_VOCABULARY,
    HAND_ALIASES,
    PARTITION_PARTS,
    BodyPose,
    default_skeleton,
    forward_kinematics,
    load_pose,
    mirror_part,
    part_samples,
    pose_from_dict,
    pose_to_dict,
    relaxed_hand_theta,
    save_pose,
    sdf,
    transform_pose,
)
from scenefit.errors import InputError, VocabularyError
from scenefit.rotations import rodrigues


@pytest.fixture(scope="module")
def skel():
    return default_skeleton()


def random_pose(skel, rng, angle_scale=0.6):
    return BodyPose(
        beta=rng.uniform(0.8, 1.2, skel.n_joints),
        r=rng.uniform(-1, 1, 3),
        phi=rng.uniform(-1, 1, 3),
        theta_body=rng.uniform(-angle_scale, angle_scale, (skel.n_body_joints - 1, 3)),
        theta_hand=rng.uniform(-angle_scale, angle_scale, (skel.n_hand_joints, 3)),
    )


def fk_oracle_joint(skel, pose, joint):
    """Naive 4x4 matrix chain from the root to one joint."""
    chain = []
    j = joint
    while j >= 0:
        chain.append(j)
        j = skel.parents[j]
    T = np.eye(4)
    for j in reversed(chain):
        local = np.eye(4)
        local[:3, :3] = rodrigues(pose.local_rotation_vec(j, skel))
        local[:3, 3] = pose.beta[j] * skel.offsets[j] if skel.parents[j] >= 0 else pose.r
        # Translate into the parent frame first, then rotate about the joint.
        step = np.eye(4)
        step[:3, 3] = local[:3, 3]
        rot = np.eye(4)
        rot[:3, :3] = local[:3, :3]
        T = T @ step @ rot
    return T


class TestSkeletonAsset:
    def test_counts(self, skel):
        assert skel.n_joints == 54
        assert skel.n_body_joints == 22
        assert skel.n_hand_joints == 32  # per hand: wrist + 15 finger joints

    def test_part_table_covers_partition(self, skel):
        assert set(skel.part_table) == set(PARTITION_PARTS)

    def test_wrists_present(self, skel):
        skel.joint_index("left_wrist")
        skel.joint_index("right_wrist")


class TestForwardKinematics:
    def test_rest_pose_is_cumulative_offsets(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        expected = np.zeros((skel.n_joints, 3))
        for j in range(1, skel.n_joints):
            expected[j] = expected[skel.parents[j]] + skel.offsets[j]
        np.testing.assert_allclose(posed.joint_pos, expected, atol=1e-12)

    def test_translation_shifts_all_samples(self, skel):
        rng = np.random.default_rng(0)
        pose = random_pose(skel, rng)
        t = np.array([0.3, -0.2, 1.1])
        a = forward_kinematics(skel, pose)
        b = forward_kinematics(skel, pose.replace(r=pose.r + t))
        np.testing.assert_allclose(b.samples, a.samples + t, atol=1e-12)

    def test_matches_matrix_chain_oracle(self, skel):
        rng = np.random.default_rng(1)
        for _ in range(5):
            pose = random_pose(skel, rng)
            posed = forward_kinematics(skel, pose)
            for joint in rng.integers(0, skel.n_joints, size=8):
                T = fk_oracle_joint(skel, pose, int(joint))
                np.testing.assert_allclose(posed.joint_pos[joint], T[:3, 3], atol=1e-9)
                np.testing.assert_allclose(posed.joint_rot[joint], T[:3, :3], atol=1e-9)

    def test_determinism(self, skel):
        pose = random_pose(skel, np.random.default_rng(2))
        a = forward_kinematics(skel, pose)
        b = forward_kinematics(skel, pose)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert a.joint_pos.tobytes() == b.joint_pos.tobytes()

    def test_rigid_equivariance(self, skel):
        rng = np.random.default_rng(3)
        pose = random_pose(skel, rng)
        R = rodrigues(rng.uniform(-1, 1, 3))
        t = rng.uniform(-1, 1, 3)
        moved = transform_pose(pose, R, t)
        a = forward_kinematics(skel, pose)
        b = forward_kinematics(skel, moved)
        np.testing.assert_allclose(b.samples, a.samples @ R.T + t, atol=1e-9)
        np.testing.assert_allclose(b.capsule_e0, a.capsule_e0 @ R.T + t, atol=1e-9)

    def test_dimension_mismatch_rejected(self, skel):
        pose = BodyPose.rest(skel)
        bad = pose.replace(theta_body=np.zeros((3, 3)))
        with pytest.raises(InputError):
            forward_kinematics(skel, bad)


class TestSdf:
    def test_bone_midpoint_is_minus_radius(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        head = skel.joint_index("head")
        neck = skel.joint_index("neck")
        mid = (posed.joint_pos[head] + posed.joint_pos[neck]) / 2
        bone = np.where(
            (skel.bone_joints[:, 0] == neck) & (skel.bone_joints[:, 1] == head)
        )[0][0]
        assert sdf(mid, posed) == pytest.approx(-skel.bone_radii[bone], abs=1e-12)

    def test_point_on_surface_is_zero(self, skel):
        # A hand capsule is isolated enough that no other bone is closer.
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        tip_bone = np.where(
            skel.bone_joints[:, 1] == skel.joint_index("left_middle3")
        )[0][0]
        e0 = posed.capsule_e0[tip_bone]
        e1 = posed.capsule_e1[tip_bone]
        axis = e1 - e0
        perp = np.cross(axis, [1.0, 0.0, 0.0])
        perp /= np.linalg.norm(perp)
        p = (e0 + e1) / 2 + skel.bone_radii[tip_bone] * perp
        assert sdf(p, posed) == pytest.approx(0.0, abs=1e-9)

    def test_matches_dense_surface_oracle(self, skel):
        # Sign and magnitude against brute-force distance to densely
        # sampled capsule surfaces.
        rng = np.random.default_rng(4)
        pose = random_pose(skel, rng)
        posed = forward_kinematics(skel, pose)

        surface = []
        for e0, e1, r in posed.capsules():
            axis = e1 - e0
            length = np.linalg.norm(axis)
            axis_u = axis / max(length, 1e-12)
            ref = np.array([1.0, 0.0, 0.0])
            if abs(axis_u @ ref) > 0.9:
                ref = np.array([0.0, 1.0, 0.0])
            u = np.cross(ref, axis_u)
            u /= np.linalg.norm(u)
            v = np.cross(axis_u, u)
            for t in np.linspace(0, 1, 64):
                for ang in np.linspace(0, 2 * np.pi, 64, endpoint=False):
                    d = np.cos(ang) * u + np.sin(ang) * v
                    surface.append(e0 + t * axis + r * d)
            for pole, s in ((e0, -1.0), (e1, 1.0)):
                for lat in np.linspace(0.05, np.pi / 2, 12):
                    for ang in np.linspace(0, 2 * np.pi, 32, endpoint=False):
                        d = np.cos(ang) * u + np.sin(ang) * v
                        surface.append(
                            pole + r * (np.cos(lat) * d + s * np.sin(lat) * axis_u)
                        )
        surface = np.array(surface)

        pts = rng.uniform(-1.5, 1.5, (200, 3)) + posed.joint_pos.mean(axis=0)
        vals = sdf(pts, posed)
        for p, val in zip(pts, vals):
            oracle = np.min(np.linalg.norm(surface - p, axis=1))
            assert abs(abs(val) - oracle) < 2e-3  # dense-sampling resolution
            if abs(val) > 5e-3:  # sign reliable away from the surface
                inside = any(
                    np.linalg.norm(
                        p - _closest_on_segment(p, e0, e1)
                    ) < r
                    for e0, e1, r in posed.capsules()
                )
                assert (val < 0) == inside

    def test_lipschitz(self, skel):
        rng = np.random.default_rng(5)
        posed = forward_kinematics(skel, random_pose(skel, rng))
        a = rng.uniform(-2, 2, (10_000, 3))
        b = a + rng.normal(scale=0.3, size=(10_000, 3))
        da = sdf(a, posed)
        db = sdf(b, posed)
        gap = np.linalg.norm(a - b, axis=1)
        assert np.all(np.abs(da - db) <= gap + 1e-12)

    def test_samples_lie_on_or_inside_surface(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        vals = sdf(posed.samples, posed)
        assert np.all(vals <= 1e-9)


def _closest_on_segment(p, e0, e1):
    axis = e1 - e0
    u = np.clip((p - e0) @ axis / max(axis @ axis, 1e-30), 0, 1)
    return e0 + u * axis


class TestParts:
    def test_palm_samples_fixed_at_rest(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        samples = part_samples(skel, posed, "right_palm")
        again = part_samples(skel, posed, "right_palm")
        assert samples.shape[0] == len(skel.part_table["right_palm"])
        np.testing.assert_array_equal(samples, again)

    def test_foot_contact_zone_is_strict_subset(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        full = part_samples(skel, posed, "left_foot")
        zone = part_samples(skel, posed, "left_foot", contact_zone=True)
        assert 0 < len(zone) < len(full)
        full_set = {p.tobytes() for p in full}
        assert all(p.tobytes() in full_set for p in zone)

    def test_partition_covers_all_samples(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        seen = []
        for part in PARTITION_PARTS:
            seen.extend(p.tobytes() for p in part_samples(skel, posed, part))
        assert len(seen) == len(posed.samples)
        assert len(set(seen)) == len(posed.samples)  # no duplicates

    def test_hand_alias_is_union_of_subparts(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        hand = part_samples(skel, posed, "left_hand")
        parts = ["left_palm", "left_thumb", "left_index_finger",
                 "left_middle_finger", "left_ring_finger", "left_pinky_finger"]
        stacked = np.vstack([part_samples(skel, posed, p) for p in parts])
        np.testing.assert_array_equal(hand, stacked)

    def test_unknown_part_raises(self, skel):
        posed = forward_kinematics(skel, BodyPose.rest(skel))
        with pytest.raises(VocabularyError):
            part_samples(skel, posed, "left_tentacle")


class TestMirrorPart:
    def test_finger(self):
        assert mirror_part("left_index_finger") == "right_index_finger"

    def test_self_symmetric(self):
        assert mirror_part("back") == "back"
        assert mirror_part("head") == "head"
        assert mirror_part("buttocks") == "buttocks"

    def test_involution_over_vocabulary(self):
        for part in CONTACT_VOCABULARY:
            assert mirror_part(mirror_part(part)) == part

    def test_bijection(self):
        images = {mirror_part(p) for p in CONTACT_VOCABULARY}
        assert images == set(CONTACT_VOCABULARY)

    def test_hand_aliases_mirror(self):
        assert mirror_part("left_hand") == "right_hand"

    def test_unknown_raises(self):
        with pytest.raises(VocabularyError):
            mirror_part("left_wing")


class TestPoseIO:
    def test_round_trip(self, skel, tmp_path):
        pose = random_pose(skel, np.random.default_rng(6))
        path = tmp_path / "pose.json"
        save_pose(path, pose)
        loaded = load_pose(path, skel)
        for name in ("beta", "r", "phi", "theta_body", "theta_hand"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(pose, name))

    def test_nan_rejected_with_field_name(self, skel):
        d = pose_to_dict(BodyPose.rest(skel))
        d["theta_body"][3][1] = float("nan")
        with pytest.raises(InputError, match="theta_body"):
            pose_from_dict(d, skel)

    def test_missing_field_rejected(self, skel):
        d = pose_to_dict(BodyPose.rest(skel))
        del d["phi"]
        with pytest.raises(InputError, match="phi"):
            pose_from_dict(d, skel)

    def test_angle_above_pi_rejected(self, skel):
        theta = np.zeros((skel.n_body_joints - 1, 3))
        theta[0] = [3.0, 3.0, 0.0]  # norm > pi
        with pytest.raises(InputError):
            BodyPose.rest(skel).replace(theta_body=theta)


class TestRelaxedHand:
    def test_wrists_unchanged(self, skel):
        th = relaxed_hand_theta(skel)
        for side in ("left", "right"):
            j = skel.joint_index(f"{side}_wrist") - skel.n_body_joints
            np.testing.assert_array_equal(th[j], np.zeros(3))

    def test_fingers_curl_opposite_signs(self, skel):
        th = relaxed_hand_theta(skel)
        li = skel.joint_index("left_index2") - skel.n_body_joints
        ri = skel.joint_index("right_index2") - skel.n_body_joints
        assert th[li, 0] == -th[ri, 0] != 0
