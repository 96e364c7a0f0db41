"""Parametric capsule-skeleton human body.

The body is a tree of joints posed by axis-angle rotations; bones carry
capsules whose union defines an exact analytic signed distance field,
and fixed per-part anchor tables place surface samples that play the
role of mesh vertex sets in contact losses.  Everything here is a pure
function of (Skeleton, BodyPose) so forward kinematics, its adjoint
(``fk_backward``) and the SDF can be evaluated freely in parallel.

Conventions: z up in the rest frame, body facing +x, T-pose arms along
+/-y.  Root translation r and orientation phi live in the world frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InputError, VocabularyError
from .rotations import matrix_to_axis_angle, rodrigues, rodrigues_jacobian

# Coarse semantic parts, with each hand subdivided into palm + 5 fingers.
# These 25 names partition the surface-sample set.
PARTITION_PARTS = (
    "head",
    "back",
    "buttocks",
    "left_upper_arm",
    "right_upper_arm",
    "left_forearm",
    "right_forearm",
    "left_palm",
    "right_palm",
    "left_thumb",
    "right_thumb",
    "left_index_finger",
    "right_index_finger",
    "left_middle_finger",
    "right_middle_finger",
    "left_ring_finger",
    "right_ring_finger",
    "left_pinky_finger",
    "right_pinky_finger",
    "left_thigh",
    "right_thigh",
    "left_calf",
    "right_calf",
    "left_foot",
    "right_foot",
)

# Whole-hand names resolve to the union of their sub-parts.
HAND_ALIASES = ("left_hand", "right_hand")
CONTACT_VOCABULARY = PARTITION_PARTS + HAND_ALIASES

_HAND_SUBPART_SUFFIXES = (
    "palm",
    "thumb",
    "index_finger",
    "middle_finger",
    "ring_finger",
    "pinky_finger",
)

# Parts swapped by contact-graph laterality refinement: both hands' palm
# and finger parts plus the forearms (kept so contact chains stay
# anatomically coherent).
LATERALITY_SWAP_PARTS = frozenset(
    [f"{side}_{suffix}" for side in ("left", "right") for suffix in _HAND_SUBPART_SUFFIXES]
    + ["left_hand", "right_hand", "left_forearm", "right_forearm"]
)

# Hand parts proper (used by the functional-contact metric).
HAND_PARTS = frozenset(
    [f"{side}_{suffix}" for side in ("left", "right") for suffix in _HAND_SUBPART_SUFFIXES]
    + ["left_hand", "right_hand"]
)

FOOT_PARTS = ("left_foot", "right_foot")
TOE_FRACTION = 0.7  # anchors with t >= this count as toes
HEEL_FRACTION = 0.15  # anchors with t <= this count as heel


def hand_subparts(side: str) -> tuple[str, ...]:
    return tuple(f"{side}_{suffix}" for suffix in _HAND_SUBPART_SUFFIXES)


def mirror_part(part: str) -> str:
    """Left/right swap of a part name; symmetric parts map to themselves."""
    if part not in CONTACT_VOCABULARY:
        raise VocabularyError(f"unknown body part {part!r}")
    if part.startswith("left_"):
        return "right_" + part[len("left_"):]
    if part.startswith("right_"):
        return "left_" + part[len("right_"):]
    return part


@dataclass(frozen=True)
class PartAnchors:
    """Surface-sample anchors of one part: bone index, axial fraction,
    radial unit direction (perpendicular to the bone's rest axis)."""

    bone: np.ndarray  # (n,) int
    t: np.ndarray  # (n,) float in [0, 1]
    dirs: np.ndarray  # (n, 3) unit vectors

    def __len__(self):
        return len(self.bone)


@dataclass(frozen=True)
class Skeleton:
    joint_names: tuple
    parents: np.ndarray  # (J,) int, -1 for the root
    offsets: np.ndarray  # (J, 3) rest offsets in the parent frame, m
    bone_joints: np.ndarray  # (B, 2) int (parent joint, child joint)
    bone_radii: np.ndarray  # (B,) capsule radii, m
    part_table: dict  # part name -> PartAnchors
    n_body_joints: int
    version: int = 1
    # Flattened anchor arrays (partition order), derived in __post_init__.
    anchor_bone: np.ndarray = field(init=False, repr=False, compare=False)
    anchor_t: np.ndarray = field(init=False, repr=False, compare=False)
    anchor_dirs: np.ndarray = field(init=False, repr=False, compare=False)
    part_slices: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        J = len(self.joint_names)
        parents = np.asarray(self.parents, dtype=int)
        if parents[0] != -1:
            raise InputError("joint 0 must be the root (parent -1)")
        if np.any(parents[1:] < 0) or np.any(parents[1:] >= np.arange(1, J)):
            raise InputError("joints must be in topological order (parent < child)")
        if np.any(np.asarray(self.bone_radii) <= 0):
            raise InputError("capsule radii must be positive")
        bj = np.asarray(self.bone_joints, dtype=int)
        if np.any(parents[bj[:, 1]] != bj[:, 0]):
            raise InputError("each bone must connect a joint to its parent")
        if set(self.part_table) != set(PARTITION_PARTS):
            missing = set(PARTITION_PARTS) - set(self.part_table)
            extra = set(self.part_table) - set(PARTITION_PARTS)
            raise InputError(f"part table mismatch: missing={missing}, extra={extra}")
        offsets = np.asarray(self.offsets, dtype=float)
        for part in PARTITION_PARTS:
            pa = self.part_table[part]
            if np.any(pa.t < 0) or np.any(pa.t > 1):
                raise InputError(f"{part}: axial fractions outside [0, 1]")
            axes = offsets[bj[pa.bone, 1]]
            axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
            if np.any(np.abs(np.linalg.norm(pa.dirs, axis=1) - 1.0) > 1e-6):
                raise InputError(f"{part}: anchor directions must be unit")
            if np.any(np.abs(np.sum(pa.dirs * axes, axis=1)) > 1e-6):
                raise InputError(f"{part}: anchor directions must be perpendicular "
                                 "to the rest bone axis")
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "bone_joints", bj)
        object.__setattr__(self, "bone_radii", np.asarray(self.bone_radii, dtype=float))
        bones, ts, dirs, slices = [], [], [], {}
        pos = 0
        for part in PARTITION_PARTS:
            pa = self.part_table[part]
            bones.append(pa.bone)
            ts.append(pa.t)
            dirs.append(pa.dirs)
            slices[part] = slice(pos, pos + len(pa))
            pos += len(pa)
        object.__setattr__(self, "anchor_bone", np.concatenate(bones))
        object.__setattr__(self, "anchor_t", np.concatenate(ts))
        object.__setattr__(self, "anchor_dirs", np.concatenate(dirs))
        object.__setattr__(self, "part_slices", slices)

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    @property
    def n_hand_joints(self) -> int:
        return self.n_joints - self.n_body_joints

    @property
    def n_samples(self) -> int:
        return len(self.anchor_bone)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise InputError(f"unknown joint {name!r}")

    def arm_joint_names(self) -> tuple:
        names = []
        for side in ("left", "right"):
            for j in ("shoulder", "elbow", "forearm", "wrist"):
                name = f"{side}_{j}"
                if name in self.joint_names:
                    names.append(name)
        return tuple(names)

    def ankle_joint_names(self) -> tuple:
        return tuple(n for n in ("left_ankle", "right_ankle") if n in self.joint_names)


def skeleton_from_dict(d: dict) -> Skeleton:
    try:
        joints = d["joints"]
        part_table = {
            part: PartAnchors(
                bone=np.array([a["bone"] for a in anchors], dtype=int),
                t=np.array([a["t"] for a in anchors], dtype=float),
                dirs=np.array([a["dir"] for a in anchors], dtype=float),
            )
            for part, anchors in d["part_table"].items()
        }
        return Skeleton(
            joint_names=tuple(j["name"] for j in joints),
            parents=np.array([j["parent"] for j in joints], dtype=int),
            offsets=np.array([j["offset"] for j in joints], dtype=float),
            bone_joints=np.array([b["joints"] for b in d["bones"]], dtype=int),
            bone_radii=np.array([b["radius"] for b in d["bones"]], dtype=float),
            part_table=part_table,
            n_body_joints=int(d["n_body_joints"]),
            version=int(d.get("version", 1)),
        )
    except KeyError as e:
        raise InputError(f"skeleton asset missing field {e}") from e


def load_skeleton(path) -> Skeleton:
    with open(path) as f:
        return skeleton_from_dict(json.load(f))


_DEFAULT_SKELETON = None


def default_skeleton() -> Skeleton:
    """The packaged capsule skeleton (cached)."""
    global _DEFAULT_SKELETON
    if _DEFAULT_SKELETON is None:
        text = (
            resources.files("scenefit")
            .joinpath("assets/default_skeleton.json")
            .read_text()
        )
        _DEFAULT_SKELETON = skeleton_from_dict(json.loads(text))
    return _DEFAULT_SKELETON


_MAX_ANGLE = np.pi + 1e-9


@dataclass(frozen=True)
class BodyPose:
    """Body parameters: per-segment scales, root transform, joint angles.

    ``phi`` is the root orientation as an axis-angle vector; the component
    along the scene's gravity axis is the yaw freedom of stage-1
    optimization.  Joint rotations are clamped to angle <= pi at
    construction (axis-angle wraparound guard); phi is only required to
    be finite.
    """

    beta: np.ndarray  # (J,) per-joint offset scale, root entry unused
    r: np.ndarray  # (3,) root translation, world frame
    phi: np.ndarray  # (3,) root orientation, axis-angle
    theta_body: np.ndarray  # (n_body_joints - 1, 3)
    theta_hand: np.ndarray  # (n_hand_joints, 3)

    def __post_init__(self):
        for name in ("beta", "r", "phi", "theta_body", "theta_hand"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise InputError(f"BodyPose.{name} contains non-finite values")
            object.__setattr__(self, name, a)
        object.__setattr__(self, "r", self.r.reshape(3))
        object.__setattr__(self, "phi", self.phi.reshape(3))
        object.__setattr__(self, "theta_body", self.theta_body.reshape(-1, 3))
        object.__setattr__(self, "theta_hand", self.theta_hand.reshape(-1, 3))
        for name in ("theta_body", "theta_hand"):
            norms = np.linalg.norm(getattr(self, name), axis=1)
            if np.any(norms > _MAX_ANGLE):
                raise InputError(f"BodyPose.{name} has joint angle > pi")

    @classmethod
    def rest(cls, skel: Skeleton) -> "BodyPose":
        return cls(
            beta=np.ones(skel.n_joints),
            r=np.zeros(3),
            phi=np.zeros(3),
            theta_body=np.zeros((skel.n_body_joints - 1, 3)),
            theta_hand=np.zeros((skel.n_hand_joints, 3)),
        )

    def replace(self, **kw) -> "BodyPose":
        d = {
            "beta": self.beta,
            "r": self.r,
            "phi": self.phi,
            "theta_body": self.theta_body,
            "theta_hand": self.theta_hand,
        }
        d.update(kw)
        return BodyPose(**d)

    def local_rotation_vec(self, joint: int, skel: Skeleton) -> np.ndarray:
        """Axis-angle of the given joint (root = phi)."""
        if joint == 0:
            return self.phi
        if joint < skel.n_body_joints:
            return self.theta_body[joint - 1]
        return self.theta_hand[joint - skel.n_body_joints]


def pose_to_dict(pose: BodyPose) -> dict:
    return {
        "beta": [float(x) for x in pose.beta],
        "r": [float(x) for x in pose.r],
        "phi": [float(x) for x in pose.phi],
        "theta_body": [[float(x) for x in row] for row in pose.theta_body],
        "theta_hand": [[float(x) for x in row] for row in pose.theta_hand],
    }


def pose_from_dict(d: dict, skel: Skeleton | None = None) -> BodyPose:
    missing = [k for k in ("beta", "r", "phi", "theta_body", "theta_hand") if k not in d]
    if missing:
        raise InputError(f"pose json missing fields: {missing}")
    bad = []
    arrays = {}
    for k in ("beta", "r", "phi", "theta_body", "theta_hand"):
        try:
            a = np.asarray(d[k], dtype=float)
        except (TypeError, ValueError):
            bad.append(k)
            continue
        if not np.all(np.isfinite(a)):
            bad.append(k)
        arrays[k] = a
    if bad:
        raise InputError(f"pose json has non-finite or non-numeric fields: {bad}")
    pose = BodyPose(**arrays)
    if skel is not None:
        check_pose_dims(skel, pose)
    return pose


def save_pose(path, pose: BodyPose) -> None:
    with open(path, "w") as f:
        json.dump(pose_to_dict(pose), f, indent=1, sort_keys=True)


def load_pose(path, skel: Skeleton | None = None) -> BodyPose:
    with open(path) as f:
        return pose_from_dict(json.load(f), skel)


def check_pose_dims(skel: Skeleton, pose: BodyPose) -> None:
    if pose.beta.shape != (skel.n_joints,):
        raise InputError(
            f"beta has shape {pose.beta.shape}, expected ({skel.n_joints},)"
        )
    if pose.theta_body.shape != (skel.n_body_joints - 1, 3):
        raise InputError(
            f"theta_body has shape {pose.theta_body.shape}, expected "
            f"({skel.n_body_joints - 1}, 3)"
        )
    if pose.theta_hand.shape != (skel.n_hand_joints, 3):
        raise InputError(
            f"theta_hand has shape {pose.theta_hand.shape}, expected "
            f"({skel.n_hand_joints}, 3)"
        )


@dataclass(frozen=True)
class PosedBody:
    """World-frame result of forward kinematics.

    Carries the per-joint local rotations and scaled offsets so the
    adjoint pass can run without re-deriving them.
    """

    joint_rot: np.ndarray  # (J, 3, 3) world rotations
    joint_pos: np.ndarray  # (J, 3) world positions
    local_rot: np.ndarray  # (J, 3, 3)
    offsets_scaled: np.ndarray  # (J, 3) beta-scaled rest offsets
    samples: np.ndarray  # (S, 3) all surface samples, partition order
    capsule_e0: np.ndarray  # (B, 3)
    capsule_e1: np.ndarray  # (B, 3)
    capsule_radii: np.ndarray  # (B,)

    def capsules(self) -> list:
        return [
            (self.capsule_e0[i], self.capsule_e1[i], float(self.capsule_radii[i]))
            for i in range(len(self.capsule_radii))
        ]


def forward_kinematics(skel: Skeleton, pose: BodyPose) -> PosedBody:
    """Pose the skeleton: parent-chain composition of scaled rest offsets
    and local axis-angle rotations, root transform (phi, r)."""
    check_pose_dims(skel, pose)
    J = skel.n_joints
    R = np.empty((J, 3, 3))
    p = np.empty((J, 3))
    A = np.empty((J, 3, 3))
    offs = pose.beta[:, None] * skel.offsets
    for j in range(J):
        A[j] = rodrigues(pose.local_rotation_vec(j, skel))
        par = skel.parents[j]
        if par < 0:
            R[j] = A[j]
            p[j] = pose.r
        else:
            R[j] = R[par] @ A[j]
            p[j] = p[par] + R[par] @ offs[j]
    e0 = p[skel.bone_joints[:, 0]]
    e1 = p[skel.bone_joints[:, 1]]
    ab = skel.anchor_bone
    a_joint = skel.bone_joints[ab, 0]
    t = skel.anchor_t[:, None]
    radial = np.einsum("nij,nj->ni", R[a_joint], skel.anchor_dirs)
    samples = (1.0 - t) * e0[ab] + t * e1[ab] + skel.bone_radii[ab, None] * radial
    return PosedBody(
        joint_rot=R,
        joint_pos=p,
        local_rot=A,
        offsets_scaled=offs,
        samples=samples,
        capsule_e0=e0,
        capsule_e1=e1,
        capsule_radii=skel.bone_radii,
    )


_CHUNK = 8192


def _segment_geometry(points: np.ndarray, posed: PosedBody):
    """Per point/capsule segment distances: returns (dist (N, B), u (N, B)).

    Uses the expanded form |p - e0 - u*axis|^2 = |p - e0|^2
    - 2u (p - e0).axis + u^2 |axis|^2 so the inner products run through
    BLAS instead of materializing (N, B, 3) temporaries.
    """
    e0 = posed.capsule_e0
    axis = posed.capsule_e1 - e0  # (B, 3)
    len2 = np.maximum(np.sum(axis * axis, axis=1), 1e-30)
    proj = points @ axis.T - np.sum(e0 * axis, axis=1)[None, :]  # (p-e0).axis
    u = np.clip(proj / len2, 0.0, 1.0)
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        + np.sum(e0 * e0, axis=1)[None, :]
        - 2.0 * (points @ e0.T)
    )
    dist2 = d2 - 2.0 * u * proj + u * u * len2
    dist = np.sqrt(np.maximum(dist2, 0.0))
    return dist, u


def sdf(points: np.ndarray, posed: PosedBody) -> np.ndarray:
    """Signed distance to the capsule-union body: negative inside, zero
    on the surface, positive outside (exact for the union)."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), _CHUNK):
        chunk = pts[lo : lo + _CHUNK]
        dist, _ = _segment_geometry(chunk, posed)
        out[lo : lo + _CHUNK] = np.min(dist - posed.capsule_radii[None, :], axis=1)
    return out[0] if single else out


def body_bounding_sphere(posed: PosedBody) -> tuple:
    """(center, radius) of a sphere containing every capsule.  Points
    outside it are guaranteed to have positive SDF, which lets collision
    terms skip them exactly."""
    pts = np.concatenate([posed.capsule_e0, posed.capsule_e1])
    center = pts.mean(axis=0)
    r0 = np.linalg.norm(posed.capsule_e0 - center, axis=1)
    r1 = np.linalg.norm(posed.capsule_e1 - center, axis=1)
    radius = float(np.max(np.maximum(r0, r1) + posed.capsule_radii))
    return center, radius


def sdf_nearest(points: np.ndarray, posed: PosedBody):
    """SDF values plus the nearest capsule index and its axial parameter
    (ties resolved to the lowest capsule index); used by gradients."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    vals = np.empty(len(pts))
    caps = np.empty(len(pts), dtype=int)
    us = np.empty(len(pts))
    for lo in range(0, len(pts), _CHUNK):
        chunk = pts[lo : lo + _CHUNK]
        dist, u = _segment_geometry(chunk, posed)
        signed = dist - posed.capsule_radii[None, :]
        c = np.argmin(signed, axis=1)
        rows = np.arange(len(chunk))
        vals[lo : lo + _CHUNK] = signed[rows, c]
        caps[lo : lo + _CHUNK] = c
        us[lo : lo + _CHUNK] = u[rows, c]
    return vals, caps, us


def part_sample_indices(skel: Skeleton, part: str, contact_zone: bool = False) -> np.ndarray:
    """Indices into the flat sample array for a part (hand aliases expand
    to palm + fingers; the contact-zone filter applies to feet only and
    keeps toe/heel anchors)."""
    if part not in CONTACT_VOCABULARY:
        raise VocabularyError(f"unknown body part {part!r}")
    if part in HAND_ALIASES:
        side = part.split("_")[0]
        return np.concatenate(
            [part_sample_indices(skel, sub) for sub in hand_subparts(side)]
        )
    sl = skel.part_slices[part]
    idx = np.arange(sl.start, sl.stop)
    if contact_zone and part in FOOT_PARTS:
        t = skel.anchor_t[idx]
        idx = idx[(t >= TOE_FRACTION) | (t <= HEEL_FRACTION)]
    return idx


def part_samples(
    skel: Skeleton, posed: PosedBody, part: str, contact_zone: bool = False
) -> np.ndarray:
    """World-frame surface samples of one part."""
    return posed.samples[part_sample_indices(skel, part, contact_zone)]


@dataclass
class PoseGrad:
    """Gradient of a scalar w.r.t. BodyPose parameters."""

    r: np.ndarray  # (3,)
    phi: np.ndarray  # (3,)
    theta_body: np.ndarray  # (n_body - 1, 3)
    theta_hand: np.ndarray  # (n_hand, 3)
    beta: np.ndarray  # (J,)

    @classmethod
    def zeros(cls, skel: Skeleton) -> "PoseGrad":
        return cls(
            r=np.zeros(3),
            phi=np.zeros(3),
            theta_body=np.zeros((skel.n_body_joints - 1, 3)),
            theta_hand=np.zeros((skel.n_hand_joints, 3)),
            beta=np.zeros(skel.n_joints),
        )

    def add(self, other: "PoseGrad") -> "PoseGrad":
        self.r += other.r
        self.phi += other.phi
        self.theta_body += other.theta_body
        self.theta_hand += other.theta_hand
        self.beta += other.beta
        return self


def fk_backward(
    skel: Skeleton,
    pose: BodyPose,
    posed: PosedBody,
    grad_samples: np.ndarray | None = None,
    grad_e0: np.ndarray | None = None,
    grad_e1: np.ndarray | None = None,
) -> PoseGrad:
    """Adjoint of forward kinematics.

    Given the gradient of a scalar loss w.r.t. surface samples (S, 3)
    and/or capsule endpoints (B, 3), accumulates the exact gradient
    w.r.t. the pose parameters by walking the joint tree in reverse
    topological order.
    """
    J = skel.n_joints
    gp = np.zeros((J, 3))  # dL/d joint_pos
    GR = np.zeros((J, 3, 3))  # dL/d joint_rot

    if grad_samples is not None and len(grad_samples):
        ab = skel.anchor_bone
        a_j = skel.bone_joints[ab, 0]
        b_j = skel.bone_joints[ab, 1]
        t = skel.anchor_t[:, None]
        np.add.at(gp, a_j, (1.0 - t) * grad_samples)
        np.add.at(gp, b_j, t * grad_samples)
        outer = np.einsum("ni,nj->nij", grad_samples, skel.anchor_dirs)
        np.add.at(GR, a_j, skel.bone_radii[ab, None, None] * outer)
    if grad_e0 is not None:
        np.add.at(gp, skel.bone_joints[:, 0], grad_e0)
    if grad_e1 is not None:
        np.add.at(gp, skel.bone_joints[:, 1], grad_e1)

    out = PoseGrad.zeros(skel)
    R, A = posed.joint_rot, posed.local_rot
    offs = posed.offsets_scaled
    for j in range(J - 1, -1, -1):
        par = skel.parents[j]
        if par >= 0:
            GA = R[par].T @ GR[j]
            gp[par] += gp[j]
            GR[par] += np.outer(gp[j], offs[j]) + GR[j] @ A[j].T
            out.beta[j] = gp[j] @ (R[par] @ skel.offsets[j])
        else:
            GA = GR[j]
            out.r = gp[j].copy()
        dA = rodrigues_jacobian(pose.local_rotation_vec(j, skel))
        gw = np.einsum("ikl,kl->i", dA, GA)
        if j == 0:
            out.phi = gw
        elif j < skel.n_body_joints:
            out.theta_body[j - 1] = gw
        else:
            out.theta_hand[j - skel.n_body_joints] = gw
    return out


def relaxed_hand_theta(skel: Skeleton, curl: float = 1.0) -> np.ndarray:
    """Default relaxed hand pose: fingers and thumbs gently curled toward
    the palm (``curl`` scales the flexion).  Used when no hand estimate
    is available, so the hands do not skewer nearby geometry while
    reaching."""
    th = np.zeros((skel.n_hand_joints, 3))
    finger_curl = {"1": 0.5, "2": 0.9, "3": 0.9}
    thumb_curl = {"1": 0.25, "2": 0.6, "3": 0.8}
    for j, name in enumerate(skel.joint_names[skel.n_body_joints:]):
        if name.endswith("wrist"):
            continue
        sign = -1.0 if name.startswith("left_") else 1.0
        table = thumb_curl if "thumb" in name else finger_curl
        th[j, 0] = sign * curl * table[name[-1]]
    return th


def transform_pose(pose: BodyPose, R: np.ndarray, t: np.ndarray) -> BodyPose:
    """Apply a world-frame rigid transform to the root (joint angles are
    untouched)."""
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float).reshape(3)
    return pose.replace(
        r=R @ pose.r + t,
        phi=matrix_to_axis_angle(R @ rodrigues(pose.phi)),
    )
