"""Generate the default capsule-skeleton asset JSON.

Run from the repo root after an editable install:

    python tools/gen_skeleton.py

Rebuilds src/scenefit/assets/default_skeleton.json.  The skeleton is an
approx 1.6 m human in T-pose: z up, facing +x, left along +y, arms along
+/-y.  22 body joints plus, per hand, a wrist and 15 finger joints.
Surface-sample anchors are fixed here so that downstream contact losses
are deterministic; radial directions are generated perpendicular to each
bone's rest axis (which keeps samples exactly on the capsule surface
under posing and per-segment scaling).
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scenefit.rotations import orthonormal_basis, rodrigues  # noqa: E402

# name, parent name (None = root), rest offset in parent frame (m)
BODY_JOINTS = [
    ("pelvis", None, (0.0, 0.0, 0.0)),
    ("spine1", "pelvis", (0.0, 0.0, 0.10)),
    ("spine2", "spine1", (0.0, 0.0, 0.12)),
    ("spine3", "spine2", (0.0, 0.0, 0.12)),
    ("neck", "spine3", (0.0, 0.0, 0.13)),
    ("head", "neck", (0.0, 0.0, 0.13)),
    ("left_hip", "pelvis", (0.0, 0.09, -0.05)),
    ("left_knee", "left_hip", (0.0, 0.0, -0.40)),
    ("left_ankle", "left_knee", (0.0, 0.0, -0.40)),
    ("left_foot", "left_ankle", (0.17, 0.0, -0.013)),
    ("right_hip", "pelvis", (0.0, -0.09, -0.05)),
    ("right_knee", "right_hip", (0.0, 0.0, -0.40)),
    ("right_ankle", "right_knee", (0.0, 0.0, -0.40)),
    ("right_foot", "right_ankle", (0.17, 0.0, -0.013)),
    ("left_collar", "spine3", (0.0, 0.07, 0.08)),
    ("left_shoulder", "left_collar", (0.0, 0.11, 0.02)),
    ("left_elbow", "left_shoulder", (0.0, 0.27, 0.0)),
    ("left_forearm", "left_elbow", (0.0, 0.13, 0.0)),
    ("right_collar", "spine3", (0.0, -0.07, 0.08)),
    ("right_shoulder", "right_collar", (0.0, -0.11, 0.02)),
    ("right_elbow", "right_shoulder", (0.0, -0.27, 0.0)),
    ("right_forearm", "right_elbow", (0.0, -0.13, 0.0)),
]

# Hand subtree template for the left side; right side mirrors y.
HAND_JOINTS_LEFT = [
    ("wrist", "forearm", (0.0, 0.13, 0.0)),
    ("thumb1", "wrist", (0.025, 0.02, -0.01)),
    ("thumb2", "thumb1", (0.02, 0.025, 0.0)),
    ("thumb3", "thumb2", (0.015, 0.02, 0.0)),
    ("index1", "wrist", (0.022, 0.09, 0.0)),
    ("index2", "index1", (0.0, 0.035, 0.0)),
    ("index3", "index2", (0.0, 0.025, 0.0)),
    ("middle1", "wrist", (0.0, 0.095, 0.0)),
    ("middle2", "middle1", (0.0, 0.04, 0.0)),
    ("middle3", "middle2", (0.0, 0.028, 0.0)),
    ("ring1", "wrist", (-0.02, 0.09, 0.0)),
    ("ring2", "ring1", (0.0, 0.035, 0.0)),
    ("ring3", "ring2", (0.0, 0.025, 0.0)),
    ("pinky1", "wrist", (-0.038, 0.085, 0.0)),
    ("pinky2", "pinky1", (0.0, 0.03, 0.0)),
    ("pinky3", "pinky2", (0.0, 0.02, 0.0)),
]

# (parent joint, child joint, capsule radius)
BONES = [
    ("pelvis", "spine1", 0.110),
    ("spine1", "spine2", 0.115),
    ("spine2", "spine3", 0.110),
    ("spine3", "neck", 0.050),
    ("neck", "head", 0.085),
    ("pelvis", "left_hip", 0.085),
    ("pelvis", "right_hip", 0.085),
    ("left_hip", "left_knee", 0.070),
    ("left_knee", "left_ankle", 0.045),
    ("left_ankle", "left_foot", 0.035),
    ("right_hip", "right_knee", 0.070),
    ("right_knee", "right_ankle", 0.045),
    ("right_ankle", "right_foot", 0.035),
    ("spine3", "left_collar", 0.050),
    ("left_collar", "left_shoulder", 0.050),
    ("left_shoulder", "left_elbow", 0.045),
    ("left_elbow", "left_forearm", 0.040),
    ("left_forearm", "left_wrist", 0.037),
    ("spine3", "right_collar", 0.050),
    ("right_collar", "right_shoulder", 0.050),
    ("right_shoulder", "right_elbow", 0.045),
    ("right_elbow", "right_forearm", 0.040),
    ("right_forearm", "right_wrist", 0.037),
]

FINGERS = ["thumb", "index", "middle", "ring", "pinky"]

for side in ("left", "right"):
    for fing in FINGERS:
        metacarpal_radius = 0.011
        phalanx_radius = 0.0095 if fing == "thumb" else 0.008
        BONES.append((f"{side}_wrist", f"{side}_{fing}1", metacarpal_radius))
        BONES.append((f"{side}_{fing}1", f"{side}_{fing}2", phalanx_radius))
        BONES.append((f"{side}_{fing}2", f"{side}_{fing}3", phalanx_radius))


def finger_part(fing: str) -> str:
    return f"{fing}_finger" if fing != "thumb" else "thumb"


def build_joints():
    joints = list(BODY_JOINTS)
    for side, sgn in (("left", 1.0), ("right", -1.0)):
        for name, parent, (x, y, z) in HAND_JOINTS_LEFT:
            joints.append((f"{side}_{name}", f"{side}_{parent}", (x, sgn * y, z)))
    return joints


def anchors_for(bone_idx, axis, stations, n_az):
    u, v = orthonormal_basis(np.asarray(axis, dtype=float))
    out = []
    for i, t in enumerate(stations):
        for k in range(n_az):
            ang = 2.0 * np.pi * (k + 0.5 * (i % 2)) / n_az
            d = np.cos(ang) * u + np.sin(ang) * v
            out.append({"bone": bone_idx, "t": round(float(t), 6),
                        "dir": [round(float(x), 9) for x in d]})
    return out


def biased_anchors_for(bone_idx, axis, stations, toward, degs):
    """Anchors clustered around the projection of ``toward`` onto the
    bone's perpendicular plane, at the given azimuth offsets (degrees).

    Contact surfaces are one-sided: foot samples belong on the sole and
    palm samples on the inner hand, not all the way around the capsule.
    """
    axis = np.asarray(axis, dtype=float)
    axis_u = axis / np.linalg.norm(axis)
    toward = np.asarray(toward, dtype=float)
    base = toward - (toward @ axis_u) * axis_u
    base /= np.linalg.norm(base)
    out = []
    for t in stations:
        for deg in degs:
            R = rodrigues(axis_u * np.deg2rad(deg))
            d = R @ base
            out.append({"bone": bone_idx, "t": round(float(t), 6),
                        "dir": [round(float(x), 9) for x in d]})
    return out


def main():
    joints = build_joints()
    names = [j[0] for j in joints]
    index = {n: i for i, n in enumerate(names)}
    parents = [(-1 if p is None else index[p]) for _, p, _ in joints]
    offsets = {n: np.array(o) for n, _, o in joints}

    bone_index = {(a, b): i for i, (a, b, _) in enumerate(BONES)}

    def lin(lo, hi, n):
        return list(np.linspace(lo, hi, n))

    part_specs = {}
    part_specs["back"] = [
        (("pelvis", "spine1"), lin(0.1, 0.9, 3), 4),
        (("spine1", "spine2"), lin(0.1, 0.9, 3), 4),
        (("spine2", "spine3"), lin(0.1, 0.9, 2), 4),
    ]
    part_specs["head"] = [(("neck", "head"), lin(0.1, 0.9, 8), 4)]
    part_specs["buttocks"] = [
        (("pelvis", "left_hip"), lin(0.1, 0.9, 4), 4),
        (("pelvis", "right_hip"), lin(0.1, 0.9, 4), 4),
    ]
    for side in ("left", "right"):
        part_specs[f"{side}_upper_arm"] = [
            ((f"{side}_shoulder", f"{side}_elbow"), lin(0.1, 0.9, 8), 4)
        ]
        part_specs[f"{side}_forearm"] = [
            ((f"{side}_elbow", f"{side}_forearm"), lin(0.1, 0.9, 4), 4),
            ((f"{side}_forearm", f"{side}_wrist"), lin(0.1, 0.9, 4), 4),
        ]
        part_specs[f"{side}_thigh"] = [
            ((f"{side}_hip", f"{side}_knee"), lin(0.1, 0.9, 8), 4)
        ]
        part_specs[f"{side}_calf"] = [
            ((f"{side}_knee", f"{side}_ankle"), lin(0.1, 0.9, 8), 4)
        ]
        # Feet keep anchors at the extreme stations: the toe (t >= 0.7) and
        # heel (t <= 0.15) groups double as the foot contact zone.
        part_specs[f"{side}_foot"] = [
            ((f"{side}_ankle", f"{side}_foot"), lin(0.0, 1.0, 8), 4)
        ]
        # Palm anchors sit on the inner hand surface (palm faces -z in
        # the T-pose), three stations x two azimuths per metacarpal.
        part_specs[f"{side}_palm"] = [
            ((f"{side}_wrist", f"{side}_{fing}1"), [0.3, 0.55, 0.8], 2)
            for fing in FINGERS
        ]
        for fing in FINGERS:
            part_specs[f"{side}_{finger_part(fing)}"] = [
                ((f"{side}_{fing}1", f"{side}_{fing}2"), [0.2, 0.9], 2),
                ((f"{side}_{fing}2", f"{side}_{fing}3"), [0.2, 0.9], 2),
            ]

    down = (0.0, 0.0, -1.0)
    part_table = {}
    for part, specs in part_specs.items():
        anchors = []
        for (a, b), stations, n_az in specs:
            bi = bone_index[(a, b)]
            axis = offsets[b]
            if part.endswith("_foot"):
                anchors.extend(
                    biased_anchors_for(bi, axis, stations, down, (-55.0, -18.0, 18.0, 55.0))
                )
            elif part.endswith("_palm"):
                anchors.extend(
                    biased_anchors_for(bi, axis, stations, down, (-20.0, 20.0))
                )
            else:
                anchors.extend(anchors_for(bi, axis, stations, n_az))
        part_table[part] = anchors

    asset = {
        "version": 1,
        "n_body_joints": len(BODY_JOINTS),
        "joints": [
            {"name": n, "parent": parents[i], "offset": list(map(float, joints[i][2]))}
            for i, n in enumerate(names)
        ],
        "bones": [
            {"joints": [index[a], index[b]], "radius": r} for a, b, r in BONES
        ],
        "part_table": part_table,
    }
    out = Path(__file__).resolve().parents[1] / "src" / "scenefit" / "assets"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "default_skeleton.json"
    with open(path, "w") as f:
        json.dump(asset, f, indent=1)
    n_anchors = sum(len(v) for v in part_table.values())
    print(f"wrote {path}: {len(names)} joints, {len(BONES)} bones, {n_anchors} anchors")


if __name__ == "__main__":
    main()
