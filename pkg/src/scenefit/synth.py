"""Synthetic "reach" scenes for demos, tests, and the acceptance suite.

The scene is a flat floor (z = 0), a wall at y = WALL_Y, and a plate-like
door handle protruding from the wall.  Depth views are rendered by exact
ray casting of those three primitives, so every bundle artifact
(16-bit depth PNGs, masks, cameras) round-trips through the standard
loaders.  A matching reasoner fixture file makes the full pipeline run
offline and deterministically.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .bundle import save_bundle
from .errors import InputError
from .geometry import Camera, DepthImage
from .reasoner import (
    ReasonerRequest,
    build_elements_prompt,
    build_graph_prompt,
    write_fixture,
)

WALL_Y = 2.0
FLOOR_X = (-1.3, 1.3)
FLOOR_Y = (0.3, WALL_Y)
WALL_X = (-1.3, 1.3)
WALL_Z = (0.0, 2.1)

# The handle is a vertical pull bar standing off the wall (glass-door
# style).  It spans the height a standing body reaches at naturally, so
# a grip does not fight the pose prior.
HANDLE_RADIUS = 0.025
HANDLE_HALF_LENGTH = 0.22
HANDLE_STANDOFF = 0.12  # bar axis to wall
HANDLE_CENTER_Z = 1.22

IMAGE_SIZE = 80
FOCAL = 71.0

REACH_TASK = "open the door"

_COLORS = {
    "floor": (110, 110, 110),
    "wall": (200, 196, 180),
    "handle": (190, 60, 40),
}


CLOSE_SIZE = 64
CLOSE_FOCAL = 57.0
CLOSE_RANGE = 0.5  # camera distance to the bar axis; sub-centimeter
                   # footprint keeps the bar's point shell palm-tight


def camera_look_at(eye, target, up=(0.0, 0.0, 1.0),
                   size: int = IMAGE_SIZE, focal: float = FOCAL) -> Camera:
    """OpenCV-convention camera at ``eye`` looking toward ``target``."""
    eye = np.asarray(eye, dtype=float)
    target = np.asarray(target, dtype=float)
    up = np.asarray(up, dtype=float)
    z = target - eye
    z = z / np.linalg.norm(z)
    x = np.cross(-up, z)
    n = np.linalg.norm(x)
    if n < 1e-9:
        raise InputError("camera forward axis is parallel to up")
    x = x / n
    y = np.cross(z, x)
    T = np.eye(4)
    T[:3, 0] = x
    T[:3, 1] = y
    T[:3, 2] = z
    T[:3, 3] = eye
    gravity = -up / np.linalg.norm(up)
    return Camera(
        fx=focal, fy=focal, cx=(size - 1) / 2.0, cy=(size - 1) / 2.0,
        width=size, height=size, world_from_camera=T, gravity_dir=gravity,
    )


def handle_axis_xy(handle_x: float) -> np.ndarray:
    return np.array([handle_x, WALL_Y - HANDLE_STANDOFF])


def raycast_view(cam: Camera, handle_x: float):
    """Render depth (camera-z, meters) plus a per-pixel hit label map
    (0 = none, 1 = floor, 2 = wall, 3 = handle bar)."""
    h, w = cam.height, cam.width
    vs, us = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dirs_cam = np.stack(
        [(us - cam.cx) / cam.fx, (vs - cam.cy) / cam.fy, np.ones((h, w))], axis=-1
    )
    D = dirs_cam @ cam.rotation.T  # (h, w, 3); camera-z depth of o + t*D is t
    o = cam.translation

    with np.errstate(divide="ignore", invalid="ignore"):
        t_floor = np.where(np.abs(D[..., 2]) > 1e-12, -o[2] / D[..., 2], np.inf)
        p = o + t_floor[..., None] * D
        ok = (
            (t_floor > 1e-6)
            & (p[..., 0] >= FLOOR_X[0]) & (p[..., 0] <= FLOOR_X[1])
            & (p[..., 1] >= FLOOR_Y[0]) & (p[..., 1] <= FLOOR_Y[1])
        )
        t_floor = np.where(ok, t_floor, np.inf)

        t_wall = np.where(np.abs(D[..., 1]) > 1e-12, (WALL_Y - o[1]) / D[..., 1], np.inf)
        p = o + t_wall[..., None] * D
        ok = (
            (t_wall > 1e-6)
            & (p[..., 0] >= WALL_X[0]) & (p[..., 0] <= WALL_X[1])
            & (p[..., 2] >= WALL_Z[0]) & (p[..., 2] <= WALL_Z[1])
        )
        t_wall = np.where(ok, t_wall, np.inf)

        # Vertical cylinder: quadratic in the xy-plane, z-extent clamp.
        c = handle_axis_xy(handle_x)
        oc = o[:2] - c
        a = D[..., 0] ** 2 + D[..., 1] ** 2
        b = 2.0 * (oc[0] * D[..., 0] + oc[1] * D[..., 1])
        q = oc[0] ** 2 + oc[1] ** 2 - HANDLE_RADIUS**2
        disc = b * b - 4.0 * a * q
        t_handle = np.where(
            (disc >= 0) & (a > 1e-12), (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a), np.inf
        )
        hit_z = o[2] + t_handle * D[..., 2]
        ok = (
            (t_handle > 1e-6)
            & (np.abs(hit_z - HANDLE_CENTER_Z) <= HANDLE_HALF_LENGTH)
        )
        t_handle = np.where(ok, t_handle, np.inf)

    ts = np.stack([t_floor, t_wall, t_handle], axis=-1)
    best = np.argmin(ts, axis=-1)
    depth = np.take_along_axis(ts, best[..., None], axis=-1)[..., 0]
    label = np.where(np.isfinite(depth), best + 1, 0)
    depth = np.where(np.isfinite(depth), depth, 0.0)
    return depth, label


def reach_cameras(handle_x: float, close_view: bool = True) -> dict:
    """Posed views: a frontal room view, two oblique room views, and
    optionally a close-up of the functional element (dense points there
    let the collision term see the handle at palm scale)."""
    target = np.array([handle_x, WALL_Y - HANDLE_STANDOFF, HANDLE_CENTER_Z])
    cams = {
        "0": camera_look_at([handle_x * 0.4, -1.3, 1.25], target),
        "1": camera_look_at([-1.7, -0.9, 1.55], target),
        "2": camera_look_at([1.7, -0.9, 1.55], target),
    }
    if close_view:
        cams["3"] = camera_look_at(
            [handle_x + 0.1, WALL_Y - HANDLE_STANDOFF - CLOSE_RANGE, HANDLE_CENTER_Z + 0.1],
            target, size=CLOSE_SIZE, focal=CLOSE_FOCAL,
        )
    return cams


def reach_elements_meta() -> list:
    return [
        {"id": "floor", "role": "supporting", "label": "floor"},
        {"id": "handle", "role": "functional", "label": "door handle"},
        {"id": "wall", "role": "supporting", "label": "wall"},
    ]


def reach_contact_graph_json(left_handed: bool = False) -> dict:
    palm = "left_palm" if left_handed else "right_palm"
    return {
        "body_nodes": [palm, "left_foot", "right_foot"],
        "scene_nodes": [
            {"id": "handle", "role": "functional"},
            {"id": "floor", "role": "supporting"},
        ],
        "edges": [
            {"part": palm, "element": "handle"},
            {"part": "left_foot", "element": "floor"},
            {"part": "right_foot", "element": "floor"},
        ],
    }


def reach_element_descriptors() -> tuple:
    """Descriptors the pipeline passes to the graph request, for the
    elements the fixture reasoner marks relevant (floor + handle)."""
    return ("floor: floor", "handle: door handle")


def write_reach_fixture(path, task: str = REACH_TASK, left_handed: bool = False) -> None:
    """Fixture responses for both reasoner calls of the reach pipeline."""
    elements_resp = {
        "elements": [
            {"label": "door handle", "role": "functional"},
            {"label": "floor", "role": "supporting"},
        ]
    }
    req = ReasonerRequest(task_prompt=task, element_labels=reach_element_descriptors())
    write_fixture(
        path,
        {
            build_elements_prompt(task): elements_resp,
            build_graph_prompt(req): reach_contact_graph_json(left_handed),
        },
    )


def write_reach_bundle(
    path,
    mirrored: bool = False,
    with_fixture: bool = True,
    with_rgb: bool = True,
    close_view: bool = True,
) -> str:
    """Write the reach scene bundle; ``mirrored`` flips the handle to the
    other side of the wall (used with a left-handed fixture graph to
    exercise laterality refinement).  Returns the bundle path."""
    handle_x = -0.25 if mirrored else 0.25
    cameras = reach_cameras(handle_x, close_view=close_view)
    depths, masks, rgbs = {}, {}, {}
    for key, cam in cameras.items():
        depth, label = raycast_view(cam, handle_x)
        depths[key] = DepthImage(values=depth)
        view_masks = {
            "floor": label == 1,
            "wall": label == 2,
            "handle": label == 3,
        }
        masks[key] = {k: m for k, m in view_masks.items() if m.any()}
        rgb = np.zeros((cam.height, cam.width, 3), dtype=np.uint8)
        for lab, name in ((1, "floor"), (2, "wall"), (3, "handle"), (4, "handle")):
            rgb[label == lab] = _COLORS[name]
        rgbs[key] = rgb
    save_bundle(
        path,
        cameras,
        depths,
        masks,
        reach_elements_meta(),
        rgbs=rgbs if with_rgb else None,
    )
    if with_fixture:
        write_reach_fixture(
            os.path.join(path, "fixture.json"), left_handed=mirrored
        )
        with open(os.path.join(path, "task.json"), "w") as f:
            json.dump({"task": REACH_TASK}, f)
    return str(path)


def analytic_reach_scene(handle_x: float = 0.25, spacing: float = 0.04) -> dict:
    """Grid-sampled floor / wall / handle point clouds in world space,
    bypassing the camera pipeline (handy for loss-level tests)."""
    xs = np.arange(-1.5, 1.5, spacing)
    ys = np.arange(0.0, WALL_Y, spacing)
    floor = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    floor = np.concatenate([floor, np.zeros((len(floor), 1))], axis=1)

    zs = np.arange(WALL_Z[0] + spacing, 2.2, spacing)
    wall = np.stack(np.meshgrid(xs, zs, indexing="ij"), axis=-1).reshape(-1, 2)
    wall = np.stack([wall[:, 0], np.full(len(wall), WALL_Y), wall[:, 1]], axis=1)

    c = handle_axis_xy(handle_x)
    az = np.linspace(0.0, 2 * np.pi, 14, endpoint=False)
    hz = np.arange(HANDLE_CENTER_Z - HANDLE_HALF_LENGTH,
                   HANDLE_CENTER_Z + HANDLE_HALF_LENGTH + 1e-9, 0.015)
    aa, zz = np.meshgrid(az, hz, indexing="ij")
    handle = np.stack(
        [
            c[0] + HANDLE_RADIUS * np.cos(aa.ravel()),
            c[1] + HANDLE_RADIUS * np.sin(aa.ravel()),
            zz.ravel(),
        ],
        axis=1,
    )
    return {"floor": floor, "wall": wall, "handle": handle}
