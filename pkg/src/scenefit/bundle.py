"""Scene bundle directory format.

A bundle holds posed RGB-D views plus per-element masks:

    <bundle>/
      elements.json              [{"id", "role", "label"}, ...]
      views/<k>/rgb.png          8-bit RGB (optional)
      views/<k>/depth.png        16-bit grayscale, millimeters
      views/<k>/camera.json      intrinsics + 4x4 world_from_camera + gravity
      views/<k>/masks/<id>.png   binary mask per visible element

Depth PNGs are interpreted as millimeters and converted to meters on
load; zero depth means invalid.  Any externally reconstructed posed
RGB-D data can be dropped into this layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import EmptyElementError, InputError
from .geometry import (
    DEFAULT_VOXEL,
    Camera,
    DepthImage,
    PointCloud,
    SceneElement,
    backproject,
    fuse,
    lift_mask,
    merge_elements,
)

DEPTH_SCALE = 1000.0  # mm per meter in 16-bit depth PNGs


@dataclass(frozen=True)
class View:
    key: str
    camera: Camera
    depth: DepthImage
    rgb: np.ndarray | None = None  # (H, W, 3) uint8


@dataclass(frozen=True)
class SceneBundle:
    path: str
    views: dict  # key -> View, insertion order = sorted keys
    cloud: PointCloud  # fused full scene
    elements: list  # SceneElement, merged across views
    gravity_dir: np.ndarray

    def element(self, element_id: str) -> SceneElement:
        for el in self.elements:
            if el.id == element_id:
                return el
        raise InputError(f"no element {element_id!r} in bundle {self.path}")


def write_depth_png(path, depth_m: np.ndarray) -> None:
    mm = np.round(np.asarray(depth_m, dtype=float) * DEPTH_SCALE)
    if np.any(mm < 0) or np.any(mm > np.iinfo(np.uint16).max):
        raise InputError("depth out of range for 16-bit millimeter PNG")
    Image.fromarray(mm.astype(np.uint16)).save(path)


def read_depth_png(path) -> DepthImage:
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise InputError(f"{path}: depth PNG must be single-channel")
    return DepthImage(values=arr.astype(float) / DEPTH_SCALE)


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask).astype(np.uint8)) * 255).save(path)


def read_mask_png(path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("L"))
    return arr > 127


def write_rgb_png(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_rgb_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def save_bundle(
    path,
    cameras: dict,
    depths: dict,
    masks: dict,
    elements_meta: list,
    rgbs: dict | None = None,
) -> None:
    """Write a bundle directory.  ``masks`` maps view key -> {element id
    -> bool mask}; ``elements_meta`` is the elements.json content."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "elements.json"), "w") as f:
        json.dump(elements_meta, f, indent=1, sort_keys=True)
    for key, cam in cameras.items():
        vdir = os.path.join(path, "views", key)
        os.makedirs(os.path.join(vdir, "masks"), exist_ok=True)
        with open(os.path.join(vdir, "camera.json"), "w") as f:
            json.dump(cam.to_json_dict(), f, indent=1)
        write_depth_png(os.path.join(vdir, "depth.png"), depths[key].values)
        if rgbs and key in rgbs:
            write_rgb_png(os.path.join(vdir, "rgb.png"), rgbs[key])
        for el_id, mask in masks.get(key, {}).items():
            write_mask_png(os.path.join(vdir, "masks", f"{el_id}.png"), mask)


def load_bundle(path, stride: int = 1, voxel: float = DEFAULT_VOXEL) -> SceneBundle:
    """Load a bundle: back-project every view, fuse the scene cloud, and
    lift each element's masks across views."""
    elements_path = os.path.join(path, "elements.json")
    if not os.path.isfile(elements_path):
        raise InputError(f"{path}: elements.json missing")
    with open(elements_path) as f:
        elements_meta = json.load(f)
    views_dir = os.path.join(path, "views")
    if not os.path.isdir(views_dir):
        raise InputError(f"{path}: views/ directory missing")
    keys = sorted(os.listdir(views_dir))
    if not keys:
        raise InputError(f"{path}: no views")

    views = {}
    for key in keys:
        vdir = os.path.join(views_dir, key)
        cam_path = os.path.join(vdir, "camera.json")
        if not os.path.isfile(cam_path):
            raise InputError(f"{vdir}/camera.json missing")
        with open(cam_path) as f:
            cam = Camera.from_json_dict(json.load(f))
        depth_path = os.path.join(vdir, "depth.png")
        if not os.path.isfile(depth_path):
            raise InputError(f"{vdir}/depth.png missing")
        depth = read_depth_png(depth_path)
        if (depth.height, depth.width) != (cam.height, cam.width):
            raise InputError(f"{vdir}: depth size does not match camera")
        rgb_path = os.path.join(vdir, "rgb.png")
        rgb = read_rgb_png(rgb_path) if os.path.isfile(rgb_path) else None
        views[key] = View(key=key, camera=cam, depth=depth, rgb=rgb)

    gravity = next(iter(views.values())).camera.gravity_dir
    for v in views.values():
        if np.linalg.norm(v.camera.gravity_dir - gravity) > 1e-6:
            raise InputError(f"{path}: views disagree on gravity direction")

    cloud = fuse(
        [backproject(v.depth, v.camera, stride=stride, rgb=v.rgb) for v in views.values()],
        voxel=voxel,
    )

    elements = []
    for meta in elements_meta:
        for field_name in ("id", "role"):
            if field_name not in meta:
                raise InputError(f"elements.json entry missing {field_name!r}: {meta}")
        lifts = []
        for key, view in views.items():
            mask_path = os.path.join(views_dir, key, "masks", f"{meta['id']}.png")
            if not os.path.isfile(mask_path):
                continue
            mask = read_mask_png(mask_path)
            try:
                lifts.append(
                    lift_mask(
                        mask,
                        view.depth,
                        view.camera,
                        id=meta["id"],
                        role=meta["role"],
                        label=meta.get("label", ""),
                        view=key,
                        rgb=view.rgb,
                    )
                )
            except EmptyElementError:
                continue  # element invisible in this view
        if not lifts:
            raise EmptyElementError(
                f"element {meta['id']!r} has no valid mask pixels in any view"
            )
        elements.append(merge_elements(lifts, voxel=voxel))

    return SceneBundle(
        path=str(path), views=views, cloud=cloud, elements=elements, gravity_dir=gravity
    )
