"""Scene geometry: pinhole cameras, depth back-projection, cloud fusion.

World points live in meters, right-handed, with gravity direction given
per camera.  The camera model is the OpenCV pinhole convention: camera
+z looks into the scene, +x right, +y down; ``world_from_camera`` maps
camera-frame points to world-frame points.  Depth images store camera-z
depth in meters with 0 marking an invalid pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, EmptyElementError, InputError

ROLE_FUNCTIONAL = "functional"
ROLE_SUPPORTING = "supporting"
ROLES = (ROLE_FUNCTIONAL, ROLE_SUPPORTING)

DEFAULT_VOXEL = 0.02  # m, scene-cloud downsampling cell (collision-loss efficiency)
DEFAULT_ELEMENT_VOXEL = 0.01  # m, finer cell for element point sets (contact fidelity)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics plus a world-from-camera rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_from_camera: np.ndarray  # 4x4 row-major rigid transform
    gravity_dir: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -1.0])
    )

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        T = np.asarray(self.world_from_camera, dtype=float)
        if T.shape != (4, 4):
            raise InputError(f"world_from_camera must be 4x4, got {T.shape}")
        R = T[:3, :3]
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6):
            raise InputError("world_from_camera rotation is not orthonormal")
        g = np.asarray(self.gravity_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(g) - 1.0) > 1e-6:
            raise InputError("gravity_dir must have unit norm")
        object.__setattr__(self, "world_from_camera", _frozen(T))
        object.__setattr__(self, "gravity_dir", _frozen(g))

    @property
    def rotation(self) -> np.ndarray:
        return self.world_from_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_from_camera[:3, 3]

    @property
    def up_dir(self) -> np.ndarray:
        return -self.gravity_dir

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "world_from_camera": [list(map(float, row)) for row in self.world_from_camera],
            "gravity_dir": list(map(float, self.gravity_dir)),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Camera":
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
                world_from_camera=np.asarray(d["world_from_camera"], dtype=float),
                gravity_dir=np.asarray(d["gravity_dir"], dtype=float),
            )
        except KeyError as e:
            raise InputError(f"camera json missing field {e}") from e


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel depth in meters; 0 marks an invalid pixel."""

    values: np.ndarray  # (H, W) float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise InputError(f"depth must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("depth contains non-finite values")
        if np.any(v < 0):
            raise InputError("depth contains negative values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PointCloud:
    """World-frame 3D points with optional per-point colors in [0, 1]."""

    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray | None = None  # (N, 3) float in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise InputError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(p))
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=float).reshape(-1, 3)
            if c.shape[0] != p.shape[0]:
                raise InputError("colors and points disagree in length")
            object.__setattr__(self, "colors", _frozen(c))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SceneElement:
    """A labeled subset of the scene cloud with per-view 2D bounding boxes.

    ``bbox2d`` maps a view key to tight pixel bounds (x0, y0, x1, y1),
    inclusive, of the element's mask in that view.
    """

    id: str
    role: str
    points: PointCloud
    bbox2d: dict  # view key -> (x0, y0, x1, y1)
    label: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise InputError(f"element role must be one of {ROLES}, got {self.role!r}")
        if len(self.points) == 0:
            raise EmptyElementError(f"element {self.id!r} has no points")

    def bbox_center(self, view: str) -> np.ndarray:
        """Pixel center of the element's bounding box in ``view``."""
        try:
            x0, y0, x1, y1 = self.bbox2d[view]
        except KeyError:
            raise InputError(f"element {self.id!r} has no bbox for view {view!r}")
        return np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])


def backproject(
    depth: DepthImage,
    cam: Camera,
    stride: int = 1,
    rgb: np.ndarray | None = None,
) -> PointCloud:
    """Lift a posed depth image to a world-frame point cloud.

    Pixels are visited row-major with the given stride; invalid (zero)
    depths emit no point.  If ``rgb`` (H, W, 3, uint8 or float) is given,
    per-point colors are attached.
    """
    if (depth.height, depth.width) != (cam.height, cam.width):
        raise InputError(
            f"depth {depth.height}x{depth.width} does not match "
            f"camera {cam.height}x{cam.width}"
        )
    if stride < 1:
        raise InputError(f"stride must be >= 1, got {stride}")
    z = depth.values[::stride, ::stride]
    vs, us = np.meshgrid(
        np.arange(0, depth.height, stride),
        np.arange(0, depth.width, stride),
        indexing="ij",
    )
    valid = z > 0
    u = us[valid].astype(float)
    v = vs[valid].astype(float)
    d = z[valid]
    x = d * (u - cam.cx) / cam.fx
    y = d * (v - cam.cy) / cam.fy
    pts_cam = np.stack([x, y, d], axis=1)
    pts = pts_cam @ cam.rotation.T + cam.translation
    colors = None
    if rgb is not None:
        rgb = np.asarray(rgb)
        if rgb.shape[:2] != (depth.height, depth.width):
            raise InputError("rgb dimensions do not match depth")
        c = rgb[::stride, ::stride][valid].astype(float)
        if rgb.dtype == np.uint8:
            c = c / 255.0
        colors = c[:, :3]
    return PointCloud(points=pts, colors=colors)


def valid_pixels(depth: DepthImage, stride: int = 1) -> np.ndarray:
    """(u, v) pixel coordinates that backproject emits, in emission order."""
    z = depth.values[::stride, ::stride]
    vs, us = np.meshgrid(
        np.arange(0, depth.height, stride),
        np.arange(0, depth.width, stride),
        indexing="ij",
    )
    valid = z > 0
    return np.stack([us[valid], vs[valid]], axis=1).astype(float)


def project(points: np.ndarray, cam: Camera) -> np.ndarray:
    """Project world points to pixel coordinates (the operator applied to
    wrist joints during laterality refinement).

    Accepts a single (3,) point or an (N, 3) array; raises
    BehindCameraError if any point has nonpositive camera-frame depth.
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 3)
    pc = (p - cam.translation) @ cam.rotation
    z = pc[:, 2]
    if np.any(z <= 0):
        raise BehindCameraError("point(s) at nonpositive camera depth")
    uv = np.stack(
        [cam.fx * pc[:, 0] / z + cam.cx, cam.fy * pc[:, 1] / z + cam.cy], axis=1
    )
    return uv[0] if single else uv


def fuse(clouds: list[PointCloud], voxel: float = DEFAULT_VOXEL) -> PointCloud:
    """Union point clouds, optionally collapsing each voxel cell to its
    centroid.

    voxel = 0 concatenates exactly.  With voxel > 0, output order is fixed
    by lexicographic sort of voxel indices, so the result is independent
    of any internal parallelism and deterministic given input order.
    """
    if voxel < 0:
        raise InputError(f"voxel must be >= 0, got {voxel}")
    if not clouds:
        return PointCloud(points=np.zeros((0, 3)))
    pts = np.concatenate([c.points for c in clouds], axis=0)
    has_colors = all(c.colors is not None for c in clouds) and len(pts) > 0
    cols = (
        np.concatenate([c.colors for c in clouds], axis=0) if has_colors else None
    )
    if voxel == 0 or len(pts) == 0:
        return PointCloud(points=pts, colors=cols)
    idx = np.floor(pts / voxel).astype(np.int64)
    uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    centroids = np.zeros((len(uniq), 3))
    np.add.at(centroids, inverse, pts)
    centroids /= counts[:, None]
    out_cols = None
    if cols is not None:
        out_cols = np.zeros((len(uniq), 3))
        np.add.at(out_cols, inverse, cols)
        out_cols /= counts[:, None]
    return PointCloud(points=centroids, colors=out_cols)


def lift_mask(
    mask: np.ndarray,
    depth: DepthImage,
    cam: Camera,
    id: str,
    role: str,
    label: str = "",
    view: str = "0",
    rgb: np.ndarray | None = None,
) -> SceneElement:
    """Back-project the mask-true pixels with valid depth into a labeled
    scene element; the 2D bbox covers all mask-true pixels of this view."""
    m = np.asarray(mask).astype(bool)
    if m.shape != (depth.height, depth.width):
        raise InputError(
            f"mask {m.shape} does not match depth {depth.height}x{depth.width}"
        )
    if not m.any():
        raise EmptyElementError(f"mask for element {id!r} is empty")
    masked_depth = DepthImage(values=np.where(m, depth.values, 0.0))
    cloud = backproject(masked_depth, cam, stride=1, rgb=rgb)
    if len(cloud) == 0:
        raise EmptyElementError(f"mask for element {id!r} has no valid depth")
    ys, xs = np.nonzero(m)
    bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    return SceneElement(id=id, role=role, points=cloud, bbox2d={view: bbox}, label=label)


def merge_elements(parts: list[SceneElement], voxel: float = DEFAULT_VOXEL) -> SceneElement:
    """Union per-view lifts of the same element id (points fused, per-view
    bboxes collected)."""
    if not parts:
        raise InputError("merge_elements needs at least one element")
    ids = {e.id for e in parts}
    if len(ids) != 1:
        raise InputError(f"cannot merge elements with different ids: {sorted(ids)}")
    bbox = {}
    for e in parts:
        bbox.update(e.bbox2d)
    cloud = fuse([e.points for e in parts], voxel=voxel)
    first = parts[0]
    return SceneElement(
        id=first.id, role=first.role, points=cloud, bbox2d=bbox, label=first.label
    )
