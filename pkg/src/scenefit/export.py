"""ASCII PLY point-cloud export and OBJ capsule-mesh export."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .geometry import PointCloud


def write_ply(path, cloud: PointCloud) -> None:
    """Write an ASCII PLY point cloud (colors as uchar if present)."""
    pts = cloud.points
    cols = cloud.colors
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(pts)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        if cols is not None:
            f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        f.write("end_header\n")
        if cols is None:
            for p in pts:
                f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")
        else:
            rgb = np.clip(np.round(cols * 255.0), 0, 255).astype(int)
            for p, c in zip(pts, rgb):
                f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}\n")


def read_ply(path) -> PointCloud:
    """Read the ASCII PLY files written by :func:`write_ply`."""
    with open(path) as f:
        line = f.readline().strip()
        if line != "ply":
            raise InputError(f"{path}: not a PLY file")
        n = None
        has_color = False
        while True:
            line = f.readline()
            if not line:
                raise InputError(f"{path}: truncated header")
            line = line.strip()
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            elif line == "property uchar red":
                has_color = True
            elif line == "end_header":
                break
        if n is None:
            raise InputError(f"{path}: no vertex element")
        rows = [f.readline().split() for _ in range(n)]
    data = np.array(rows, dtype=float) if rows else np.zeros((0, 6 if has_color else 3))
    pts = data[:, :3] if len(data) else np.zeros((0, 3))
    cols = data[:, 3:6] / 255.0 if has_color and len(data) else None
    return PointCloud(points=pts, colors=cols)


def tessellate_capsule(
    e0: np.ndarray, e1: np.ndarray, radius: float, n_az: int = 12, n_cap: int = 4
) -> tuple[np.ndarray, np.ndarray]:
    """Triangle mesh of a capsule: cylinder wall plus spherical end caps.

    Returns (vertices (V, 3), faces (F, 3) int, 0-based).
    """
    e0 = np.asarray(e0, dtype=float)
    e1 = np.asarray(e1, dtype=float)
    axis = e1 - e0
    length = np.linalg.norm(axis)
    if length < 1e-12:
        axis_u = np.array([0.0, 0.0, 1.0])
    else:
        axis_u = axis / length
    ref = np.array([1.0, 0.0, 0.0])
    if abs(axis_u @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    u = np.cross(ref, axis_u)
    u /= np.linalg.norm(u)
    v = np.cross(axis_u, u)
    az = np.linspace(0.0, 2 * np.pi, n_az, endpoint=False)
    ring_dirs = np.outer(np.cos(az), u) + np.outer(np.sin(az), v)  # (n_az, 3)

    verts = []
    # Cap rings sweep from the pole toward the cylinder rim.
    lat = np.linspace(0.0, np.pi / 2, n_cap + 1)[1:]  # exclude pole
    verts.append(e0 - radius * axis_u)  # bottom pole, index 0
    rings = []
    # Bottom cap rings (from near-pole to rim), then top cap rims mirrored.
    bottom = [e0 + radius * (np.sin(t) * ring_dirs - np.cos(t) * axis_u) for t in lat]
    top = [e1 + radius * (np.sin(t) * ring_dirs + np.cos(t) * axis_u) for t in lat[::-1]]
    for ring in bottom + top:
        rings.append(len(verts))
        verts.extend(ring)
    top_pole = len(verts)
    verts.append(e1 + radius * axis_u)
    verts = np.array(verts)

    faces = []
    # Fan at bottom pole.
    first = rings[0]
    for k in range(n_az):
        faces.append([0, first + (k + 1) % n_az, first + k])
    # Bands between consecutive rings.
    for r0, r1 in zip(rings[:-1], rings[1:]):
        for k in range(n_az):
            k1 = (k + 1) % n_az
            faces.append([r0 + k, r0 + k1, r1 + k1])
            faces.append([r0 + k, r1 + k1, r1 + k])
    # Fan at top pole.
    last = rings[-1]
    for k in range(n_az):
        faces.append([top_pole, last + k, last + (k + 1) % n_az])
    return verts, np.array(faces, dtype=int)


def write_obj(path, capsules: list[tuple[np.ndarray, np.ndarray, float]]) -> None:
    """Write tessellated capsules [(e0, e1, radius), ...] as a single OBJ."""
    with open(path, "w") as f:
        offset = 0
        for i, (e0, e1, r) in enumerate(capsules):
            verts, faces = tessellate_capsule(e0, e1, r)
            f.write(f"o capsule_{i}\n")
            for p in verts:
                f.write(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")
            for a, b, c in faces + 1 + offset:
                f.write(f"f {a} {b} {c}\n")
            offset += len(verts)
