"""Objective terms for body refinement.

Three losses drive the fit: a collision term summing scene-point
penetration depths into the body SDF, a contact term summing
single-sided Chamfer distances for every contact-graph edge, and a
quadratic pose prior with soft joint limits standing in for a learned
pose prior.  Each loss also exposes its analytic gradient contributions
(w.r.t. capsule endpoints / surface samples / joint angles) so the
optimizer can chain them through ``fk_backward``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .body import (
    FOOT_PARTS,
    BodyPose,
    PosedBody,
    Skeleton,
    body_bounding_sphere,
    forward_kinematics,
    part_sample_indices,
    sdf_nearest,
)
from .contact import ContactGraph
from .errors import EmptyElementError, InputError
from .geometry import PointCloud

# Above this many element points, nearest neighbors come from a KD-tree;
# below, a brute-force argmin (which also fixes tie-breaking to the
# lowest point index).
_BRUTE_FORCE_LIMIT = 1024

# KD-trees per element point array; arrays are immutable after
# construction so caching on identity is sound (the array is kept
# referenced alongside its tree).
_TREE_CACHE: dict = {}


def _kdtree_for(pts: np.ndarray) -> cKDTree:
    key = id(pts)
    hit = _TREE_CACHE.get(key)
    if hit is not None and hit[0] is pts:
        return hit[1]
    tree = cKDTree(pts)
    _TREE_CACHE[key] = (pts, tree)
    if len(_TREE_CACHE) > 256:
        _TREE_CACHE.clear()
        _TREE_CACHE[key] = (pts, tree)
    return tree

DEFAULT_JOINT_LIMIT = 2.4  # rad, soft limit on per-joint rotation angle
DEFAULT_LIMIT_WEIGHT = 1.0

# Default per-joint prior weights, by joint-name substring.  The prior
# plays the role of a learned pose regularizer: it should resist bent
# spines and twisted necks, not ordinary arm reach or a slight knee
# bend, so articulation needed for tasks is cheap and torso integrity
# is expensive.
_PRIOR_WEIGHT_PATTERNS = (
    ("collar", 0.2),
    ("shoulder", 0.05),
    ("elbow", 0.05),
    ("forearm", 0.05),
    ("hip", 0.2),
    ("knee", 0.2),
    ("ankle", 0.2),
    ("foot", 0.2),
)


def default_prior_weights(skel: Skeleton) -> np.ndarray:
    """Anatomically graded weights over body joints (spine/neck/head 1.0,
    limbs lighter); this is the weight vector total_loss and refine use."""
    w = np.ones(skel.n_body_joints - 1)
    for j, name in enumerate(skel.joint_names[1 : skel.n_body_joints]):
        for pattern, value in _PRIOR_WEIGHT_PATTERNS:
            if pattern in name:
                w[j] = value
                break
    return w


@dataclass(frozen=True)
class LossWeights:
    lambda_col: float = 1.0
    lambda_con: float = 1.0
    lambda_prior: float = 0.05

    def __post_init__(self):
        for name in ("lambda_col", "lambda_con", "lambda_prior"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be finite and >= 0, got {v}")

    def replace(self, **kw) -> "LossWeights":
        d = {
            "lambda_col": self.lambda_col,
            "lambda_con": self.lambda_con,
            "lambda_prior": self.lambda_prior,
        }
        d.update(kw)
        return LossWeights(**d)


@dataclass(frozen=True)
class LossBreakdown:
    col: float
    con: float
    prior: float
    total: float

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.total))


def _collision_forward(posed: PosedBody, cloud: PointCloud):
    """Sum of penetration depths; keeps the nearest-capsule data of the
    penetrating points (as global point indices) for the gradient.

    Points outside the body's bounding sphere are skipped: their SDF is
    provably positive, so the value and gradient are exact regardless.
    """
    pts = cloud.points
    center, radius = body_bounding_sphere(posed)
    d2 = np.sum((pts - center) ** 2, axis=1)
    cand = np.flatnonzero(d2 <= radius * radius)
    if len(cand) == 0:
        return 0.0, cand, cand, np.zeros(0)
    vals, caps, us = sdf_nearest(pts[cand], posed)
    pen = vals < 0
    value = float(np.sum(-vals[pen]))
    return value, cand[pen], caps[pen], us[pen]


def loss_col(skel: Skeleton, pose: BodyPose, cloud: PointCloud, posed=None) -> float:
    """Collision loss: sum over scene points of max(0, -sdf)."""
    if len(cloud) == 0:
        raise InputError("collision loss needs a non-empty scene cloud")
    if posed is None:
        posed = forward_kinematics(skel, pose)
    value, _, _, _ = _collision_forward(posed, cloud)
    return value


def _collision_grad(posed: PosedBody, cloud: PointCloud, pen_idx, caps, us):
    """Gradient of the collision sum w.r.t. capsule endpoints (B, 3)."""
    B = len(posed.capsule_radii)
    ge0 = np.zeros((B, 3))
    ge1 = np.zeros((B, 3))
    if len(pen_idx) == 0:
        return ge0, ge1
    q = cloud.points[pen_idx]
    c = caps
    u = us[:, None]
    e0 = posed.capsule_e0[c]
    e1 = posed.capsule_e1[c]
    m = e0 + u * (e1 - e0)
    diff = q - m
    dist = np.linalg.norm(diff, axis=1, keepdims=True)
    ok = dist[:, 0] > 1e-12  # exactly on the capsule axis: subgradient 0
    unit = np.zeros_like(diff)
    unit[ok] = diff[ok] / dist[ok]
    # Each penetrating point contributes radius - dist; d/de0 = (1-u) (q-m)/dist.
    np.add.at(ge0, c, (1.0 - u) * unit)
    np.add.at(ge1, c, u * unit)
    return ge0, ge1


def _edge_samples(skel: Skeleton, edge_part: str) -> np.ndarray:
    return part_sample_indices(skel, edge_part, contact_zone=edge_part in FOOT_PARTS)


def _nearest_element_points(samples: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Index of the nearest element point per sample (lowest index on ties
    for the brute-force path)."""
    if len(pts) <= _BRUTE_FORCE_LIMIT:
        d2 = np.sum((samples[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        return np.argmin(d2, axis=1)
    _, idx = _kdtree_for(pts).query(samples)
    return idx


def _elements_by_id(elements) -> dict:
    return {el.id: el for el in elements}


def loss_con(
    skel: Skeleton,
    pose: BodyPose,
    graph: ContactGraph,
    elements,
    posed=None,
) -> float:
    """Contact loss: sum over graph edges of the single-sided Chamfer
    distance from the part's samples to the element's points (foot edges
    restricted to the toe/heel contact zone)."""
    if posed is None:
        posed = forward_kinematics(skel, pose)
    value, _ = _contact_forward(skel, posed, graph.edges, elements)
    return value


def _contact_forward(skel: Skeleton, posed: PosedBody, edges, elements):
    by_id = _elements_by_id(elements)
    total = 0.0
    per_edge = []
    for edge in edges:
        if edge.element not in by_id:
            raise InputError(f"edge references unknown element {edge.element!r}")
        pts = by_id[edge.element].points.points
        if len(pts) == 0:
            raise EmptyElementError(f"element {edge.element!r} has no points")
        idx = _edge_samples(skel, edge.part)
        samples = posed.samples[idx]
        nn = _nearest_element_points(samples, pts)
        diff = samples - pts[nn]
        vals = np.sum(diff * diff, axis=1)
        term = float(np.mean(vals))
        per_edge.append((edge, idx, nn, term))
        total += term
    return total, per_edge


def _contact_grad(skel: Skeleton, posed: PosedBody, per_edge, elements) -> np.ndarray:
    """Gradient of the contact sum w.r.t. all surface samples (S, 3), with
    nearest-neighbor correspondences held fixed."""
    by_id = _elements_by_id(elements)
    g = np.zeros_like(posed.samples)
    for edge, idx, nn, _ in per_edge:
        pts = by_id[edge.element].points.points
        samples = posed.samples[idx]
        np.add.at(g, idx, 2.0 * (samples - pts[nn]) / len(idx))
    return g


def loss_prior(
    pose: BodyPose,
    joint_weights: np.ndarray | None = None,
    joint_limit: float = DEFAULT_JOINT_LIMIT,
    limit_weight: float = DEFAULT_LIMIT_WEIGHT,
) -> float:
    """Pose prior: weighted squared deviation of the body pose from rest
    plus a quadratic hinge past the soft joint limit.  Reads only
    theta_body, so it is invariant to r, phi and the hand pose."""
    tb = pose.theta_body
    w = np.ones(len(tb)) if joint_weights is None else np.asarray(joint_weights, float)
    sq = np.sum(tb * tb, axis=1)
    value = float(np.sum(w * sq))
    if limit_weight > 0:
        norms = np.sqrt(sq)
        excess = np.maximum(0.0, norms - joint_limit)
        value += float(limit_weight * np.sum(excess * excess))
    return value


def _prior_grad(
    pose: BodyPose,
    joint_weights: np.ndarray | None = None,
    joint_limit: float = DEFAULT_JOINT_LIMIT,
    limit_weight: float = DEFAULT_LIMIT_WEIGHT,
) -> np.ndarray:
    tb = pose.theta_body
    w = np.ones(len(tb)) if joint_weights is None else np.asarray(joint_weights, float)
    g = 2.0 * w[:, None] * tb
    if limit_weight > 0:
        norms = np.linalg.norm(tb, axis=1)
        over = norms > joint_limit
        if np.any(over):
            coef = 2.0 * limit_weight * (norms[over] - joint_limit) / norms[over]
            g[over] += coef[:, None] * tb[over]
    return g


def total_loss(
    skel: Skeleton,
    pose: BodyPose,
    cloud: PointCloud,
    graph: ContactGraph,
    elements,
    weights: LossWeights,
    posed=None,
    prior_weights: np.ndarray | None = None,
) -> LossBreakdown:
    """Weighted sum of the three losses, with components reported
    separately for tracing.  The prior uses the anatomically graded
    default weights unless an explicit vector is given."""
    if posed is None:
        posed = forward_kinematics(skel, pose)
    col, _, _, _ = _collision_forward(posed, cloud) if len(cloud) else (0.0, None, None, None)
    con, _ = _contact_forward(skel, posed, graph.edges, elements)
    if prior_weights is None:
        prior_weights = default_prior_weights(skel)
    prior = loss_prior(pose, joint_weights=prior_weights)
    total = weights.lambda_col * col + weights.lambda_con * con + weights.lambda_prior * prior
    return LossBreakdown(col=col, con=con, prior=prior, total=total)
