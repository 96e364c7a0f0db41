"""Evaluation metrics for a synthesized body in a scene.

* NCS   - non-collision score: fraction of scene points with sdf >= 0.
* N-FCD - non-functional contact distance: mean over supporting edges of
  the single-sided Chamfer term (same per-edge formula as the contact
  loss), squared meters.
* FCD   - functional contact distance: same, over functional edges whose
  body part is a hand part.

N-FCD/FCD are None (not 0) when the graph has no qualifying edges.
Distances are reported in squared meters to match the loss convention;
pass root=True to the report serializer for square-rooted values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .body import (
    HAND_PARTS,
    BodyPose,
    Skeleton,
    body_bounding_sphere,
    forward_kinematics,
    sdf,
)
from .contact import ContactGraph
from .errors import InputError
from .geometry import PointCloud
from .losses import _contact_forward


@dataclass(frozen=True)
class MetricsReport:
    ncs: float
    nfcd: float | None
    fcd: float | None
    per_element: dict = field(default_factory=dict)
    scs: float | None = None  # reserved for an external semantic scorer

    def __post_init__(self):
        if not 0.0 <= self.ncs <= 1.0:
            raise InputError(f"ncs must be in [0, 1], got {self.ncs}")
        for name in ("nfcd", "fcd"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name} must be >= 0, got {v}")

    def to_json_dict(self, root: bool = False) -> dict:
        def maybe_root(v):
            if v is None:
                return None
            return float(np.sqrt(v)) if root else v

        return {
            "ncs": self.ncs,
            "nfcd": maybe_root(self.nfcd),
            "fcd": maybe_root(self.fcd),
            "per_element": {k: maybe_root(v) for k, v in sorted(self.per_element.items())},
            "scs": self.scs,
            "units": "m" if root else "m^2",
        }

    def save(self, path, root: bool = False) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(root), f, indent=1, sort_keys=True)


def ncs(skel: Skeleton, pose: BodyPose, cloud: PointCloud, posed=None) -> float:
    """Fraction of scene points outside (or on) the body surface.

    Points beyond the body's bounding sphere have positive SDF by
    construction and are counted without evaluation.
    """
    if len(cloud) == 0:
        raise InputError("ncs needs a non-empty scene cloud")
    if posed is None:
        posed = forward_kinematics(skel, pose)
    center, radius = body_bounding_sphere(posed)
    d2 = np.sum((cloud.points - center) ** 2, axis=1)
    cand = d2 <= radius * radius
    colliding = 0
    if np.any(cand):
        colliding = int(np.count_nonzero(sdf(cloud.points[cand], posed) < 0.0))
    return float((len(cloud) - colliding) / len(cloud))


def _mean_chamfer(skel, pose, edges, elements, posed):
    if posed is None:
        posed = forward_kinematics(skel, pose)
    _, per_edge = _contact_forward(skel, posed, edges, elements)
    per_element: dict = {}
    for edge, _, _, term in per_edge:
        per_element.setdefault(edge.element, []).append(term)
    per_element = {k: float(np.mean(v)) for k, v in per_element.items()}
    mean = float(np.mean([term for _, _, _, term in per_edge]))
    return mean, per_element


def nfcd(
    skel: Skeleton,
    pose: BodyPose,
    elements,
    graph: ContactGraph,
    posed=None,
) -> tuple:
    """Mean single-sided Chamfer over supporting edges plus a per-element
    breakdown; (None, {}) if the graph has no supporting edges (not
    applicable, distinct from a perfect 0)."""
    supporting = graph.edges_for_role("supporting")
    if not supporting:
        return None, {}
    return _mean_chamfer(skel, pose, supporting, elements, posed)


def fcd(
    skel: Skeleton,
    pose: BodyPose,
    elements,
    graph: ContactGraph,
    posed=None,
) -> tuple:
    """Mean single-sided Chamfer from hand-part samples to functional
    elements; (None, {}) if no functional edge involves a hand part."""
    functional = tuple(
        e for e in graph.edges_for_role("functional") if e.part in HAND_PARTS
    )
    if not functional:
        return None, {}
    return _mean_chamfer(skel, pose, functional, elements, posed)


def evaluate(
    skel: Skeleton,
    pose: BodyPose,
    cloud: PointCloud,
    elements,
    graph: ContactGraph,
) -> MetricsReport:
    """All metrics in one pass (one forward kinematics evaluation)."""
    posed = forward_kinematics(skel, pose)
    ncs_value = ncs(skel, pose, cloud, posed=posed)
    nfcd_value, nfcd_per = nfcd(skel, pose, elements, graph, posed=posed)
    fcd_value, fcd_per = fcd(skel, pose, elements, graph, posed=posed)
    per_element = {f"nfcd:{k}": v for k, v in nfcd_per.items()}
    per_element.update({f"fcd:{k}": v for k, v in fcd_per.items()})
    return MetricsReport(
        ncs=ncs_value, nfcd=nfcd_value, fcd=fcd_value, per_element=per_element
    )
