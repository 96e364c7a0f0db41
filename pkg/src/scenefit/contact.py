"""Contact graphs: body-part / scene-element contact relations and the
left-right laterality refinement rule.

A graph is bipartite: body nodes from the closed part vocabulary, scene
nodes identified by element id with a functional/supporting role, and
edges that demand contact between a part's surface samples and an
element's points.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .body import CONTACT_VOCABULARY, LATERALITY_SWAP_PARTS, PosedBody, Skeleton, mirror_part
from .errors import InputError
from .geometry import ROLES, Camera, SceneElement, project

log = logging.getLogger(__name__)

DEFAULT_DELTA_FRACTION = 0.02  # laterality tolerance as a fraction of image width


@dataclass(frozen=True)
class SceneNode:
    id: str
    role: str


@dataclass(frozen=True)
class Edge:
    part: str
    element: str


@dataclass(frozen=True)
class ContactGraph:
    body_nodes: tuple  # part names
    scene_nodes: tuple  # SceneNode
    edges: tuple  # Edge

    def __post_init__(self):
        object.__setattr__(self, "body_nodes", tuple(self.body_nodes))
        object.__setattr__(self, "scene_nodes", tuple(self.scene_nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def role_of(self, element_id: str) -> str | None:
        for node in self.scene_nodes:
            if node.id == element_id:
                return node.role
        return None

    def edges_for_role(self, role: str) -> tuple:
        return tuple(e for e in self.edges if self.role_of(e.element) == role)

    def to_json_dict(self) -> dict:
        return {
            "body_nodes": list(self.body_nodes),
            "scene_nodes": [{"id": n.id, "role": n.role} for n in self.scene_nodes],
            "edges": [{"part": e.part, "element": e.element} for e in self.edges],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ContactGraph":
        try:
            return cls(
                body_nodes=tuple(d["body_nodes"]),
                scene_nodes=tuple(
                    SceneNode(id=n["id"], role=n["role"]) for n in d["scene_nodes"]
                ),
                edges=tuple(
                    Edge(part=e["part"], element=e["element"]) for e in d["edges"]
                ),
            )
        except (KeyError, TypeError) as e:
            raise InputError(f"contact graph json malformed: {e}") from e


def save_graph(path, graph: ContactGraph) -> None:
    with open(path, "w") as f:
        json.dump(graph.to_json_dict(), f, indent=1, sort_keys=True)


def load_graph(path) -> ContactGraph:
    with open(path) as f:
        return ContactGraph.from_json_dict(json.load(f))


def validate(graph: ContactGraph, elements: list | None = None) -> list:
    """Check every graph invariant; returns a list of violation strings
    (empty = ok).  Violations are data, not exceptions: schema repair for
    reasoner output feeds them back into the retry prompt.
    """
    violations = []
    for part in graph.body_nodes:
        if part not in CONTACT_VOCABULARY:
            violations.append(f"vocabulary: unknown body part {part!r}")
    scene_ids = [n.id for n in graph.scene_nodes]
    for node in graph.scene_nodes:
        if node.role not in ROLES:
            violations.append(f"role: element {node.id!r} has invalid role {node.role!r}")
    if len(set(scene_ids)) != len(scene_ids):
        violations.append("duplicate scene node ids")
    seen = set()
    for e in graph.edges:
        if e.part not in CONTACT_VOCABULARY:
            if e.part not in graph.body_nodes:
                violations.append(f"vocabulary: unknown body part {e.part!r}")
        elif e.part not in graph.body_nodes:
            violations.append(f"dangling: edge part {e.part!r} not in body nodes")
        if e.element not in scene_ids:
            violations.append(f"dangling: edge element {e.element!r} not in scene nodes")
        key = (e.part, e.element)
        if key in seen:
            violations.append(f"duplicate edge {key}")
        seen.add(key)
    if elements is not None:
        known = {el.id for el in elements}
        for node in graph.scene_nodes:
            if node.id not in known:
                violations.append(f"dangling: scene node {node.id!r} has no scene element")
        by_id = {el.id: el for el in elements}
        for node in graph.scene_nodes:
            el = by_id.get(node.id)
            if el is not None and el.role != node.role:
                violations.append(
                    f"role: scene node {node.id!r} says {node.role!r} "
                    f"but element says {el.role!r}"
                )
    functional_ids = {n.id for n in graph.scene_nodes if n.role == "functional"}
    if functional_ids and not any(e.element in functional_ids for e in graph.edges):
        violations.append("functional element present but no edge touches one")
    return violations


def swap_hand_nodes(graph: ContactGraph) -> ContactGraph:
    """Mirror every hand-related node (palms, fingers, hands, forearms)
    across left/right; non-hand and scene nodes are untouched.  An
    involution: applying it twice restores the original graph."""

    def swap(part: str) -> str:
        return mirror_part(part) if part in LATERALITY_SWAP_PARTS else part

    return ContactGraph(
        body_nodes=tuple(swap(p) for p in graph.body_nodes),
        scene_nodes=graph.scene_nodes,
        edges=tuple(Edge(part=swap(e.part), element=e.element) for e in graph.edges),
    )


def refine_laterality(
    graph: ContactGraph,
    posed: PosedBody,
    skel: Skeleton,
    cam: Camera,
    element: SceneElement,
    delta: float | None = None,
    view: str | None = None,
) -> ContactGraph:
    """Align the graph's hand laterality with the initialized body.

    Projects both wrist joints into the view and compares pixel distances
    to the functional element's bbox center c_o; if the graph assigns a
    left-hand part to the element but the left wrist is farther by more
    than ``delta`` px (or symmetrically for right), all hand-related
    nodes are mirrored.  Raises BehindCameraError if a wrist projects to
    nonpositive depth (callers fall back to the unchanged graph).
    """
    if delta is None:
        delta = DEFAULT_DELTA_FRACTION * cam.width
    if view is None:
        if len(element.bbox2d) != 1:
            raise InputError(
                f"element {element.id!r} has bboxes for views "
                f"{sorted(element.bbox2d)}; pass view= explicitly"
            )
        view = next(iter(element.bbox2d))
    c_o = element.bbox_center(view)

    hand_edges = [
        e
        for e in graph.edges
        if e.element == element.id and e.part in LATERALITY_SWAP_PARTS
    ]
    left = any(e.part.startswith("left_") for e in hand_edges)
    right = any(e.part.startswith("right_") for e in hand_edges)
    if not hand_edges or (left and right):
        if left and right:
            log.warning(
                "laterality refinement skipped: both hands assigned to %r",
                element.id,
            )
        return graph

    w_left = posed.joint_pos[skel.joint_index("left_wrist")]
    w_right = posed.joint_pos[skel.joint_index("right_wrist")]
    d_left = float(np.linalg.norm(project(w_left, cam) - c_o))
    d_right = float(np.linalg.norm(project(w_right, cam) - c_o))

    if left and d_left > d_right + delta:
        log.info(
            "laterality swap: d_left=%.1f px > d_right=%.1f px + delta=%.1f",
            d_left, d_right, delta,
        )
        return swap_hand_nodes(graph)
    if right and d_right > d_left + delta:
        log.info(
            "laterality swap: d_right=%.1f px > d_left=%.1f px + delta=%.1f",
            d_right, d_left, delta,
        )
        return swap_hand_nodes(graph)
    return graph
