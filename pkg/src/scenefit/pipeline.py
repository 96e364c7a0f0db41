"""End-to-end driver: reconstruct, reason, initialize, optimize, evaluate.

Each stage is a plain function so the CLI subcommands and the one-shot
``run_pipeline`` share the exact same code paths.  Failures surface as
PipelineError tagged with the stage name; artifacts already written are
left in place.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .body import (
    BodyPose,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    load_pose,
    part_samples,
    relaxed_hand_theta,
    save_pose,
)
from .bundle import SceneBundle, load_bundle
from .contact import ContactGraph, refine_laterality, save_graph, validate
from .errors import (
    BehindCameraError,
    GraphValidationError,
    InputError,
    PlacementError,
    SceneFitError,
    PipelineError,
)
from .export import write_obj, write_ply
from .geometry import DEFAULT_VOXEL, SceneElement
from .losses import LossWeights
from .metrics import MetricsReport, evaluate
from .optim import OptimTrace, StageConfig, default_stages, refine
from .reasoner import (
    ReasonerConfig,
    ReasonerRequest,
    request_contact_graph,
    request_elements,
)
from .rotations import matrix_to_axis_angle

log = logging.getLogger(__name__)

DEFAULT_STANDOFF = 0.6  # m from the functional element centroid (arm reach)


@dataclass(frozen=True)
class PipelineConfig:
    bundle_path: str
    task_prompt: str
    reasoner: ReasonerConfig
    out_dir: str
    init_pose_path: str | None = None  # None -> T-pose placement
    standoff: float = DEFAULT_STANDOFF
    k1: int = 400
    eta1: float = 1e-2
    k2: int = 200
    eta2: float | None = None  # None -> eta1 / 5
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0  # reserved for stochastic extensions; default path is deterministic
    view: str | None = None  # None -> view with the largest functional bbox
    stride: int = 1
    voxel: float = DEFAULT_VOXEL
    skeleton: Skeleton | None = None
    delta_px: float | None = None
    root_units: bool = False

    def __post_init__(self):
        if not os.path.isdir(self.bundle_path):
            raise InputError(f"bundle path {self.bundle_path!r} is not a directory")
        if self.init_pose_path is not None and not os.path.isfile(self.init_pose_path):
            raise InputError(f"init pose file {self.init_pose_path!r} not found")

    def build_stages(self, skel: Skeleton, gravity_dir) -> tuple:
        s1, s2 = default_stages(skel, gravity_dir)
        eta2 = self.eta2 if self.eta2 is not None else self.eta1 / 5.0
        return (
            StageConfig(iterations=self.k1, lr=self.eta1, mask=s1.mask,
                        joint_lr_scale=s1.joint_lr_scale),
            StageConfig(iterations=self.k2, lr=eta2, mask=s2.mask,
                        joint_lr_scale=s2.joint_lr_scale),
        )


def describe_element(el: SceneElement) -> str:
    return f"{el.id}: {el.label}" if el.label else el.id


def match_elements(elements, responses) -> list:
    """Scene elements whose label or id matches a reasoner-returned label
    (case-insensitive substring either way); preserves element order."""
    wanted = [str(r["label"]).lower() for r in responses]

    def hit(el: SceneElement) -> bool:
        names = {el.id.lower(), el.label.lower()} - {""}
        return any(w in n or n in w for w in wanted for n in names)

    return [el for el in elements if hit(el)]


def choose_functional_element(graph: ContactGraph, bundle: SceneBundle) -> SceneElement:
    """The element the body should face / reach: the first functional edge
    target, falling back to the bundle's first functional element."""
    for edge in graph.edges:
        if graph.role_of(edge.element) == "functional":
            return bundle.element(edge.element)
    for el in bundle.elements:
        if el.role == "functional":
            return el
    raise PlacementError("no functional element to target")


def choose_view(bundle: SceneBundle, element: SceneElement, view: str | None = None) -> str:
    """The initialization view: explicit choice, else the view where the
    element's bbox covers the largest pixel area."""
    if view is not None:
        if view not in bundle.views:
            raise InputError(f"view {view!r} not in bundle (has {sorted(bundle.views)})")
        if view not in element.bbox2d:
            raise InputError(f"element {element.id!r} not visible in view {view!r}")
        return view
    best, best_area = None, -1.0
    for key in bundle.views:
        if key not in element.bbox2d:
            continue
        x0, y0, x1, y1 = element.bbox2d[key]
        area = (x1 - x0 + 1) * (y1 - y0 + 1)
        if area > best_area:
            best, best_area = key, area
    if best is None:
        raise InputError(f"element {element.id!r} has no bbox in any view")
    return best


def find_floor(bundle: SceneBundle) -> SceneElement:
    """The supporting element named like a floor, else the lowest
    supporting element along the up axis."""
    supporting = [el for el in bundle.elements if el.role == "supporting"]
    if not supporting:
        raise PlacementError("no supporting element; cannot place the body")
    for el in supporting:
        if "floor" in el.label.lower() or "floor" in el.id.lower():
            return el
    up = -bundle.gravity_dir
    heights = [float(np.median(el.points.points @ up)) for el in supporting]
    return supporting[int(np.argmin(heights))]


def init_tpose(
    bundle: SceneBundle,
    element: SceneElement,
    skel: Skeleton,
    standoff: float = DEFAULT_STANDOFF,
    relaxed_hands: bool = True,
) -> BodyPose:
    """T-pose standing on the floor at ``standoff`` meters from the
    element centroid, yawed to face it, feet at floor height.

    The body approaches from the cameras' side (mean camera position),
    which keeps it between the sensors and the target.  Hands default to
    the relaxed curl (no hand estimate is available in this mode).
    """
    floor = find_floor(bundle)
    up = -bundle.gravity_dir
    target = element.points.points.mean(axis=0)
    floor_height = float(np.median(floor.points.points @ up))

    cam_mean = np.mean([v.camera.translation for v in bundle.views.values()], axis=0)
    approach = cam_mean - target
    approach = approach - (approach @ up) * up  # horizontal
    n = np.linalg.norm(approach)
    if n < 1e-9:
        approach = np.array([1.0, 0.0, 0.0]) - up[0] * up
        n = np.linalg.norm(approach)
    approach = approach / n

    forward = -approach  # face the element
    lateral = np.cross(up, forward)
    R = np.stack([forward, lateral, up], axis=1)  # body x->forward, z->up
    phi = matrix_to_axis_angle(R)

    pose0 = BodyPose.rest(skel).replace(phi=phi)
    if relaxed_hands:
        pose0 = pose0.replace(theta_hand=relaxed_hand_theta(skel))
    posed0 = forward_kinematics(skel, pose0)
    foot_heights = [
        part_samples(skel, posed0, part) @ up for part in ("left_foot", "right_foot")
    ]
    min_h = float(min(h.min() for h in foot_heights))

    horizontal = target + standoff * approach
    horizontal = horizontal - (horizontal @ up) * up
    r = horizontal + (floor_height - min_h) * up
    return pose0.replace(r=r)


def load_init_pose(path, skel: Skeleton) -> BodyPose:
    """Load and validate a world-frame BodyPose JSON file."""
    return load_pose(path, skel)


def _stage(name: str):
    """Decorator-free stage wrapper: re-raise toolkit errors tagged."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, SceneFitError):
                raise PipelineError(name, exc) from exc
            return False

    return _Ctx()


def run_pipeline(cfg: PipelineConfig) -> tuple:
    """Execute the full chain and write every artifact; returns
    (MetricsReport, {artifact name -> path})."""
    skel = cfg.skeleton or default_skeleton()
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = {}

    def out(name: str) -> str:
        paths[name] = os.path.join(cfg.out_dir, name)
        return paths[name]

    with _stage("reconstruct"):
        bundle = load_bundle(cfg.bundle_path, stride=cfg.stride, voxel=cfg.voxel)
        write_ply(out("scene.ply"), bundle.cloud)

    with _stage("reason"):
        element_hits = request_elements(cfg.reasoner, cfg.task_prompt)
        matched = match_elements(bundle.elements, element_hits)
        if not matched:
            log.warning("no scene element matched the reasoner labels; using all")
            matched = list(bundle.elements)
        req = ReasonerRequest(
            task_prompt=cfg.task_prompt,
            element_labels=tuple(describe_element(el) for el in matched),
        )
        graph = request_contact_graph(cfg.reasoner, req)
        violations = validate(graph, bundle.elements)
        if violations:
            raise GraphValidationError(
                f"reasoner graph inconsistent with scene: {violations}",
                violations=violations,
            )
        save_graph(out("graph.json"), graph)

    with _stage("init"):
        target = choose_functional_element(graph, bundle)
        if cfg.init_pose_path is not None:
            init = load_init_pose(cfg.init_pose_path, skel)
        else:
            init = init_tpose(bundle, target, skel, standoff=cfg.standoff)
        save_pose(out("pose_init.json"), init)

    with _stage("refine-graph"):
        view = choose_view(bundle, target, cfg.view)
        posed = forward_kinematics(skel, init)
        try:
            graph_star = refine_laterality(
                graph,
                posed,
                skel,
                bundle.views[view].camera,
                target,
                delta=cfg.delta_px,
                view=view,
            )
        except BehindCameraError as e:
            log.warning("laterality refinement skipped (%s); keeping graph", e)
            graph_star = graph
        save_graph(out("graph_refined.json"), graph_star)

    with _stage("optimize"):
        stages = cfg.build_stages(skel, bundle.gravity_dir)
        pose, trace = refine(
            skel,
            init,
            bundle.cloud,
            graph_star,
            bundle.elements,
            stages=stages,
            weights=cfg.weights,
            gravity_dir=bundle.gravity_dir,
        )
        save_pose(out("pose.json"), pose)
        trace.to_csv(out("trace.csv"))
        posed = forward_kinematics(skel, pose)
        write_obj(out("body.obj"), posed.capsules())

    with _stage("evaluate"):
        report = evaluate(skel, pose, bundle.cloud, bundle.elements, graph_star)
        report.save(out("report.json"), root=cfg.root_units)

    return report, paths


__all__ = [
    "PipelineConfig",
    "run_pipeline",
    "init_tpose",
    "load_init_pose",
    "choose_view",
    "choose_functional_element",
    "find_floor",
    "match_elements",
    "describe_element",
    "DEFAULT_STANDOFF",
    "MetricsReport",
    "OptimTrace",
]
