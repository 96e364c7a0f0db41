"""Command-line interface.

Subcommands mirror the pipeline stages so each one is independently
runnable and testable:

    scenefit reconstruct BUNDLE --out DIR
    scenefit reason      BUNDLE --task "..." --reasoner fixture:f.json --out DIR
    scenefit init        BUNDLE --graph g.json --out DIR [--init-pose p.json]
    scenefit optimize    BUNDLE --graph g.json --init-pose p.json --out DIR
    scenefit evaluate    BUNDLE --graph g.json --pose p.json --out DIR [--root]
    scenefit pipeline    BUNDLE --task "..." --reasoner ... --out DIR

``--reasoner`` takes either ``fixture:<path>`` or an http(s) endpoint
URL; a remote endpoint reads its API key from $SCENEFIT_REASONER_KEY.
``--config FILE`` (JSON, or TOML on Python 3.11+ / with tomli) supplies
values that override the corresponding flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .body import default_skeleton, forward_kinematics, load_skeleton, save_pose
from .bundle import load_bundle
from .contact import load_graph, refine_laterality, save_graph, validate
from .errors import BehindCameraError, PipelineError, SceneFitError
from .export import write_obj, write_ply
from .geometry import DEFAULT_VOXEL
from .losses import LossWeights
from .metrics import evaluate
from .optim import StageConfig, default_stages, refine
from .pipeline import (
    DEFAULT_STANDOFF,
    PipelineConfig,
    choose_functional_element,
    choose_view,
    init_tpose,
    load_init_pose,
    run_pipeline,
)
from .reasoner import (
    ReasonerConfig,
    ReasonerRequest,
    request_contact_graph,
    request_elements,
)

log = logging.getLogger(__name__)


def parse_reasoner_flag(value: str) -> ReasonerConfig:
    if value.startswith("fixture:"):
        return ReasonerConfig(mode="fixture", fixture_path=value[len("fixture:"):])
    if value.startswith(("http://", "https://")):
        return ReasonerConfig(mode="remote", endpoint=value)
    raise SceneFitError(
        f"--reasoner must be fixture:<path> or an http(s) URL, got {value!r}"
    )


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib as toml  # Python >= 3.11
        except ImportError:
            import tomli as toml
        with open(path, "rb") as f:
            return toml.load(f)
    with open(path) as f:
        return json.load(f)


def _apply_config_file(args: argparse.Namespace) -> None:
    """Config file values override flags (flags act as defaults)."""
    if not getattr(args, "config", None):
        return
    overrides = _load_config_file(args.config)
    for key, value in overrides.items():
        key = key.replace("-", "_")
        if hasattr(args, key):
            setattr(args, key, value)
        else:
            log.warning("config file key %r does not match any option", key)


def _weights(args) -> LossWeights:
    return LossWeights(
        lambda_col=args.lambda_col,
        lambda_con=args.lambda_con,
        lambda_prior=args.lambda_prior,
    )


def _stages(args, skel, gravity):
    s1, s2 = default_stages(skel, gravity)
    s1 = StageConfig(iterations=args.k1, lr=args.eta1, mask=s1.mask,
                     joint_lr_scale=s1.joint_lr_scale)
    eta2 = args.eta2 if args.eta2 is not None else args.eta1 / 5.0
    s2 = StageConfig(iterations=args.k2, lr=eta2, mask=s2.mask,
                     joint_lr_scale=s2.joint_lr_scale)
    return s1, s2


def _skeleton(args):
    return load_skeleton(args.skeleton) if args.skeleton else default_skeleton()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("bundle", help="scene bundle directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON/TOML config file; overrides flags")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--voxel", type=float, default=DEFAULT_VOXEL)
    p.add_argument("--skeleton", help="skeleton asset JSON (default: packaged)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_optim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=int, default=400)
    p.add_argument("--eta1", type=float, default=1e-2)
    p.add_argument("--k2", type=int, default=200)
    p.add_argument("--eta2", type=float, default=None, help="default eta1/5")
    p.add_argument("--lambda-col", type=float, default=1.0, dest="lambda_col")
    p.add_argument("--lambda-con", type=float, default=1.0, dest="lambda_con")
    p.add_argument("--lambda-prior", type=float, default=0.05, dest="lambda_prior")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenefit", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="fuse the scene cloud and export PLY")
    _add_common(p)

    p = sub.add_parser("reason", help="query the reasoner for a contact graph")
    _add_common(p)
    p.add_argument("--task", required=True)
    p.add_argument("--reasoner", required=True, help="fixture:<path> or endpoint URL")

    p = sub.add_parser("init", help="initialize the body pose")
    _add_common(p)
    p.add_argument("--graph", required=True, help="contact graph JSON")
    p.add_argument("--init-pose", dest="init_pose", help="pose JSON (default: T-pose placement)")
    p.add_argument("--standoff", type=float, default=DEFAULT_STANDOFF)

    p = sub.add_parser("optimize", help="laterality refinement + two-stage optimization")
    _add_common(p)
    _add_optim_flags(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--init-pose", dest="init_pose", required=True)
    p.add_argument("--view", help="view key for laterality (default: largest bbox)")
    p.add_argument("--delta-px", dest="delta_px", type=float, default=None)

    p = sub.add_parser("evaluate", help="compute NCS / N-FCD / FCD")
    _add_common(p)
    p.add_argument("--graph", required=True, help="refined contact graph JSON")
    p.add_argument("--pose", required=True)
    p.add_argument("--root", action="store_true", help="report meters instead of m^2")

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_common(p)
    _add_optim_flags(p)
    p.add_argument("--task", required=True)
    p.add_argument("--reasoner", required=True)
    p.add_argument("--init-pose", dest="init_pose")
    p.add_argument("--standoff", type=float, default=DEFAULT_STANDOFF)
    p.add_argument("--view")
    p.add_argument("--delta-px", dest="delta_px", type=float, default=None)
    p.add_argument("--root", action="store_true")
    return ap


def _cmd_reconstruct(args) -> int:
    bundle = load_bundle(args.bundle, stride=args.stride, voxel=args.voxel)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "scene.ply")
    write_ply(path, bundle.cloud)
    for el in bundle.elements:
        write_ply(os.path.join(args.out, f"element_{el.id}.ply"), el.points)
    print(f"scene: {len(bundle.cloud)} points, {len(bundle.elements)} elements -> {path}")
    return 0


def _cmd_reason(args) -> int:
    from .pipeline import describe_element, match_elements

    bundle = load_bundle(args.bundle, stride=args.stride, voxel=args.voxel)
    reasoner = parse_reasoner_flag(args.reasoner)
    hits = request_elements(reasoner, args.task)
    matched = match_elements(bundle.elements, hits) or list(bundle.elements)
    req = ReasonerRequest(
        task_prompt=args.task,
        element_labels=tuple(describe_element(el) for el in matched),
    )
    graph = request_contact_graph(reasoner, req)
    violations = validate(graph, bundle.elements)
    if violations:
        print("graph violations:", *violations, sep="\n  ", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "graph.json")
    save_graph(path, graph)
    print(f"contact graph: {len(graph.edges)} edges -> {path}")
    return 0


def _cmd_init(args) -> int:
    skel = _skeleton(args)
    bundle = load_bundle(args.bundle, stride=args.stride, voxel=args.voxel)
    graph = load_graph(args.graph)
    if args.init_pose:
        pose = load_init_pose(args.init_pose, skel)
    else:
        target = choose_functional_element(graph, bundle)
        pose = init_tpose(bundle, target, skel, standoff=args.standoff)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "pose_init.json")
    save_pose(path, pose)
    print(f"initial pose -> {path}")
    return 0


def _cmd_optimize(args) -> int:
    skel = _skeleton(args)
    bundle = load_bundle(args.bundle, stride=args.stride, voxel=args.voxel)
    graph = load_graph(args.graph)
    init = load_init_pose(args.init_pose, skel)
    target = choose_functional_element(graph, bundle)
    view = choose_view(bundle, target, args.view)
    posed = forward_kinematics(skel, init)
    try:
        graph_star = refine_laterality(
            graph, posed, skel, bundle.views[view].camera, target,
            delta=args.delta_px, view=view,
        )
    except BehindCameraError as e:
        log.warning("laterality refinement skipped (%s)", e)
        graph_star = graph
    stages = _stages(args, skel, bundle.gravity_dir)
    pose, trace = refine(
        skel, init, bundle.cloud, graph_star, bundle.elements,
        stages=stages, weights=_weights(args), gravity_dir=bundle.gravity_dir,
    )
    os.makedirs(args.out, exist_ok=True)
    save_graph(os.path.join(args.out, "graph_refined.json"), graph_star)
    save_pose(os.path.join(args.out, "pose.json"), pose)
    trace.to_csv(os.path.join(args.out, "trace.csv"))
    write_obj(os.path.join(args.out, "body.obj"),
              forward_kinematics(skel, pose).capsules())
    if trace.aborted:
        print(f"optimization aborted: {trace.aborted}", file=sys.stderr)
        return 1
    last = trace.rows[-1] if trace.rows else None
    if last:
        print(f"final losses: col={last.l_col:.3e} con={last.l_con:.3e} "
              f"prior={last.l_prior:.3e} total={last.total:.3e}")
    print(f"refined pose -> {os.path.join(args.out, 'pose.json')}")
    return 0


def _cmd_evaluate(args) -> int:
    skel = _skeleton(args)
    bundle = load_bundle(args.bundle, stride=args.stride, voxel=args.voxel)
    graph = load_graph(args.graph)
    pose = load_init_pose(args.pose, skel)
    report = evaluate(skel, pose, bundle.cloud, bundle.elements, graph)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "report.json")
    report.save(path, root=args.root)
    unit = "m" if args.root else "m^2"

    def fmt(v):
        if v is None:
            return "n/a"
        return f"{(v ** 0.5 if args.root else v):.6f}"

    print(f"{'metric':<8} value")
    print(f"{'ncs':<8} {report.ncs:.4f}")
    print(f"{'nfcd':<8} {fmt(report.nfcd)} {unit}")
    print(f"{'fcd':<8} {fmt(report.fcd)} {unit}")
    print(f"report -> {path}")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = PipelineConfig(
        bundle_path=args.bundle,
        task_prompt=args.task,
        reasoner=parse_reasoner_flag(args.reasoner),
        out_dir=args.out,
        init_pose_path=args.init_pose,
        standoff=args.standoff,
        k1=args.k1,
        eta1=args.eta1,
        k2=args.k2,
        eta2=args.eta2,
        weights=_weights(args),
        seed=args.seed,
        view=args.view,
        stride=args.stride,
        voxel=args.voxel,
        skeleton=_skeleton(args),
        delta_px=args.delta_px,
        root_units=args.root,
    )
    report, paths = run_pipeline(cfg)
    print(f"ncs={report.ncs:.4f} nfcd={report.nfcd} fcd={report.fcd}")
    for name in sorted(paths):
        print(f"  {name}: {paths[name]}")
    return 0


_COMMANDS = {
    "reconstruct": _cmd_reconstruct,
    "reason": _cmd_reason,
    "init": _cmd_init,
    "optimize": _cmd_optimize,
    "evaluate": _cmd_evaluate,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    _apply_config_file(args)
    try:
        return _COMMANDS[args.command](args)
    except PipelineError as e:
        print(f"error {e}", file=sys.stderr)
        return 2
    except SceneFitError as e:
        print(f"error [{args.command}] {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
