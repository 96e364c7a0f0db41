"""Two-stage gradient refinement of body parameters.

Stage 1 moves the body globally (translation, yaw about the gravity
axis) and articulates the arms so the hands reach the contact targets;
stage 2 unlocks the full joint set at a 5x smaller learning rate, adds
the pose prior, and emphasizes the ankles to stabilize foot-ground
contact.  Updates are Adam with bias correction, applied only to masked
parameters so frozen entries stay bit-identical; a one-shot step-size
safeguard halves the learning rate if the total loss ever jumps by more
than 10x (SDF kinks can do that to first-order methods).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .body import BodyPose, PoseGrad, Skeleton, fk_backward, forward_kinematics
from .contact import ContactGraph
from .errors import InputError, NumericError
from .geometry import PointCloud
from .losses import (
    LossBreakdown,
    LossWeights,
    _collision_forward,
    _collision_grad,
    _contact_forward,
    _contact_grad,
    _prior_grad,
    default_prior_weights,
    loss_prior,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

SAFEGUARD_FACTOR = 10.0  # loss jump that triggers the one-shot lr halving

DEFAULT_K1 = 400
DEFAULT_ETA1 = 1e-2
DEFAULT_K2 = 200
DEFAULT_ETA2 = DEFAULT_ETA1 / 5.0
ANKLE_LR_SCALE = 2.0  # stage-2 emphasis for stable foot-ground contact
ARM_LR_SCALE = 1.5  # stage-1 emphasis: arm swing must keep up with translation
ARM_HOLD_SCALE = 0.5  # stage-2 damping: the fine stage should not shake a held grip


def gravity_axis_index(gravity_dir) -> int:
    """Index of the phi component designated as the gravity-axis rotation
    (the dominant component of the gravity direction)."""
    return int(np.argmax(np.abs(np.asarray(gravity_dir, dtype=float))))


@dataclass(frozen=True)
class ParamMask:
    """Which pose parameters a stage (or a gradient query) treats as free."""

    r: bool = False
    phi: tuple = (False, False, False)  # per-component
    joints: frozenset = frozenset()  # joint names with free local rotations
    beta: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(bool(x) for x in self.phi))
        object.__setattr__(self, "joints", frozenset(self.joints))

    @classmethod
    def all_free(cls, skel: Skeleton) -> "ParamMask":
        return cls(
            r=True,
            phi=(True, True, True),
            joints=frozenset(skel.joint_names[1:]),
            beta=True,
        )

    def theta_body_rows(self, skel: Skeleton) -> np.ndarray:
        rows = np.zeros(skel.n_body_joints - 1, dtype=bool)
        for j, name in enumerate(skel.joint_names[1 : skel.n_body_joints]):
            rows[j] = name in self.joints
        return rows

    def theta_hand_rows(self, skel: Skeleton) -> np.ndarray:
        rows = np.zeros(skel.n_hand_joints, dtype=bool)
        for j, name in enumerate(skel.joint_names[skel.n_body_joints :]):
            rows[j] = name in self.joints
        return rows


def flatten_grad(skel: Skeleton, grad: PoseGrad, mask: ParamMask) -> np.ndarray:
    """Concatenate the masked gradient entries into one vector, in the
    fixed order r, phi, theta_body rows, theta_hand rows, beta."""
    parts = []
    if mask.r:
        parts.append(grad.r)
    phi_sel = np.asarray(mask.phi, dtype=bool)
    if phi_sel.any():
        parts.append(grad.phi[phi_sel])
    tb = mask.theta_body_rows(skel)
    if tb.any():
        parts.append(grad.theta_body[tb].ravel())
    th = mask.theta_hand_rows(skel)
    if th.any():
        parts.append(grad.theta_hand[th].ravel())
    if mask.beta:
        parts.append(grad.beta)
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def perturb_pose(
    skel: Skeleton, pose: BodyPose, mask: ParamMask, delta: np.ndarray
) -> BodyPose:
    """Pose with the masked parameter vector shifted by ``delta`` (the
    finite-difference counterpart of :func:`flatten_grad`)."""
    delta = np.asarray(delta, dtype=float)
    pos = 0
    r = pose.r.copy()
    phi = pose.phi.copy()
    tb = pose.theta_body.copy()
    th = pose.theta_hand.copy()
    beta = pose.beta.copy()
    if mask.r:
        r += delta[pos : pos + 3]
        pos += 3
    phi_sel = np.asarray(mask.phi, dtype=bool)
    n = int(phi_sel.sum())
    if n:
        phi[phi_sel] += delta[pos : pos + n]
        pos += n
    rows = mask.theta_body_rows(skel)
    n = int(rows.sum()) * 3
    if n:
        tb[rows] += delta[pos : pos + n].reshape(-1, 3)
        pos += n
    rows = mask.theta_hand_rows(skel)
    n = int(rows.sum()) * 3
    if n:
        th[rows] += delta[pos : pos + n].reshape(-1, 3)
        pos += n
    if mask.beta:
        beta += delta[pos : pos + len(beta)]
        pos += len(beta)
    if pos != len(delta):
        raise InputError(f"delta has {len(delta)} entries, mask consumes {pos}")
    return BodyPose(beta=beta, r=r, phi=phi, theta_body=tb, theta_hand=th)


def mask_size(skel: Skeleton, mask: ParamMask) -> int:
    n = 3 * mask.r + sum(mask.phi)
    n += 3 * int(mask.theta_body_rows(skel).sum())
    n += 3 * int(mask.theta_hand_rows(skel).sum())
    n += skel.n_joints * mask.beta
    return n


def total_loss_gradient(
    skel: Skeleton,
    pose: BodyPose,
    cloud: PointCloud,
    graph: ContactGraph,
    elements,
    weights: LossWeights,
    prior_weights: np.ndarray | None = None,
) -> tuple:
    """Loss breakdown plus the exact analytic gradient of the weighted
    total w.r.t. every pose parameter.

    Chamfer and SDF nearest-neighbor correspondences are held fixed at
    the evaluation point (the standard subgradient choice away from
    ties).  Raises NumericError on a non-finite loss.
    """
    if prior_weights is None:
        prior_weights = default_prior_weights(skel)
    posed = forward_kinematics(skel, pose)
    col, pen_idx, caps, us = _collision_forward(posed, cloud)
    con, per_edge = _contact_forward(skel, posed, graph.edges, elements)
    prior = loss_prior(pose, joint_weights=prior_weights)
    total = weights.lambda_col * col + weights.lambda_con * con + weights.lambda_prior * prior
    breakdown = LossBreakdown(col=col, con=con, prior=prior, total=total)
    if not breakdown.finite:
        raise NumericError(f"non-finite total loss: {breakdown}")

    grad_samples = None
    ge0 = ge1 = None
    if weights.lambda_con > 0:
        grad_samples = weights.lambda_con * _contact_grad(skel, posed, per_edge, elements)
    if weights.lambda_col > 0:
        ge0, ge1 = _collision_grad(posed, cloud, pen_idx, caps, us)
        ge0 *= weights.lambda_col
        ge1 *= weights.lambda_col
    grad = fk_backward(skel, pose, posed, grad_samples, ge0, ge1)
    if weights.lambda_prior > 0:
        grad.theta_body += weights.lambda_prior * _prior_grad(pose, joint_weights=prior_weights)
    return breakdown, grad


@dataclass(frozen=True)
class StageConfig:
    """One optimization stage: iteration count, learning rate, free
    parameters, and optional per-joint learning-rate multipliers."""

    iterations: int
    lr: float
    mask: ParamMask
    joint_lr_scale: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 0:
            raise InputError(f"iterations must be >= 0, got {self.iterations}")
        if not self.lr > 0:
            raise InputError(f"learning rate must be > 0, got {self.lr}")


def default_stages(skel: Skeleton, gravity_dir=(0.0, 0.0, -1.0)) -> tuple:
    """The two stages with paper-default schedules: K1=400 at lr 1e-2 over
    {r, gravity yaw, arm joints}, then K2=200 at lr/5 over {r, all joints}
    with doubled ankle learning rate."""
    g = gravity_axis_index(gravity_dir)
    phi_mask = tuple(i == g for i in range(3))
    stage1 = StageConfig(
        iterations=DEFAULT_K1,
        lr=DEFAULT_ETA1,
        mask=ParamMask(r=True, phi=phi_mask, joints=frozenset(skel.arm_joint_names())),
        joint_lr_scale={name: ARM_LR_SCALE for name in skel.arm_joint_names()},
    )
    scale2 = {name: ARM_HOLD_SCALE for name in skel.arm_joint_names()}
    scale2.update({name: ANKLE_LR_SCALE for name in skel.ankle_joint_names()})
    stage2 = StageConfig(
        iterations=DEFAULT_K2,
        lr=DEFAULT_ETA2,
        mask=ParamMask(r=True, joints=frozenset(skel.joint_names[1:])),
        joint_lr_scale=scale2,
    )
    return stage1, stage2


@dataclass
class TraceRow:
    iteration: int  # global, monotone across stages
    stage: int  # 1 or 2
    l_col: float
    l_con: float
    l_prior: float
    total: float
    safeguard: bool = False


@dataclass
class OptimTrace:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (iteration, BodyPose)
    aborted: str | None = None

    def stage_rows(self, stage: int) -> list:
        return [row for row in self.rows if row.stage == stage]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "stage", "l_col", "l_con", "l_prior", "total", "safeguard"])
            for row in self.rows:
                w.writerow(
                    [
                        row.iteration,
                        row.stage,
                        repr(row.l_col),
                        repr(row.l_con),
                        repr(row.l_prior),
                        repr(row.total),
                        int(row.safeguard),
                    ]
                )


class _Adam:
    """Plain Adam with bias correction over one parameter tensor; updates
    touch only masked entries so frozen values keep their exact bits."""

    def __init__(self, shape, mask, lr_scale=None):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.mask = mask
        self.lr_scale = np.ones(shape) if lr_scale is None else lr_scale

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        if not np.any(self.mask):
            return
        self.t += 1
        g = np.where(self.mask, grad, 0.0)
        self.m = ADAM_BETA1 * self.m + (1.0 - ADAM_BETA1) * g
        self.v = ADAM_BETA2 * self.v + (1.0 - ADAM_BETA2) * g * g
        m_hat = self.m / (1.0 - ADAM_BETA1**self.t)
        v_hat = self.v / (1.0 - ADAM_BETA2**self.t)
        update = lr * self.lr_scale * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        params[self.mask] = params[self.mask] - update[self.mask]


def _clamp_angles(rows: np.ndarray, mask_rows: np.ndarray) -> None:
    """Clamp free joint rotations to angle <= pi (wraparound guard)."""
    norms = np.linalg.norm(rows, axis=1)
    over = mask_rows & (norms > np.pi)
    if np.any(over):
        rows[over] *= (np.pi / norms[over])[:, None]


def refine(
    skel: Skeleton,
    init: BodyPose,
    cloud: PointCloud,
    graph: ContactGraph,
    elements,
    stages: tuple | None = None,
    weights: LossWeights | None = None,
    gravity_dir=(0.0, 0.0, -1.0),
    snapshot_every: int = 0,
) -> tuple:
    """Run the two-stage refinement from ``init``; returns the final pose
    and the per-iteration trace.

    The prior weight is forced to zero during stage 1 (the prior guards
    anatomical validity of the fine stage only).  Shape parameters and
    the non-gravity components of the root orientation are frozen
    throughout; a numeric blow-up aborts with the last finite pose and
    the partial trace.
    """
    if stages is None:
        stages = default_stages(skel, gravity_dir)
    if len(stages) != 2:
        raise InputError(f"refine expects exactly 2 stages, got {len(stages)}")
    if weights is None:
        weights = LossWeights()

    r = init.r.copy()
    phi = init.phi.copy()
    tb = init.theta_body.copy()
    th = init.theta_hand.copy()
    beta = init.beta  # frozen throughout, shared unchanged

    trace = OptimTrace()
    it = 0
    prev_params = None  # last parameters whose loss evaluated finite

    def current_pose() -> BodyPose:
        return BodyPose(beta=beta, r=r.copy(), phi=phi.copy(),
                        theta_body=tb.copy(), theta_hand=th.copy())

    for stage_no, stage in enumerate(stages, start=1):
        stage_weights = weights.replace(lambda_prior=0.0) if stage_no == 1 else weights
        tb_rows = stage.mask.theta_body_rows(skel)
        th_rows = stage.mask.theta_hand_rows(skel)
        tb_scale = np.ones((len(tb), 3))
        th_scale = np.ones((len(th), 3))
        for name, scale in stage.joint_lr_scale.items():
            j = skel.joint_index(name)
            if j == 0:
                continue
            if j < skel.n_body_joints:
                tb_scale[j - 1] = scale
            else:
                th_scale[j - skel.n_body_joints] = scale
        opt_r = _Adam(3, np.full(3, stage.mask.r))
        opt_phi = _Adam(3, np.asarray(stage.mask.phi, dtype=bool))
        opt_tb = _Adam(tb.shape, np.repeat(tb_rows[:, None], 3, axis=1), tb_scale)
        opt_th = _Adam(th.shape, np.repeat(th_rows[:, None], 3, axis=1), th_scale)

        lr = stage.lr
        safeguarded = False
        prev_total = None  # safeguard compares within-stage losses only

        for _ in range(stage.iterations):
            it += 1
            pose = current_pose()
            try:
                breakdown, grad = total_loss_gradient(
                    skel, pose, cloud, graph, elements, stage_weights
                )
                grad_finite = all(
                    np.all(np.isfinite(a))
                    for a in (grad.r, grad.phi, grad.theta_body, grad.theta_hand)
                )
                if not grad_finite:
                    raise NumericError("non-finite gradient")
            except NumericError as e:
                if prev_params is not None:
                    r, phi, tb, th = (a.copy() for a in prev_params)
                trace.aborted = f"stage {stage_no}, iteration {it}: {e}"
                return current_pose(), trace

            safeguard_hit = False
            if (
                not safeguarded
                and prev_total is not None
                and prev_total > 0
                and breakdown.total > SAFEGUARD_FACTOR * prev_total
            ):
                lr *= 0.5
                safeguarded = True
                safeguard_hit = True

            trace.rows.append(
                TraceRow(
                    iteration=it,
                    stage=stage_no,
                    l_col=breakdown.col,
                    l_con=breakdown.con,
                    l_prior=breakdown.prior,
                    total=breakdown.total,
                    safeguard=safeguard_hit,
                )
            )
            if snapshot_every and it % snapshot_every == 0:
                trace.snapshots.append((it, pose))

            prev_total = breakdown.total
            prev_params = (r.copy(), phi.copy(), tb.copy(), th.copy())

            opt_r.step(r, grad.r, lr)
            opt_phi.step(phi, grad.phi, lr)
            opt_tb.step(tb, grad.theta_body, lr)
            opt_th.step(th, grad.theta_hand, lr)
            _clamp_angles(tb, tb_rows)
            _clamp_angles(th, th_rows)

    return current_pose(), trace
