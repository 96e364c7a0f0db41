"""scenefit: training-free synthesis of functionally correct human-scene
contact from posed RGB-D views.

Given segmented RGB-D views and a task-level contact graph (from a
pluggable language-model client or offline fixtures), the toolkit places
a capsule-skeleton human into the reconstructed scene and refines its
pose with a two-stage, loss-driven optimization until the demanded
contacts hold without body-scene penetration, then scores the result
with contact/collision metrics.
"""

from .body import (
    CONTACT_VOCABULARY,
    HAND_PARTS,
    LATERALITY_SWAP_PARTS,
    PARTITION_PARTS,
    BodyPose,
    PosedBody,
    Skeleton,
    default_skeleton,
    forward_kinematics,
    load_pose,
    load_skeleton,
    mirror_part,
    part_samples,
    save_pose,
    sdf,
)
from .bundle import SceneBundle, load_bundle, save_bundle
from .contact import (
    ContactGraph,
    Edge,
    SceneNode,
    load_graph,
    refine_laterality,
    save_graph,
    swap_hand_nodes,
    validate,
)
from .errors import (
    BehindCameraError,
    EmptyElementError,
    GraphValidationError,
    InputError,
    NumericError,
    PipelineError,
    PlacementError,
    SceneFitError,
    SchemaError,
    TransportError,
    VocabularyError,
)
from .export import read_ply, write_obj, write_ply
from .geometry import (
    Camera,
    DepthImage,
    PointCloud,
    SceneElement,
    backproject,
    fuse,
    lift_mask,
    merge_elements,
    project,
)
from .losses import LossBreakdown, LossWeights, loss_col, loss_con, loss_prior, total_loss
from .metrics import MetricsReport, evaluate, fcd, ncs, nfcd
from .optim import (
    OptimTrace,
    ParamMask,
    StageConfig,
    default_stages,
    refine,
    total_loss_gradient,
)
from .pipeline import PipelineConfig, init_tpose, load_init_pose, run_pipeline
from .reasoner import (
    ReasonerConfig,
    ReasonerRequest,
    request_contact_graph,
    request_elements,
)

__version__ = "0.1.0"
