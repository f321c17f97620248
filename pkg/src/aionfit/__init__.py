"""aionfit: age-inclusive body-model fitting to 2D keypoint tracks.

Core pieces: a dual-template body model (adult/child blend), perspective
camera geometry, the two-stage robust fitting objective and driver,
evaluation metrics, versioned file formats, and a service/CLI front end.
"""

__version__ = "0.1.0"

from .body_model import (
    BodyModelData,
    MeshResult,
    PoseParams,
    ShapeParams,
    forward,
    interpolate_template,
    neutral_height,
    shape_offset,
    world_joints,
)
from .camera import (
    CameraIntrinsics,
    CameraPose,
    CameraTrack,
    init_world_from_camera,
    project,
    world_point_to_camera,
)
from .fitter import FitConfig, FitReport, fit, init_tracks, stage1, stage2
from .keypoints import COCO17, JointMap, KeypointFrame, KeypointTrack
from .lbfgs import LbfgsOptions, LbfgsResult, lbfgs_minimize
from .metrics import ahd, aphd, kp_l1_2d, kp_l1_3d, mpjpe, param_l2, pck
from .objective import (
    PosePrior,
    RobustLossConfig,
    StageWeights,
    e_beta,
    e_data,
    e_pose,
    e_smooth,
    geman_mcclure,
    total_objective,
)
from .state import PersonState
