"""Unsupervised motion-corrected reconstruction for radial MRI.

Jointly fits an implicit neural image (multiresolution hash encoding plus
a small MLP, all gradients hand-derived) and one rigid-motion triplet per
view against undersampled radial k-space, using the Fourier-slice theorem
to move the data into the projection domain.  Ships a simulator, image
and motion metrics, a scikit-learn style estimator, self-check suites,
and a CLI (`radmoco`).
"""

from .checks import FscReport, GradCheckReport, run_fsc_check, run_gradcheck
from .estimator import RadialMocoReconstructor
from .geometry import (
    RAY_EXTENT,
    RHO_MAX,
    CanonicalGrid,
    MotionTimeline,
    MotionTriplet,
    Ray,
    bilinear_sample,
    build_ray,
    canonical_to_mm,
    compose_triplets,
    deg_to_rad,
    gauge_align,
    invert_triplet,
    mm_to_canonical,
    rad_to_deg,
    ray_sample_points,
    rigid_resample,
    rotation_matrix,
    rotation_matrix_derivative,
    spatial_transform,
)
from .hashgrid import HashGrid, HashGridConfig, MaskState, encode, update_masks
from .metrics import (
    EvalReport,
    evaluate,
    mean_motion_error,
    motion_l1,
    motion_sigma,
    psnr,
    ssim,
)
from .mlp import MlpParams, init_params, mlp_forward
from .projection import RayBatch, forward_batch, project_ray, render_image
from .runconfig import RunConfig, load_config, parse_config
from .simulate import (
    AcquisitionSpec,
    ProjectionSet,
    RadialKSpace,
    acquire,
    golden_angle_views,
    shepp_logan,
    simulate_dataset,
    simulate_motion_timeline,
    stage_assignment,
    undersample,
)
from .spectral import (
    ProjectionProfile,
    Spoke,
    direct_spoke,
    kspace_to_projection,
    profile_offsets,
    projection_to_kspace,
    spoke_frequencies,
)
from .training import (
    ModelState,
    TrainConfig,
    TrainResult,
    lambda_at,
    lr_at,
    motion_active_at,
    schedule_for_encoding,
    train,
    train_kspace_arm,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec",
    "CanonicalGrid",
    "EvalReport",
    "FscReport",
    "GradCheckReport",
    "HashGrid",
    "HashGridConfig",
    "MaskState",
    "MlpParams",
    "ModelState",
    "MotionTimeline",
    "MotionTriplet",
    "ProjectionProfile",
    "ProjectionSet",
    "RAY_EXTENT",
    "RHO_MAX",
    "RadialKSpace",
    "RadialMocoReconstructor",
    "Ray",
    "RayBatch",
    "RunConfig",
    "Spoke",
    "TrainConfig",
    "TrainResult",
    "acquire",
    "bilinear_sample",
    "build_ray",
    "canonical_to_mm",
    "compose_triplets",
    "deg_to_rad",
    "direct_spoke",
    "encode",
    "evaluate",
    "forward_batch",
    "gauge_align",
    "golden_angle_views",
    "init_params",
    "invert_triplet",
    "kspace_to_projection",
    "lambda_at",
    "load_config",
    "lr_at",
    "mean_motion_error",
    "mlp_forward",
    "mm_to_canonical",
    "motion_active_at",
    "motion_l1",
    "motion_sigma",
    "parse_config",
    "profile_offsets",
    "project_ray",
    "projection_to_kspace",
    "psnr",
    "rad_to_deg",
    "ray_sample_points",
    "render_image",
    "rigid_resample",
    "rotation_matrix",
    "rotation_matrix_derivative",
    "run_fsc_check",
    "run_gradcheck",
    "schedule_for_encoding",
    "shepp_logan",
    "simulate_dataset",
    "simulate_motion_timeline",
    "spatial_transform",
    "spoke_frequencies",
    "ssim",
    "stage_assignment",
    "train",
    "train_kspace_arm",
    "undersample",
    "update_masks",
]
