"""Joint optimization of image features, network weights, and motion triplets.

One Adam instance drives three parameter groups (hash tables, MLP, motion)
with a shared stepped-decay learning rate.  An "epoch" is one optimization
step over a batch of rays sampled uniformly without replacement from the
(view, rho-bin) pool.  The coarse-to-fine knob lambda ramps linearly over
the first part of training and then stays flat; hash levels above lambda
are masked and receive no updates (their Adam moments stay exactly zero).

Two data arms exist: the default projection arm fits profiles obtained by
`kspace_to_projection`, and the k-space comparison arm renders whole views,
converts them spoke-wise via `projection_to_kspace`, and takes the L1 loss
in k-space (gradient through the transform's adjoint).

The learned triplet parameterizes the ray-point transform
x~ = A(theta) x + tau, which is the inverse of the subject's motion; the
returned estimate is converted to subject-motion convention so it compares
directly against simulator ground truth.  By default one triplet is learned
per motion stage (views in a stage share a pose under the quasi-static
model, so their ray gradients accumulate into one parameter row); setting
motion_granularity="view" learns an independent triplet per view instead.
Either way the reported estimate carries one triplet per view.

Pose updates run only during the first motion_fit_fraction of the budget
(by default the same half over which lambda ramps).  Rigid alignment is a
coarse-scale problem: once the finest levels unlock, pose gradients are
dominated by detail that the network co-adapts to whatever pose error
exists, so continued joint updates make the poses drift instead of
converge.  Holding them lets the image sharpen on a consistent geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import MotionTimeline, invert_triplet
from .hashgrid import HashGrid, HashGridConfig, MaskState, update_masks
from .mlp import MlpParams, init_params
from .projection import RayBatch, backward_batch, forward_batch
from .simulate import ProjectionSet, RadialKSpace
from .spectral import (
    ProjectionProfile,
    Spoke,
    kspace_to_projection,
    profile_offsets,
    projection_to_kspace,
    projection_to_kspace_adjoint,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters.

    An epoch is one step of `rays_per_step` rays.  lambda_end is clamped to
    the hash level count when masks are built.  motion_fit_fraction is the
    share of epochs during which motion triplets update (1.0 keeps joint
    updates for the whole run); see the module docstring for why the
    default stops pose search when the resolution ramp completes.
    """

    epochs: int = 4000
    rays_per_step: int = 80
    lr0: float = 1e-3
    lr_halving_period: int = 1000
    lambda_start: float = 4.0
    lambda_end: float = 16.0
    lambda_ramp_fraction: float = 0.5
    seed: int = 0
    forward_arm: str = "projection"
    motion_enabled: bool = True
    motion_granularity: str = "stage"
    motion_fit_fraction: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.rays_per_step < 1:
            raise ValueError("rays_per_step must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.lr_halving_period < 1:
            raise ValueError("lr_halving_period must be >= 1")
        if self.lambda_start > self.lambda_end:
            raise ValueError("lambda_start must be <= lambda_end")
        if not 0.0 <= self.lambda_ramp_fraction <= 1.0:
            raise ValueError("lambda_ramp_fraction must lie in [0, 1]")
        if self.forward_arm not in ("projection", "kspace"):
            raise ValueError(f"unknown forward_arm {self.forward_arm!r}")
        if self.motion_granularity not in ("stage", "view"):
            raise ValueError(
                f"unknown motion_granularity {self.motion_granularity!r}"
            )
        if not 0.0 <= self.motion_fit_fraction <= 1.0:
            raise ValueError("motion_fit_fraction must lie in [0, 1]")


COARSE_LAMBDA = 6.0  # fixed level cap of the single-resolution "coarse" arm

ENCODINGS = ("coarse2fine", "fine", "coarse")


def schedule_for_encoding(config: TrainConfig, encoding: str, levels: int) -> TrainConfig:
    """Map an encoding arm name onto the lambda schedule.

    coarse2fine keeps the configured ramp; fine pins lambda to the full
    level count; coarse pins it to COARSE_LAMBDA (clamped to the level
    count).  Pinning sets lambda_start = lambda_end, making the schedule
    constant regardless of the ramp fraction.
    """
    if encoding == "coarse2fine":
        return config
    if encoding == "fine":
        lam = float(levels)
    elif encoding == "coarse":
        lam = min(COARSE_LAMBDA, float(levels))
    else:
        raise ValueError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    return replace(config, lambda_start=lam, lambda_end=lam)


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Stepped decay: lr0 * 0.5^floor(epoch / halving period)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return config.lr0 * 0.5 ** (epoch // config.lr_halving_period)


def motion_active_at(epoch: int, config: TrainConfig) -> bool:
    """Whether motion triplets update at this epoch (the pose-search window)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return bool(
        config.motion_enabled
        and epoch < config.motion_fit_fraction * config.epochs
    )


def lambda_at(epoch: int, config: TrainConfig, levels: int | None = None) -> float:
    """Linear coarse-to-fine ramp, flat after lambda_ramp_fraction of epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    lam_end = config.lambda_end if levels is None else min(config.lambda_end, levels)
    lam_start = min(config.lambda_start, lam_end)
    ramp = config.lambda_ramp_fraction * config.epochs
    if ramp <= 0:
        return float(lam_end)
    t = min(1.0, epoch / ramp)
    return float(lam_start + (lam_end - lam_start) * t)


@dataclass
class AdamState:
    """First/second moment accumulators (mirroring the parameter arrays) and step count."""

    m: list
    v: list
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: list) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list, grads: list, lr: float, active=None) -> list:
    """One bias-corrected Adam update, in place, group by group.

    `active` optionally flags groups to update this step; skipped groups
    keep their parameters and moments untouched (exact, since a skipped
    group's gradient is zero by construction wherever this is used).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and moments must have equal group counts")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    c1 = bc1 / np.sqrt(bc2)
    c2 = bc1 * state.eps
    for i, (p, g) in enumerate(zip(params, grads)):
        if active is not None and not active[i]:
            continue
        if p.shape != g.shape:
            raise ValueError(f"group {i}: gradient shape {g.shape} != parameter shape {p.shape}")
        m, v = state.m[i], state.v[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        # p -= lr * mhat / (sqrt(vhat) + eps), folded to one pass over v:
        # mhat/(sqrt(vhat)+eps) = m / (c1*sqrt(v) + c2)
        denom = np.sqrt(v)
        denom *= c1
        denom += c2
        p -= lr * (m / denom)
    return params


@dataclass
class ModelState:
    """Everything the reconstruction needs to be rendered or resumed."""

    grid: HashGrid
    masks: MaskState
    mlp: MlpParams
    motion_raw: np.ndarray  # (n_views, 3) ray-transform triplets
    step: int
    config: TrainConfig
    hash_config: HashGridConfig


@dataclass
class TrainResult:
    state: ModelState
    motion: MotionTimeline  # subject-motion convention estimate
    history: list  # (epoch, loss, lr, lam) tuples


def to_projection_set(dataset: RadialKSpace) -> ProjectionSet:
    """Convert acquired spokes to projection profiles, view by view."""
    profiles = np.empty_like(dataset.spokes)
    for i in range(dataset.n_views):
        profiles[i] = kspace_to_projection(
            Spoke(float(dataset.angles[i]), dataset.spokes[i])
        ).samples
    return ProjectionSet(
        angles=dataset.angles.copy(),
        stage_ids=dataset.stage_ids.copy(),
        profiles=profiles,
        fov_mm=dataset.fov_mm,
        image_shape=dataset.image_shape,
        gt_motion=dataset.gt_motion.copy() if dataset.gt_motion is not None else None,
    )


def _timeline_view(motion_raw: np.ndarray, stage_ids: np.ndarray) -> MotionTimeline:
    return MotionTimeline(motion_raw[:, 0], motion_raw[:, 1:], stage_ids)


def reported_motion(motion_raw: np.ndarray, stage_ids: np.ndarray) -> MotionTimeline:
    """Convert raw ray-transform triplets to the subject-motion estimate."""
    n = motion_raw.shape[0]
    rot = np.empty(n)
    shifts = np.empty((n, 2))
    internal = _timeline_view(motion_raw, stage_ids)
    for i in range(n):
        inv = invert_triplet(internal.triplet(i))
        rot[i] = inv.rotation
        shifts[i] = (inv.shift_x, inv.shift_y)
    return MotionTimeline(rot, shifts, stage_ids.copy())


def train(
    dataset,
    config: TrainConfig,
    hash_config: HashGridConfig | None = None,
    mlp_width: int = 128,
) -> TrainResult:
    """Run the joint optimization loop.

    Parameters
    ----------
    dataset : RadialKSpace or ProjectionSet
        k-space input is converted per view for the projection arm; the
        k-space arm compares against the spokes themselves.
    config : TrainConfig
    hash_config : HashGridConfig, optional
    mlp_width : int

    Returns
    -------
    TrainResult
        Final model state, the motion estimate in subject-motion convention
        (zeros when motion_enabled is false), and per-epoch log records
        (epoch, loss, lr, lambda).
    """
    if hash_config is None:
        hash_config = HashGridConfig()
    if isinstance(dataset, RadialKSpace):
        kspace = dataset
        profiles = to_projection_set(dataset)
    elif isinstance(dataset, ProjectionSet):
        kspace = None
        profiles = dataset
    else:
        raise TypeError(f"unsupported dataset type {type(dataset).__name__}")
    n, m = profiles.n_views, profiles.m
    if n < 1:
        raise ValueError("dataset has no views")

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    grid = HashGrid.init(hash_config, seeds[0])
    params = init_params(seeds[1], hash_config.output_dim, mlp_width)
    if config.motion_granularity == "stage":
        _, group_of_view = np.unique(profiles.stage_ids, return_inverse=True)
    else:
        group_of_view = np.arange(n)
    motion_raw = np.zeros((int(group_of_view.max()) + 1, 3))
    batch_rng = np.random.default_rng(seeds[2])

    groups = list(grid.tables) + params.arrays() + [motion_raw]
    n_tables = len(grid.tables)
    adam = AdamState.for_params(groups)
    masks = MaskState.for_lambda(
        hash_config, lambda_at(0, config, hash_config.levels)
    )
    rho = profile_offsets(m)
    measured = profiles.profiles
    if config.forward_arm == "kspace":
        if kspace is not None:
            spokes = kspace.spokes
        else:
            spokes = np.empty_like(profiles.profiles)
            for i in range(n):
                spokes[i] = projection_to_kspace(
                    ProjectionProfile(float(profiles.angles[i]), profiles.profiles[i])
                ).samples
        views_per_step = max(1, int(np.ceil(config.rays_per_step / m)))

    history = []
    pool = n * m
    rays = min(config.rays_per_step, pool)
    for epoch in range(config.epochs):
        lam = lambda_at(epoch, config, hash_config.levels)
        if lam != masks.lam:
            masks = update_masks(masks, lam)
        lr = lr_at(epoch, config)
        if config.forward_arm == "projection":
            sel = batch_rng.choice(pool, size=rays, replace=False)
            vi = sel // m
            pi = sel - vi * m
            batch = RayBatch(
                view_indices=vi,
                angles=profiles.angles[vi],
                offsets=rho[pi],
                n_samples=m,
                measured=measured[vi, pi],
            )
            grads = backward_batch(
                batch,
                _timeline_view(motion_raw[group_of_view], profiles.stage_ids),
                grid,
                masks,
                params,
            )
            loss_val = grads.loss
        else:
            vsel = np.sort(
                batch_rng.choice(n, size=min(views_per_step, n), replace=False)
            )
            vi = np.repeat(vsel, m)
            pi = np.tile(np.arange(m), vsel.size)
            batch = RayBatch(
                view_indices=vi,
                angles=profiles.angles[vi],
                offsets=rho[pi],
                n_samples=m,
                measured=measured[vi, pi],
            )
            timeline = _timeline_view(motion_raw[group_of_view], profiles.stage_ids)
            pred = forward_batch(batch, timeline, grid, masks, params)
            upstream = np.empty_like(pred)
            loss_val = 0.0
            for j, v in enumerate(vsel):
                khat = projection_to_kspace(
                    ProjectionProfile(float(profiles.angles[v]), pred[j * m:(j + 1) * m])
                ).samples
                diff = khat - spokes[v]
                loss_val += float(
                    np.sum(np.abs(diff.real)) + np.sum(np.abs(diff.imag))
                )
                sgn = np.sign(diff.real) + 1j * np.sign(diff.imag)
                upstream[j * m:(j + 1) * m] = projection_to_kspace_adjoint(sgn, m)
            grads = backward_batch(batch, timeline, grid, masks, params, upstream=upstream)

        if config.motion_granularity == "stage":
            motion_grad = np.zeros_like(motion_raw)
            np.add.at(motion_grad, group_of_view, grads.motion)
        else:
            motion_grad = grads.motion
        grad_groups = list(grads.tables) + grads.mlp.arrays() + [motion_grad]
        active = list(masks.active_levels()) + [True] * 4 + [
            motion_active_at(epoch, config)
        ]
        adam_step(adam, groups, grad_groups, lr, active=active)
        history.append((epoch, loss_val, lr, lam))
        if not np.isfinite(loss_val):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")

    view_raw = motion_raw[group_of_view]
    state = ModelState(
        grid=grid,
        masks=masks,
        mlp=params,
        motion_raw=view_raw,
        step=config.epochs,
        config=config,
        hash_config=hash_config,
    )
    motion = reported_motion(view_raw, profiles.stage_ids)
    return TrainResult(state=state, motion=motion, history=history)


def train_kspace_arm(
    dataset,
    config: TrainConfig,
    hash_config: HashGridConfig | None = None,
    mlp_width: int = 128,
) -> TrainResult:
    """`train` with the k-space comparison arm forced on."""
    return train(dataset, replace(config, forward_arm="kspace"), hash_config, mlp_width)
