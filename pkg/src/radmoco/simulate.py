"""Synthetic radial acquisition: phantom, golden-angle views, staged motion.

The simulator produces rigid-motion-corrupted, optionally undersampled
radial k-space from a complex phantom.  Motion is quasi-static: views are
split into contiguous acquisition-order stages, each stage holds one pose
drawn uniformly from +-beta (degrees for rotation, millimeters for shift),
and stage 1 is pinned to the identity so simulated data has a gauge anchor.
Every spoke is acquired from the moved image f(A(-theta)(x - tau)) by the
brute-force Fourier sum, so acquisition contains no inverse-crime shortcut
through the reconstruction code path.

Randomness uses numpy's counter-based Philox generator keyed by the seed,
so draws are reproducible bit-for-bit regardless of how the work is split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CanonicalGrid,
    MotionTimeline,
    MotionTriplet,
    mm_to_canonical,
    rigid_resample,
)
from .spectral import default_spoke_length, direct_spoke

GOLDEN_ANGLE = np.pi * (np.sqrt(5.0) - 1.0) / 2.0  # 111.2461 degrees

# Ten ellipses: (additive intensity, semi-axis a, semi-axis b, x0, y0, tilt deg).
# Standard head phantom geometry with the modified (high-contrast) intensities,
# which keep the summed magnitude inside [0, 1].
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)

# Fixed low-order polynomial phase (radians) for phase_mode="smooth".
_PHASE_COEFFS = (0.3, 0.8, -0.5, 0.4, 0.25, -0.35)


@dataclass(frozen=True)
class AcquisitionSpec:
    """Everything needed to simulate one dataset.

    Attributes
    ----------
    image_size : int
        Phantom height = width in pixels.
    n_views : int
        Full (pre-undersampling) golden-angle view count.
    n_stages : int
        Quasi-static motion stages over the full view set.
    beta : float
        Motion range: rotations uniform in +-beta degrees, shifts uniform
        in +-beta millimeters per axis.
    af : int
        Acceleration factor; the first ceil(n_views / af) views are kept.
    seed : int
        Philox key for the motion draws.
    fov_mm : float
        Field of view in millimeters (the canonical square spans it).
    spoke_len : int
        Odd samples per spoke; 0 selects the default
        (smallest odd >= sqrt(2) * image_size).
    phase_mode : str
        "none" (real phantom) or "smooth" (fixed low-order polynomial phase).
    noise_std : float
        Std of complex white noise added to each spoke sample (0 = off).
    """

    image_size: int = 64
    n_views: int = 120
    n_stages: int = 6
    beta: float = 5.0
    af: int = 2
    seed: int = 0
    fov_mm: float = 0.0  # 0 -> image_size (1 mm per pixel)
    spoke_len: int = 0
    phase_mode: str = "none"
    noise_std: float = 0.0

    def __post_init__(self):
        if self.image_size < 2:
            raise ValueError("image_size must be >= 2")
        if self.n_views < 1:
            raise ValueError("n_views must be >= 1")
        if not 1 <= self.n_stages <= self.n_views:
            raise ValueError("n_stages must be in 1..n_views")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.af < 1:
            raise ValueError("af must be >= 1")
        if self.spoke_len and (self.spoke_len % 2 == 0 or self.spoke_len < 3):
            raise ValueError("spoke_len must be odd and >= 3 (or 0 for default)")
        if self.phase_mode not in ("none", "smooth"):
            raise ValueError(f"unknown phase_mode {self.phase_mode!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def resolved_fov_mm(self) -> float:
        return float(self.fov_mm) if self.fov_mm else float(self.image_size)

    @property
    def resolved_spoke_len(self) -> int:
        return self.spoke_len or default_spoke_length(self.image_size)


@dataclass
class RadialKSpace:
    """Acquired spokes plus acquisition metadata.

    spokes[i] holds the m centered frequency samples of view i at angle
    angles[i]; stage_ids[i] is the motion stage the view was acquired in.
    gt_motion carries the simulator's ground-truth timeline when known.
    """

    angles: np.ndarray  # (n,)
    stage_ids: np.ndarray  # (n,) int
    spokes: np.ndarray  # (n, m) complex128
    fov_mm: float
    image_shape: tuple
    gt_motion: MotionTimeline | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.stage_ids = np.asarray(self.stage_ids, dtype=np.int64)
        self.spokes = np.asarray(self.spokes, dtype=np.complex128)
        n = self.angles.shape[0]
        if self.spokes.shape[0] != n or self.stage_ids.shape != (n,):
            raise ValueError("angles, stage_ids, spokes must agree on view count")
        if self.spokes.shape[1] % 2 == 0:
            raise ValueError("spoke length must be odd")

    @property
    def n_views(self) -> int:
        return int(self.angles.shape[0])

    @property
    def m(self) -> int:
        return int(self.spokes.shape[1])


@dataclass
class ProjectionSet:
    """Projection-domain counterpart of RadialKSpace (same layout)."""

    angles: np.ndarray
    stage_ids: np.ndarray
    profiles: np.ndarray  # (n, m) complex128
    fov_mm: float
    image_shape: tuple
    gt_motion: MotionTimeline | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.stage_ids = np.asarray(self.stage_ids, dtype=np.int64)
        self.profiles = np.asarray(self.profiles, dtype=np.complex128)
        n = self.angles.shape[0]
        if self.profiles.shape[0] != n or self.stage_ids.shape != (n,):
            raise ValueError("angles, stage_ids, profiles must agree on view count")

    @property
    def n_views(self) -> int:
        return int(self.angles.shape[0])

    @property
    def m(self) -> int:
        return int(self.profiles.shape[1])


def shepp_logan(height: int, width: int, phase_mode: str = "none") -> np.ndarray:
    """Ten-ellipse head phantom on the canonical grid, complex-valued.

    Ellipse intensities are additive where ellipses overlap; the magnitude
    lies in [0, 1].  With phase_mode="smooth" a fixed low-order polynomial
    phase is applied (magnitude unchanged); "none" returns zero phase.

    Returns
    -------
    ndarray (height, width) complex128
    """
    if phase_mode not in ("none", "smooth"):
        raise ValueError(f"unknown phase_mode {phase_mode!r}")
    grid = CanonicalGrid(height, width)
    xx, yy = np.meshgrid(grid.xs(), grid.ys())
    mag = np.zeros((height, width))
    for inten, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        c, s = np.cos(phi), np.sin(phi)
        xr = (xx - x0) * c + (yy - y0) * s
        yr = -(xx - x0) * s + (yy - y0) * c
        mag[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += inten
    if phase_mode == "none":
        return mag.astype(np.complex128)
    c0, c1, c2, c3, c4, c5 = _PHASE_COEFFS
    phase = c0 + c1 * xx + c2 * yy + c3 * xx * yy + c4 * xx**2 + c5 * yy**2
    return mag * np.exp(1j * phase)


def golden_angle_views(n: int) -> np.ndarray:
    """View angles theta_i = (i * GOLDEN_ANGLE) mod 2 pi, i = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.mod(np.arange(n) * GOLDEN_ANGLE, 2.0 * np.pi)


def stage_assignment(n_views: int, n_stages: int) -> np.ndarray:
    """Contiguous stage blocks (1-based ids); the last stage absorbs the remainder."""
    if not 1 <= n_stages <= n_views:
        raise ValueError("n_stages must be in 1..n_views")
    block = n_views // n_stages
    ids = np.minimum(np.arange(n_views) // block, n_stages - 1) + 1
    return ids.astype(np.int64)


def simulate_motion_timeline(
    n_views: int, n_stages: int, beta: float, seed: int, *, fov_mm: float
) -> MotionTimeline:
    """Staged ground-truth motion: stage 1 identity, others uniform in +-beta.

    Rotations are drawn in degrees and stored in radians; shifts are drawn
    in millimeters per axis and stored in canonical units (via the FOV).
    """
    ids = stage_assignment(n_views, n_stages)
    rng = np.random.Generator(np.random.Philox(key=seed))
    rotations = np.zeros(n_views)
    shifts = np.zeros((n_views, 2))
    for stage in range(2, n_stages + 1):
        rot_deg = rng.uniform(-beta, beta)
        shift_mm = rng.uniform(-beta, beta, size=2)
        sel = ids == stage
        rotations[sel] = np.deg2rad(rot_deg)
        shifts[sel] = mm_to_canonical(shift_mm, fov_mm)
    return MotionTimeline(rotations, shifts, ids)


def acquire(
    image: np.ndarray,
    views: np.ndarray,
    timeline: MotionTimeline,
    m: int,
    *,
    fov_mm: float,
    noise_std: float = 0.0,
    seed: int = 0,
) -> RadialKSpace:
    """Acquire one spoke per view from the per-view moved image.

    View i sees the subject at pose timeline[i]: the acquired spoke is the
    brute-force Fourier sum of f(A(-theta_i)(x - tau_i)), evaluated by
    bilinear resampling of the ground-truth grid.  The identity pose skips
    resampling entirely, so motion-free acquisition is bit-exact with
    `direct_spoke` on the original image.
    """
    views = np.asarray(views, dtype=np.float64)
    if len(timeline) != views.shape[0]:
        raise ValueError("timeline length must match the number of views")
    img = np.asarray(image, dtype=np.complex128)
    spokes = np.empty((views.shape[0], m), dtype=np.complex128)
    for i, theta in enumerate(views):
        t = timeline.triplet(i)
        if t.rotation == 0.0 and t.shift_x == 0.0 and t.shift_y == 0.0:
            moved = img
        else:
            moved = rigid_resample(img, t)
        spokes[i] = direct_spoke(moved, float(theta), m).samples
    if noise_std > 0.0:
        rng = np.random.Generator(np.random.Philox(key=seed + (1 << 32)))
        spokes = spokes + noise_std * (
            rng.standard_normal(spokes.shape) + 1j * rng.standard_normal(spokes.shape)
        )
    return RadialKSpace(
        angles=views,
        stage_ids=timeline.stage_of_view.copy(),
        spokes=spokes,
        fov_mm=float(fov_mm),
        image_shape=img.shape,
        gt_motion=timeline.copy(),
    )


def undersample(kspace: RadialKSpace, af: int) -> RadialKSpace:
    """Keep the first ceil(n / af) views in acquisition order."""
    if af < 1:
        raise ValueError("af must be >= 1")
    keep = int(np.ceil(kspace.n_views / af))
    gt = None
    if kspace.gt_motion is not None:
        t = kspace.gt_motion
        gt = MotionTimeline(
            t.rotations[:keep].copy(), t.shifts[:keep].copy(), t.stage_of_view[:keep].copy()
        )
    return RadialKSpace(
        angles=kspace.angles[:keep].copy(),
        stage_ids=kspace.stage_ids[:keep].copy(),
        spokes=kspace.spokes[:keep].copy(),
        fov_mm=kspace.fov_mm,
        image_shape=kspace.image_shape,
        gt_motion=gt,
    )


def simulate_dataset(spec: AcquisitionSpec):
    """Full simulation pipeline.

    Returns
    -------
    (kspace, image, timeline)
        The undersampled RadialKSpace, the ground-truth complex image, and
        the full-view ground-truth timeline (the k-space object carries the
        undersampled slice of it).
    """
    image = shepp_logan(spec.image_size, spec.image_size, spec.phase_mode)
    views = golden_angle_views(spec.n_views)
    timeline = simulate_motion_timeline(
        spec.n_views, spec.n_stages, spec.beta, spec.seed, fov_mm=spec.resolved_fov_mm
    )
    kspace = acquire(
        image,
        views,
        timeline,
        spec.resolved_spoke_len,
        fov_mm=spec.resolved_fov_mm,
        noise_std=spec.noise_std,
        seed=spec.seed,
    )
    return undersample(kspace, spec.af), image, timeline
