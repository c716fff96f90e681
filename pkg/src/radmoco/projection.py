"""Projection-domain forward model and its hand-derived backward pass.

A ray prediction is the Riemann sum of the coordinate network along the
motion-transformed ray:

    g_hat(theta_i, rho) = sum_s a(x~_s) dx  +  j * sum_s b(x~_s) dx,

with x~_s = A(theta_i) x_s + tau_i the per-view rigid transform of the ray
sample points and (a, b) the network's real/imaginary outputs.  The data
term is an L1 sum over the batch, real and imaginary parts separately.

`backward_batch` propagates the loss through the Riemann sum, the network,
the hash encoding, and the rigid transform, producing gradients for the
feature tables, the network weights, and the per-view motion triplets
(via dx~/dtheta = A'(theta) x and dx~/dtau = I).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    RAY_EXTENT,
    CanonicalGrid,
    MotionTimeline,
    MotionTriplet,
    Ray,
    ray_sample_points,
)
from .hashgrid import HashGrid, MaskState, encode, encode_backward
from .mlp import MlpGradients, MlpParams, mlp_backward, mlp_forward_full


@dataclass
class RayBatch:
    """A batch of rays tied to measured projection values.

    Attributes
    ----------
    view_indices : (B,) int
        Index of each ray's view in the motion timeline.
    angles : (B,) float
        View angle per ray (radians).
    offsets : (B,) float
        Detector offset rho per ray (canonical units).
    n_samples : int
        Quadrature samples per ray (shared).
    measured : (B,) complex
        Measured projection value per ray.
    """

    view_indices: np.ndarray
    angles: np.ndarray
    offsets: np.ndarray
    n_samples: int
    measured: np.ndarray

    def __post_init__(self):
        self.view_indices = np.asarray(self.view_indices, dtype=np.int64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        self.measured = np.asarray(self.measured, dtype=np.complex128)
        b = self.view_indices.shape[0]
        for name, a in (("angles", self.angles), ("offsets", self.offsets),
                        ("measured", self.measured)):
            if a.shape != (b,):
                raise ValueError(f"{name} must have shape ({b},), got {a.shape}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        keys = np.stack([self.view_indices, np.round(self.offsets / 1e-12)], axis=1)
        if np.unique(keys, axis=0).shape[0] != b:
            raise ValueError("rays within a batch must be unique (view, rho) pairs")

    def __len__(self) -> int:
        return int(self.view_indices.shape[0])

    @property
    def step(self) -> float:
        return RAY_EXTENT / self.n_samples


@dataclass
class BatchGradients:
    """Gradients of the batch loss for every learnable group, plus the loss."""

    tables: list
    mlp: MlpGradients
    motion: np.ndarray  # (n_views, 3): d/dtheta, d/dtau_x, d/dtau_y
    loss: float
    predictions: np.ndarray  # (B,) complex


def _transformed_samples(batch: RayBatch, timeline: MotionTimeline):
    """Ray sample points before and after the per-view rigid transform.

    Returns (coords, moved) with shape (B, m, 2) each.
    """
    if len(batch) and batch.view_indices.max() >= len(timeline):
        raise ValueError("batch references a view index outside the timeline")
    coords = ray_sample_points(batch.angles, batch.offsets, batch.n_samples)
    rot = timeline.rotations[batch.view_indices]  # (B,)
    shift = timeline.shifts[batch.view_indices]  # (B, 2)
    c, s = np.cos(rot), np.sin(rot)
    x, y = coords[..., 0], coords[..., 1]
    moved = np.empty_like(coords)
    moved[..., 0] = c[:, None] * x - s[:, None] * y + shift[:, None, 0]
    moved[..., 1] = s[:, None] * x + c[:, None] * y + shift[:, None, 1]
    return coords, moved


def project_ray(
    ray: Ray,
    triplet: MotionTriplet,
    grid: HashGrid,
    masks: MaskState,
    params: MlpParams,
) -> complex:
    """Predict one ray's complex projection value.

    Transforms the ray's sample points by the rigid triplet, evaluates the
    encoded network at each, and Riemann-sums with step ray.step.
    """
    batch = RayBatch(
        view_indices=np.array([0]),
        angles=np.array([ray.view_angle]),
        offsets=np.array([ray.offset]),
        n_samples=ray.n_samples,
        measured=np.zeros(1, dtype=np.complex128),
    )
    timeline = MotionTimeline(
        np.array([triplet.rotation]),
        np.array([[triplet.shift_x, triplet.shift_y]]),
        np.array([1]),
    )
    return complex(forward_batch(batch, timeline, grid, masks, params)[0])


def forward_batch(
    batch: RayBatch,
    timeline: MotionTimeline,
    grid: HashGrid,
    masks: MaskState,
    params: MlpParams,
) -> np.ndarray:
    """Predicted complex projection values for every ray, shape (B,)."""
    _, moved = _transformed_samples(batch, timeline)
    feats = encode(moved.reshape(-1, 2), grid, masks)
    out, _, _ = mlp_forward_full(feats, params)
    ab = out.reshape(len(batch), batch.n_samples, 2).sum(axis=1) * batch.step
    return ab[:, 0] + 1j * ab[:, 1]


def loss(batch: RayBatch, predictions: np.ndarray) -> float:
    """L1 data term: sum over rays of |Re(g_hat - g)| + |Im(g_hat - g)|."""
    pred = np.asarray(predictions, dtype=np.complex128)
    if pred.shape != batch.measured.shape:
        raise ValueError(
            f"predictions shape {pred.shape} != measured shape {batch.measured.shape}"
        )
    diff = pred - batch.measured
    return float(np.sum(np.abs(diff.real)) + np.sum(np.abs(diff.imag)))


def backward_batch(
    batch: RayBatch,
    timeline: MotionTimeline,
    grid: HashGrid,
    masks: MaskState,
    params: MlpParams,
    upstream: np.ndarray | None = None,
) -> BatchGradients:
    """Loss gradients for the feature tables, network, and motion triplets.

    With `upstream=None` the L1 data term supplies dL/dg_hat = sign(Re diff)
    + j sign(Im diff) per ray (sign(0) = 0).  A caller may instead pass an
    explicit per-ray complex upstream (used by the k-space training arm);
    the reported loss is then the L1 term of this batch for logging only.
    """
    if len(batch) == 0:
        raise ValueError("backward_batch requires a non-empty batch")
    coords, moved = _transformed_samples(batch, timeline)
    b, m = len(batch), batch.n_samples
    flat = moved.reshape(-1, 2)
    feats, ecache = encode(flat, grid, masks, with_cache=True)
    out, z1, h = mlp_forward_full(feats, params)
    ab = out.reshape(b, m, 2).sum(axis=1) * batch.step
    pred = ab[:, 0] + 1j * ab[:, 1]
    batch_loss = loss(batch, pred)
    if upstream is None:
        diff = pred - batch.measured
        up_ray = np.sign(diff.real) + 1j * np.sign(diff.imag)
    else:
        up_ray = np.asarray(upstream, dtype=np.complex128)
        if up_ray.shape != (b,):
            raise ValueError(f"upstream must have shape ({b},), got {up_ray.shape}")
    # Riemann sum: every sample of a ray sees the ray's upstream times dx
    up_sample = np.empty((b, m, 2))
    up_sample[..., 0] = up_ray.real[:, None] * batch.step
    up_sample[..., 1] = up_ray.imag[:, None] * batch.step
    mlp_grads, dfeats = mlp_backward(feats, params, up_sample.reshape(-1, 2), cache=(z1, h))
    table_grads, dxy = encode_backward(flat, grid, masks, dfeats, cache=ecache)
    dxy = dxy.reshape(b, m, 2)
    # motion gradients: dtau = sum over samples of dL/dx~; dtheta couples
    # through dx~/dtheta = A'(theta) x at the untransformed sample points
    rot = timeline.rotations[batch.view_indices]
    c, s = np.cos(rot), np.sin(rot)
    x, y = coords[..., 0], coords[..., 1]
    ax = -s[:, None] * x - c[:, None] * y
    ay = c[:, None] * x - s[:, None] * y
    dtheta_ray = np.sum(dxy[..., 0] * ax + dxy[..., 1] * ay, axis=1)  # (B,)
    dtau_ray = dxy.sum(axis=1)  # (B, 2)
    motion = np.zeros((len(timeline), 3))
    np.add.at(motion[:, 0], batch.view_indices, dtheta_ray)
    np.add.at(motion[:, 1], batch.view_indices, dtau_ray[:, 0])
    np.add.at(motion[:, 2], batch.view_indices, dtau_ray[:, 1])
    return BatchGradients(table_grads, mlp_grads, motion, batch_loss, pred)


def render_image(
    grid: HashGrid, masks: MaskState, params: MlpParams, out: CanonicalGrid
) -> np.ndarray:
    """Evaluate the network at every pixel center (no motion transform).

    Returns
    -------
    ndarray (h, w) complex128: a + j b at each pixel.
    """
    pts = out.points()
    feats = encode(pts, grid, masks)
    vals, _, _ = mlp_forward_full(feats, params)
    img = vals[:, 0] + 1j * vals[:, 1]
    return img.reshape(out.height, out.width)
