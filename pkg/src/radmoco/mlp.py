"""Two-layer fully connected network mapping encoded coordinates to (a, b).

The head is linear: out = W2^T relu(W1^T v + b1) + b2, returning the real
and imaginary parts of the image at the encoded point.  No output
activation.  Forward and backward passes are explicit matrix algebra; the
ReLU subgradient at exactly zero is taken as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MlpParams:
    """Weights and biases; w1: (in_dim, width), w2: (width, out_dim)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        in_dim, width = self.w1.shape
        if self.b1.shape != (width,):
            raise ValueError(f"b1 shape {self.b1.shape} != ({width},)")
        if self.w2.shape[0] != width:
            raise ValueError(f"w2 first dim {self.w2.shape[0]} != width {width}")
        if self.b2.shape != (self.w2.shape[1],):
            raise ValueError(f"b2 shape {self.b2.shape} != ({self.w2.shape[1]},)")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def width(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()))


@dataclass
class MlpGradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]


def init_params(seed: int, in_dim: int, width: int = 128, out_dim: int = 2) -> MlpParams:
    """Seeded init: weights uniform +-sqrt(6/fan_in) per layer, biases zero."""
    if in_dim < 1 or width < 1 or out_dim < 1:
        raise ValueError("all layer dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / in_dim)
    lim2 = np.sqrt(6.0 / width)
    return MlpParams(
        w1=rng.uniform(-lim1, lim1, size=(in_dim, width)),
        b1=np.zeros(width),
        w2=rng.uniform(-lim2, lim2, size=(width, out_dim)),
        b2=np.zeros(out_dim),
    )


def mlp_forward(v, params: MlpParams) -> np.ndarray:
    """Evaluate the network on one vector (in_dim,) or a batch (N, in_dim)."""
    out, _, _ = mlp_forward_full(v, params)
    return out


def mlp_forward_full(v, params: MlpParams):
    """Forward pass that also returns intermediates for the backward pass.

    Returns
    -------
    (out, z1, h) : output, hidden preactivation, hidden activation.
    """
    va = np.asarray(v, dtype=np.float64)
    single = va.ndim == 1
    vb = va.reshape(-1, params.in_dim)
    z1 = vb @ params.w1 + params.b1
    h = np.maximum(z1, 0.0)
    out = h @ params.w2 + params.b2
    if single:
        return out[0], z1[0], h[0]
    return out, z1, h


def mlp_backward(v, params: MlpParams, upstream, cache=None):
    """Backward pass of the network.

    Parameters
    ----------
    v : array_like, shape (in_dim,) or (N, in_dim)
    upstream : array_like, shape (out_dim,) or (N, out_dim)
        Loss gradient with respect to the network output.
    cache : optional (z1, h) from `mlp_forward_full` to skip recomputation.

    Returns
    -------
    (grads, dv) : MlpGradients and the gradient with respect to `v`.
    """
    va = np.asarray(v, dtype=np.float64)
    single = va.ndim == 1
    vb = va.reshape(-1, params.in_dim)
    up = np.asarray(upstream, dtype=np.float64).reshape(vb.shape[0], params.out_dim)
    if cache is None:
        z1 = vb @ params.w1 + params.b1
        h = np.maximum(z1, 0.0)
    else:
        z1, h = (np.asarray(c).reshape(vb.shape[0], params.width) for c in cache)
    gw2 = h.T @ up
    gb2 = up.sum(axis=0)
    gh = up @ params.w2.T
    gz1 = gh * (z1 > 0.0)  # ReLU subgradient at 0 taken as 0
    gw1 = vb.T @ gz1
    gb1 = gz1.sum(axis=0)
    dv = gz1 @ params.w1.T
    grads = MlpGradients(gw1, gb1, gw2, gb2)
    if single:
        return grads, dv[0]
    return grads, dv
