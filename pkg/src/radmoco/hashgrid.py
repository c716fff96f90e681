"""Multiresolution hash-grid feature encoding with coarse-to-fine level masks.

A point in the (padded) canonical square is encoded per level by bilinear
interpolation of learnable feature rows attached to the corners of that
level's lattice.  Levels below the hash threshold index corners densely;
finer levels use the spatial hash (i1 XOR i2 * 2654435761) mod T.  Each
level's interpolated feature vector is multiplied by a binary mask so a
continuous knob `lam` can switch resolution in coarse-to-fine order:
level i (1-based) is active iff i <= lam.  The concatenation over levels
is the network input.

Gradients are hand-derived: `encode_backward` returns both the scatter
gradient into the feature tables and the gradient with respect to the
input coordinates (which is what couples the encoding to the rigid-motion
parameters upstream).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HASH_PRIME = 2654435761


@dataclass(frozen=True)
class HashGridConfig:
    """Hyperparameters of the multiresolution hash encoding.

    Attributes
    ----------
    levels : int
        Number of resolution levels L.
    features_per_level : int
        Feature width F per level; the encoding output has length L*F.
    table_size : int
        Maximum rows T per level (power of two); levels whose lattice has
        at most T corners are indexed densely and allocate only the lattice.
    base_resolution : int
        Coarsest lattice resolution N_min (cells per side).
    growth_factor : float
        Per-level geometric growth b: N_l = floor(N_min * b**(l-1)).
    domain_margin : float
        Padding of the canonical square: the encoding domain is
        [-1 - margin, 1 + margin]^2, covering ray samples (radius sqrt(2))
        moved by bounded shifts.  Coordinates outside clamp to the border.
    """

    levels: int = 16
    features_per_level: int = 2
    table_size: int = 2**18
    base_resolution: int = 2
    growth_factor: float = 2.0
    domain_margin: float = 0.75

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.features_per_level < 1:
            raise ValueError("features_per_level must be >= 1")
        if self.table_size < 1 or (self.table_size & (self.table_size - 1)) != 0:
            raise ValueError(f"table_size must be a power of two, got {self.table_size}")
        if self.base_resolution < 1:
            raise ValueError("base_resolution must be >= 1")
        if not self.growth_factor > 1.0:
            raise ValueError("growth_factor must be > 1")
        if self.domain_margin < 0.0:
            raise ValueError("domain_margin must be >= 0")

    @property
    def output_dim(self) -> int:
        return self.levels * self.features_per_level


def level_resolution(config: HashGridConfig, level: int) -> int:
    """Lattice resolution N_l = floor(N_min * b**(level-1)); `level` is 1-based."""
    if not 1 <= level <= config.levels:
        raise ValueError(f"level must be in 1..{config.levels}, got {level}")
    return int(np.floor(config.base_resolution * config.growth_factor ** (level - 1)))


def hash_index(corner, table_size: int):
    """Spatial hash of integer corner(s): (i1 XOR i2 * 2654435761) mod table_size.

    Parameters
    ----------
    corner : (2,) ints or (..., 2) integer array
    table_size : int, power of two

    Returns
    -------
    int or ndarray of int
    """
    c = np.asarray(corner)
    if np.any(c < 0):
        raise ValueError("corner indices must be non-negative")
    i1 = c[..., 0].astype(np.uint64)
    i2 = c[..., 1].astype(np.uint64)
    out = (i1 ^ (i2 * np.uint64(HASH_PRIME))) % np.uint64(table_size)
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


class HashGrid:
    """Learnable feature tables, one per resolution level.

    Table l has shape (rows_l, F) with rows_l = min(T, (N_l + 1)^2); features
    are float64 and initialized uniformly in [-1e-4, 1e-4].
    """

    def __init__(self, config: HashGridConfig, tables):
        self.config = config
        self.tables = list(tables)
        self.resolutions = np.array(
            [level_resolution(config, l) for l in range(1, config.levels + 1)],
            dtype=np.int64,
        )
        for l, t in enumerate(self.tables):
            expect = (table_rows(config, l + 1), config.features_per_level)
            if t.shape != expect:
                raise ValueError(
                    f"level {l + 1} table has shape {t.shape}, expected {expect}"
                )

    @classmethod
    def init(cls, config: HashGridConfig, seed: int) -> "HashGrid":
        rng = np.random.default_rng(seed)
        tables = [
            rng.uniform(-1e-4, 1e-4, size=(table_rows(config, l), config.features_per_level))
            for l in range(1, config.levels + 1)
        ]
        return cls(config, tables)

    def zero_like_tables(self):
        return [np.zeros_like(t) for t in self.tables]


def table_rows(config: HashGridConfig, level: int) -> int:
    """Allocated rows for a level: the dense lattice if it fits, else T."""
    n = level_resolution(config, level)
    dense = (n + 1) * (n + 1)
    return dense if dense <= config.table_size else config.table_size


def _is_dense(config: HashGridConfig, n_l: int) -> bool:
    return (n_l + 1) * (n_l + 1) <= config.table_size


@dataclass
class MaskState:
    """Binary per-level masks controlled by the continuous knob lam.

    masks[i-1] is all-ones iff level i is active (i <= lam), else all-zeros.
    """

    lam: float
    masks: np.ndarray  # (L, F) of {0.0, 1.0}

    @classmethod
    def for_lambda(cls, config: HashGridConfig, lam: float) -> "MaskState":
        if not 0.0 <= lam <= config.levels:
            raise ValueError(f"lambda must lie in [0, {config.levels}], got {lam!r}")
        levels = np.arange(1, config.levels + 1)
        active = (levels <= lam).astype(np.float64)
        masks = np.repeat(active[:, None], config.features_per_level, axis=1)
        return cls(float(lam), masks)

    def active_levels(self) -> np.ndarray:
        """Boolean per level, True where the mask is all-ones."""
        return self.masks[:, 0] > 0.0


def update_masks(state: MaskState, lam_new: float) -> MaskState:
    """New MaskState for the schedule value `lam_new` (monotone in lam)."""
    levels, feats = state.masks.shape
    if not 0.0 <= lam_new <= levels:
        raise ValueError(f"lambda must lie in [0, {levels}], got {lam_new!r}")
    idx = np.arange(1, levels + 1)
    active = (idx <= lam_new).astype(np.float64)
    return MaskState(float(lam_new), np.repeat(active[:, None], feats, axis=1))


def _to_unit(x: np.ndarray, margin: float):
    """Map padded canonical coords to [0, 1]^2, clamping outside.

    Returns the unit coordinates and the multiplicative du/dx factor per
    point per axis (0 where clamped, 1/(2 + 2*margin) inside).
    """
    span = 2.0 + 2.0 * margin
    u = (x + (1.0 + margin)) / span
    inside = (u >= 0.0) & (u <= 1.0)
    u = np.clip(u, 0.0, 1.0)
    dudx = inside.astype(np.float64) / span
    return u, dudx


def _corner_setup(u: np.ndarray, n_l: int):
    """Cell corner indices and bilinear weights at resolution n_l.

    Returns (c0, w) with c0 integer lower-corner indices in [0, n_l - 1]
    and w fractional positions in [0, 1]; points exactly on the far edge
    fold into the last cell with w = 1.
    """
    p = u * n_l
    c0 = np.floor(p).astype(np.int64)
    np.clip(c0, 0, n_l - 1, out=c0)
    w = p - c0
    return c0, w


def _corner_range_rows(config, n_l, ix, iy):
    """Rows for corner index arrays at one level (dense or hashed)."""
    if _is_dense(config, n_l):
        return ix + iy * (n_l + 1)
    return ((ix.astype(np.uint64) ^ (iy.astype(np.uint64) * np.uint64(HASH_PRIME)))
            % np.uint64(config.table_size)).astype(np.int64)


def _level_rows_weights(config, n_l, u):
    """Per-corner rows and bilinear weights for a batch of unit points.

    Returns (rows, weights, w) with rows (N, 4) int, weights (N, 4), and the
    fractional positions w (N, 2) for gradient reuse.  Corner order is
    (00, 10, 01, 11) in (x, y).
    """
    c0, w = _corner_setup(u, n_l)
    ix0, iy0 = c0[:, 0], c0[:, 1]
    ix1, iy1 = ix0 + 1, iy0 + 1
    rows = np.stack(
        [
            _corner_range_rows(config, n_l, ix0, iy0),
            _corner_range_rows(config, n_l, ix1, iy0),
            _corner_range_rows(config, n_l, ix0, iy1),
            _corner_range_rows(config, n_l, ix1, iy1),
        ],
        axis=1,
    )
    wx, wy = w[:, 0], w[:, 1]
    weights = np.stack(
        [(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy], axis=1
    )
    return rows, weights, w


class EncodeCache:
    """Forward-pass intermediates reusable by `encode_backward`.

    Valid only for the same points, table contents, and masks that
    produced it.
    """

    __slots__ = ("n_points", "dudx", "levels")

    def __init__(self, n_points, dudx, levels):
        self.n_points = n_points
        self.dudx = dudx
        self.levels = levels  # level index -> (n_l, rows, weights, w, feats)


def encode(x, grid: HashGrid, masks: MaskState, with_cache: bool = False):
    """Encode point(s) into the concatenated masked multilevel features.

    Parameters
    ----------
    x : array_like, shape (2,) or (N, 2)
        Padded-canonical coordinates.
    grid : HashGrid
    masks : MaskState
    with_cache : bool
        When true, also return an EncodeCache for the backward pass.

    Returns
    -------
    ndarray, shape (L*F,) or (N, L*F); or (ndarray, EncodeCache)
    """
    cfg = grid.config
    xa = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xa)):
        raise ValueError("encode requires finite coordinates")
    single = xa.ndim == 1
    pts = xa.reshape(-1, 2)
    u, dudx = _to_unit(pts, cfg.domain_margin)
    n = pts.shape[0]
    f = cfg.features_per_level
    out = np.zeros((n, cfg.levels * f))
    active = masks.active_levels()
    level_cache = {}
    for l in range(cfg.levels):
        if not active[l]:
            continue  # masked level contributes exact zeros
        n_l = int(grid.resolutions[l])
        rows, weights, w = _level_rows_weights(cfg, n_l, u)
        feats = grid.tables[l][rows]  # (N, 4, F)
        interp = np.einsum("nc,ncf->nf", weights, feats)
        out[:, l * f:(l + 1) * f] = interp * masks.masks[l]
        if with_cache:
            level_cache[l] = (n_l, rows, weights, w, feats)
    result = out[0] if single else out
    if with_cache:
        return result, EncodeCache(n, dudx, level_cache)
    return result


def encode_backward(x, grid: HashGrid, masks: MaskState, upstream, cache=None):
    """Backward pass of `encode`.

    Parameters
    ----------
    x : array_like, shape (2,) or (N, 2)
    upstream : array_like, shape (L*F,) or (N, L*F)
        Loss gradient with respect to the encoding output.
    cache : EncodeCache, optional
        Intermediates from `encode(..., with_cache=True)` on the same
        points, tables, and masks.

    Returns
    -------
    (table_grads, dx)
        table_grads : list of arrays shaped like grid.tables (hash collisions
        accumulate); dx : ndarray shaped like `x`.
    """
    cfg = grid.config
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    pts = xa.reshape(-1, 2)
    up = np.asarray(upstream, dtype=np.float64).reshape(pts.shape[0], -1)
    if up.shape[1] != cfg.output_dim:
        raise ValueError(
            f"upstream has {up.shape[1]} features, expected {cfg.output_dim}"
        )
    if cache is not None and cache.n_points != pts.shape[0]:
        raise ValueError("cache was built for a different point batch")
    if cache is None:
        u, dudx = _to_unit(pts, cfg.domain_margin)
    else:
        u, dudx = None, cache.dudx
    f = cfg.features_per_level
    table_grads = []
    dx = np.zeros_like(pts)
    active = masks.active_levels()
    for l in range(cfg.levels):
        if not active[l]:
            table_grads.append(np.zeros_like(grid.tables[l]))
            continue  # masked level: zero gradient everywhere
        n_l = int(grid.resolutions[l])
        if cache is None:
            rows, weights, w = _level_rows_weights(cfg, n_l, u)
            feats = grid.tables[l][rows]  # (N, 4, F)
        else:
            _, rows, weights, w, feats = cache.levels[l]
        g = up[:, l * f:(l + 1) * f] * masks.masks[l]  # (N, F)
        # feature-table scatter: dL/dfeat[row] += weight * g; bincount
        # accumulates duplicate rows (hash collisions included) and
        # assigns every row, so no zero prefill is needed
        flat_rows = rows.ravel()
        grads_l = np.empty_like(grid.tables[l])
        for j in range(f):
            grads_l[:, j] = np.bincount(
                flat_rows,
                weights=(weights * g[:, j, None]).ravel(),
                minlength=grads_l.shape[0],
            )
        table_grads.append(grads_l)
        # coordinate gradient through the bilinear weights
        wx, wy = w[:, 0], w[:, 1]
        ddx = (feats[:, 1] - feats[:, 0]) * (1 - wy)[:, None] + (
            feats[:, 3] - feats[:, 2]
        ) * wy[:, None]
        ddy = (feats[:, 2] - feats[:, 0]) * (1 - wx)[:, None] + (
            feats[:, 3] - feats[:, 1]
        ) * wx[:, None]
        scale = n_l  # dp/du
        dx[:, 0] += np.sum(ddx * g, axis=1) * scale * dudx[:, 0]
        dx[:, 1] += np.sum(ddy * g, axis=1) * scale * dudx[:, 1]
    if single:
        return table_grads, dx[0]
    return table_grads, dx
