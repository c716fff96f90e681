"""Scikit-learn style front door for joint motion correction + reconstruction.

`RadialMocoReconstructor` wraps the optimization loop behind the familiar
fit/transform/predict surface: fit consumes one acquired dataset
(RadialKSpace or ProjectionSet), transform returns the reconstructed
complex image, and predict returns the per-view rigid-motion estimate.
The model is transductive — it is optimized for the dataset passed to
fit, so transform/predict only accept that same dataset.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .geometry import CanonicalGrid, MotionTimeline
from .hashgrid import HashGridConfig
from .projection import render_image
from .training import (
    ENCODINGS,
    TrainConfig,
    schedule_for_encoding,
    train,
)
from .validation import check_dataset, check_is_fitted, check_option


class RadialMocoReconstructor(TransformerMixin, BaseEstimator):
    """Joint rigid-motion estimation and image reconstruction.

    Fits an implicit neural image (multiresolution hash encoding + small
    MLP) together with one rigid-motion triplet per view against the
    acquired radial data, by Adam on hand-derived gradients.

    Parameters
    ----------
    epochs : int, default=4000
        Optimization steps (one ray batch per step).
    rays_per_step : int, default=80
        Rays sampled uniformly without replacement per step.
    lr0 : float, default=1e-3
        Initial Adam learning rate, halved every `lr_halving_period` steps.
    lr_halving_period : int, default=1000
    encoding : {"coarse2fine", "fine", "coarse"}, default="coarse2fine"
        Level-masking arm: ramped lambda, all levels on, or a fixed coarse
        cap (6 levels).
    lambda_start, lambda_end : float, defaults 4.0 / 16.0
        Coarse-to-fine ramp endpoints (active levels i <= lambda).
    lambda_ramp_fraction : float, default=0.5
        Fraction of epochs over which lambda ramps linearly, then flat.
    forward_arm : {"projection", "kspace"}, default="projection"
        Fit projection profiles (default) or raw k-space spokes.
    motion_enabled : bool, default=True
        False freezes all triplets at identity (the no-MoCo ablation).
    motion_granularity : {"stage", "view"}, default="stage"
        Learn one triplet per motion stage (views in a stage share a pose)
        or one per view.
    motion_fit_fraction : float, default=0.5
        Share of epochs with pose updates enabled; afterwards the poses are
        held while the image keeps refining.
    levels : int, default=16
        Hash-grid resolution levels.
    features_per_level : int, default=2
    table_size : int, default=2**18
        Hash-table rows per level (power of two); coarse levels that fit
        densely are stored without hashing.
    base_resolution : int, default=2
    growth_factor : float, default=2.0
    domain_margin : float, default=0.75
        Canonical-unit margin around [-1, 1]^2 covered by the encoding so
        motion-transformed rays stay inside the learned domain.
    mlp_width : int, default=128
    seed : int, default=0
        Master seed for initialization and ray sampling.

    Attributes
    ----------
    image_ : ndarray (h, w) complex128
        Reconstruction rendered at the dataset's stated image shape.
    motion_ : MotionTimeline
        Per-view rigid-motion estimate (subject-motion convention).
    state_ : ModelState
        Full optimizer-facing state (tables, MLP, raw triplets, masks).
    history_ : list of (epoch, loss, lr, lambda)
    n_views_ : int

    Examples
    --------
    >>> from radmoco import AcquisitionSpec, simulate_dataset
    >>> kspace, gt, _ = simulate_dataset(AcquisitionSpec(image_size=32,
    ...     n_views=24, n_stages=2, beta=0.0, af=1, seed=3))
    >>> model = RadialMocoReconstructor(epochs=50, seed=3)
    >>> recon = model.fit_transform(kspace)
    >>> recon.shape
    (32, 32)
    """

    def __init__(
        self,
        epochs: int = 4000,
        rays_per_step: int = 80,
        lr0: float = 1e-3,
        lr_halving_period: int = 1000,
        encoding: str = "coarse2fine",
        lambda_start: float = 4.0,
        lambda_end: float = 16.0,
        lambda_ramp_fraction: float = 0.5,
        forward_arm: str = "projection",
        motion_enabled: bool = True,
        motion_granularity: str = "stage",
        motion_fit_fraction: float = 0.5,
        levels: int = 16,
        features_per_level: int = 2,
        table_size: int = 2**18,
        base_resolution: int = 2,
        growth_factor: float = 2.0,
        domain_margin: float = 0.75,
        mlp_width: int = 128,
        seed: int = 0,
    ):
        self.epochs = epochs
        self.rays_per_step = rays_per_step
        self.lr0 = lr0
        self.lr_halving_period = lr_halving_period
        self.encoding = encoding
        self.lambda_start = lambda_start
        self.lambda_end = lambda_end
        self.lambda_ramp_fraction = lambda_ramp_fraction
        self.forward_arm = forward_arm
        self.motion_enabled = motion_enabled
        self.motion_granularity = motion_granularity
        self.motion_fit_fraction = motion_fit_fraction
        self.levels = levels
        self.features_per_level = features_per_level
        self.table_size = table_size
        self.base_resolution = base_resolution
        self.growth_factor = growth_factor
        self.domain_margin = domain_margin
        self.mlp_width = mlp_width
        self.seed = seed

    def _configs(self):
        check_option(self.encoding, ENCODINGS, "encoding")
        hash_config = HashGridConfig(
            levels=self.levels,
            features_per_level=self.features_per_level,
            table_size=self.table_size,
            base_resolution=self.base_resolution,
            growth_factor=self.growth_factor,
            domain_margin=self.domain_margin,
        )
        config = TrainConfig(
            epochs=self.epochs,
            rays_per_step=self.rays_per_step,
            lr0=self.lr0,
            lr_halving_period=self.lr_halving_period,
            lambda_start=self.lambda_start,
            lambda_end=self.lambda_end,
            lambda_ramp_fraction=self.lambda_ramp_fraction,
            seed=self.seed,
            forward_arm=self.forward_arm,
            motion_enabled=self.motion_enabled,
            motion_granularity=self.motion_granularity,
            motion_fit_fraction=self.motion_fit_fraction,
        )
        return schedule_for_encoding(config, self.encoding, self.levels), hash_config

    def fit(self, X, y=None):
        """Optimize image and motion against one acquired dataset.

        Parameters
        ----------
        X : RadialKSpace or ProjectionSet
        y : ignored (estimator-API compatibility)
        """
        ds = check_dataset(X)
        config, hash_config = self._configs()
        result = train(ds, config, hash_config, mlp_width=self.mlp_width)
        self.state_ = result.state
        self.motion_ = result.motion
        self.history_ = result.history
        self.n_views_ = ds.n_views
        self.angles_ = ds.angles.copy()
        self.image_shape_ = tuple(ds.image_shape)
        self.image_ = self.render(self.image_shape_)
        return self

    def _check_same_dataset(self, X):
        ds = check_dataset(X)
        if ds.n_views != self.n_views_ or not np.array_equal(ds.angles, self.angles_):
            raise ValueError(
                "this estimator is transductive: transform/predict accept "
                "only the dataset passed to fit (view angles differ)"
            )
        return ds

    def transform(self, X):
        """Return the reconstructed complex image for the fitted dataset."""
        check_is_fitted(self)
        self._check_same_dataset(X)
        return self.image_.copy()

    def predict(self, X) -> np.ndarray:
        """Return the motion estimate as an (n_views, 3) array.

        Columns are (rotation radians, shift_x, shift_y canonical units) in
        subject-motion convention.
        """
        check_is_fitted(self)
        self._check_same_dataset(X)
        return self.motion_.triplets()

    def render(self, shape=None) -> np.ndarray:
        """Render the fitted implicit image at an arbitrary pixel grid."""
        check_is_fitted(self)
        if shape is None:
            shape = self.image_shape_
        h, w = int(shape[0]), int(shape[1])
        return render_image(
            self.state_.grid,
            self.state_.masks,
            self.state_.mlp,
            CanonicalGrid(h, w),
        )

    def motion_timeline(self) -> MotionTimeline:
        """The fitted motion estimate as a MotionTimeline."""
        check_is_fitted(self)
        return self.motion_.copy()
