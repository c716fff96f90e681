"""Plain-text run configuration: `key = value` lines with typed defaults.

One flat namespace covers acquisition, optimization, encoding, and output
paths, so a single file can drive both `simulate` and `reconstruct`.
Unknown keys are rejected (typos should fail loudly, not silently run a
default).  Lines starting with `#` and blank lines are ignored; a trailing
`# comment` after the value is stripped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .hashgrid import HashGridConfig
from .simulate import AcquisitionSpec
from .training import TrainConfig

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class RunConfig:
    """All run settings with their documented defaults.

    Acquisition (used by `simulate`)
    --------------------------------
    image_size : 64        phantom height = width, pixels
    n_views : 120          full golden-angle view count before undersampling
    n_stages : 6           quasi-static motion stages over the full view set
    beta : 5.0             motion range (+- degrees rotation, +- mm shift)
    af : 2                 acceleration factor (keep first ceil(n/af) views)
    fov_mm : 0.0           field of view in mm (0 -> image_size, 1 mm/pixel)
    spoke_len : 0          odd samples per spoke (0 -> default for the size)
    phase_mode : none      phantom phase: none | smooth
    noise_std : 0.0        complex white-noise std added per spoke sample

    Optimization (used by `reconstruct`)
    ------------------------------------
    epochs : 4000          optimization steps (one ray batch each)
    rays_per_step : 80
    lr0 : 0.001            initial Adam learning rate
    lr_halving_period : 1000
    encoding : coarse2fine encoding arm: coarse2fine | fine | coarse
    lambda_start : 4.0     coarse-to-fine ramp start (active levels i <= lambda)
    lambda_end : 16.0
    lambda_ramp_fraction : 0.5
    forward_arm : projection   data arm: projection | kspace
    motion_enabled : true  false freezes motion at identity (no-MoCo arm)
    motion_granularity : stage one triplet per stage | per view
    motion_fit_fraction : 0.5  share of epochs with pose updates enabled

    Hash encoding / network
    -----------------------
    levels : 16
    features_per_level : 2
    table_size : 262144    hash-table rows per level (power of two)
    base_resolution : 2
    growth_factor : 2.0
    domain_margin : 0.75   canonical margin around [-1,1]^2
    mlp_width : 128

    Shared
    ------
    seed : 0               master seed (simulation draws and training init)
    out_dir : out          directory all command outputs are written into
    """

    image_size: int = 64
    n_views: int = 120
    n_stages: int = 6
    beta: float = 5.0
    af: int = 2
    fov_mm: float = 0.0
    spoke_len: int = 0
    phase_mode: str = "none"
    noise_std: float = 0.0

    epochs: int = 4000
    rays_per_step: int = 80
    lr0: float = 1e-3
    lr_halving_period: int = 1000
    encoding: str = "coarse2fine"
    lambda_start: float = 4.0
    lambda_end: float = 16.0
    lambda_ramp_fraction: float = 0.5
    forward_arm: str = "projection"
    motion_enabled: bool = True
    motion_granularity: str = "stage"
    motion_fit_fraction: float = 0.5

    levels: int = 16
    features_per_level: int = 2
    table_size: int = 262144
    base_resolution: int = 2
    growth_factor: float = 2.0
    domain_margin: float = 0.75
    mlp_width: int = 128

    seed: int = 0
    out_dir: str = "out"


def _parse_value(raw: str, target_type, key: str):
    if target_type is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if target_type is int:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {raw!r}") from None
    if target_type is float:
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ValueError(f"{key}: value must be finite, got {raw!r}")
        return value
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` text into a RunConfig.

    Raises
    ------
    ValueError
        On unknown keys, malformed lines, duplicate keys, or untypeable
        values.
    """
    schema = {f.name: f.type for f in fields(RunConfig)}
    types = {"int": int, "float": float, "str": str, "bool": bool}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.split("#", 1)[0].strip()
        if key not in schema:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in overrides:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ValueError(f"line {lineno}: empty value for {key!r}")
        overrides[key] = _parse_value(raw, types[schema[key]], key)
    return RunConfig(**overrides)


def load_config(path) -> RunConfig:
    """Read and parse a config file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def acquisition_spec(rc: RunConfig) -> AcquisitionSpec:
    """The simulation settings carried by a RunConfig."""
    return AcquisitionSpec(
        image_size=rc.image_size,
        n_views=rc.n_views,
        n_stages=rc.n_stages,
        beta=rc.beta,
        af=rc.af,
        seed=rc.seed,
        fov_mm=rc.fov_mm,
        spoke_len=rc.spoke_len,
        phase_mode=rc.phase_mode,
        noise_std=rc.noise_std,
    )


def train_config(rc: RunConfig) -> TrainConfig:
    """The optimization settings carried by a RunConfig (pre-encoding-arm)."""
    return TrainConfig(
        epochs=rc.epochs,
        rays_per_step=rc.rays_per_step,
        lr0=rc.lr0,
        lr_halving_period=rc.lr_halving_period,
        lambda_start=rc.lambda_start,
        lambda_end=rc.lambda_end,
        lambda_ramp_fraction=rc.lambda_ramp_fraction,
        seed=rc.seed,
        forward_arm=rc.forward_arm,
        motion_enabled=rc.motion_enabled,
        motion_granularity=rc.motion_granularity,
        motion_fit_fraction=rc.motion_fit_fraction,
    )


def hash_config(rc: RunConfig) -> HashGridConfig:
    """The encoding settings carried by a RunConfig."""
    return HashGridConfig(
        levels=rc.levels,
        features_per_level=rc.features_per_level,
        table_size=rc.table_size,
        base_resolution=rc.base_resolution,
        growth_factor=rc.growth_factor,
        domain_margin=rc.domain_margin,
    )
