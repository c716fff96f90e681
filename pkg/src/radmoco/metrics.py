"""Image-quality and motion-accuracy metrics with gauge-aware evaluation.

Joint image+motion estimation is only determined up to a constant rigid
offset (the gauge), so motion accuracy uses centered standard deviations
(sigma metrics) that are exactly invariant to a constant triplet added to
every view, alongside the plain l1 means which are not.  Image comparison
first removes the gauge: the mean motion error gives the rigid offset
between the reconstruction and the ground truth, and the reconstruction
is resampled through the inverse of that offset before PSNR/SSIM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .geometry import MotionTimeline, MotionTriplet, rad_to_deg, rigid_resample

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class EvalReport:
    """One evaluation row: image quality plus motion accuracy.

    psnr_db is capped at PSNR_CAP_DB (psnr_capped flags when the cap was
    applied, including the identical-image case); sigma metrics are the
    gauge-invariant motion errors, l1 metrics the plain means.
    """

    psnr_db: float
    ssim: float
    sigma_rot_deg: float
    sigma_shift_px: float
    l1_rot_deg: float
    l1_shift_px: float
    psnr_capped: bool

    def __post_init__(self):
        if not -1.0 - 1e-12 <= self.ssim <= 1.0 + 1e-12:
            raise ValueError(f"ssim out of range: {self.ssim!r}")
        if not np.isfinite(self.psnr_db):
            raise ValueError("psnr must be finite (the cap handles zero MSE)")


def psnr(recon: np.ndarray, gt: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on magnitude images.

    10*log10(peak^2 / MSE) with peak = max(gt); values above PSNR_CAP_DB
    (including the zero-MSE case) report the cap.
    """
    recon = np.asarray(recon, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if recon.shape != gt.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {gt.shape}")
    peak = float(gt.max())
    if peak <= 0:
        raise ValueError("gt peak must be positive")
    mse = float(np.mean((recon - gt) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    w = np.outer(g1, g1)
    return w / w.sum()


def ssim(recon: np.ndarray, gt: np.ndarray) -> float:
    """Mean local SSIM over all fully interior window positions.

    Gaussian window 11x11 (sigma 1.5), K1=0.01, K2=0.03, dynamic range
    max(gt).  Local statistics are Gaussian-weighted means/variances/
    covariance; border positions without full window support are excluded.
    """
    recon = np.asarray(recon, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if recon.shape != gt.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {gt.shape}")
    if min(recon.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    dr = float(gt.max())
    if dr <= 0:
        raise ValueError("gt dynamic range must be positive")
    c1 = (SSIM_K1 * dr) ** 2
    c2 = (SSIM_K2 * dr) ** 2

    def win(img):
        return signal.correlate2d(img, w, mode="valid")

    mu_x = win(recon)
    mu_y = win(gt)
    sxx = win(recon * recon) - mu_x * mu_x
    syy = win(gt * gt) - mu_y * mu_y
    sxy = win(recon * gt) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def _motion_errors(est: MotionTimeline, gt: MotionTimeline):
    if len(est) != len(gt):
        raise ValueError(f"timeline lengths differ: {len(est)} vs {len(gt)}")
    if len(est) == 0:
        raise ValueError("timelines must be non-empty")
    drot = gt.rotations - est.rotations  # signed, so centering removes any constant
    dshift = gt.shifts - est.shifts  # vector errors, same reason
    return drot, dshift


def motion_sigma(est: MotionTimeline, gt: MotionTimeline):
    """Gauge-invariant motion errors: centered population std per component.

    Rotation: std of the signed per-view rotation errors.  Shift: root mean
    squared norm of the centered per-view shift-error vectors.  Both are
    exactly invariant under adding one constant triplet to every view of
    the estimate, and both are zero when the estimate equals the ground
    truth plus a constant offset.

    Returns
    -------
    (sigma_rot, sigma_shift) in radians and canonical units.
    """
    drot, dshift = _motion_errors(est, gt)
    sigma_rot = float(np.sqrt(np.mean((drot - drot.mean()) ** 2)))
    centered = dshift - dshift.mean(axis=0)
    sigma_shift = float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))
    return sigma_rot, sigma_shift


def motion_l1(est: MotionTimeline, gt: MotionTimeline):
    """Plain mean absolute errors (NOT gauge-invariant).

    Returns
    -------
    (l1_rot, l1_shift): mean |rotation error| in radians and mean Euclidean
    shift-error norm in canonical units.
    """
    drot, dshift = _motion_errors(est, gt)
    return float(np.mean(np.abs(drot))), float(
        np.mean(np.sqrt(np.sum(dshift**2, axis=1)))
    )


def mean_motion_error(est: MotionTimeline, gt: MotionTimeline) -> MotionTriplet:
    """Mean per-view (est - gt) triplet: the rigid gauge offset estimate."""
    drot, dshift = _motion_errors(est, gt)
    mu = dshift.mean(axis=0)
    return MotionTriplet(float(-np.mean(drot)), float(-mu[0]), float(-mu[1]))


def evaluate(
    recon: np.ndarray,
    gt: np.ndarray,
    est: MotionTimeline,
    gt_motion: MotionTimeline,
) -> EvalReport:
    """Full gauge-aware evaluation of a reconstruction.

    The mean motion error estimates the rigid gauge G between the
    reconstruction and the ground-truth frame (recon(u) ~ gt(G(u))); the
    reconstruction is resampled at G^{-1}(u) before PSNR/SSIM on
    magnitudes.  Motion sigma is reported in degrees / pixels (isotropic
    pixel pitch assumed for the shift conversion).

    Parameters
    ----------
    recon, gt : (h, w) complex or real images on the canonical grid
    est, gt_motion : MotionTimeline (subject-motion convention)
    """
    recon = np.asarray(recon)
    gt = np.asarray(gt)
    if recon.shape != gt.shape:
        raise ValueError(f"image shape mismatch: {recon.shape} vs {gt.shape}")
    # recon(u) ~ gt(A(c_rot) u + c_shift) with c = mean(est - gt), so
    # resampling recon through c as a rigid move lands it on the gt frame.
    c = mean_motion_error(est, gt_motion)
    aligned = _apply_gauge(recon, c)
    rmag = np.abs(aligned)
    gmag = np.abs(gt)
    p = psnr(rmag, gmag)
    s = ssim(rmag, gmag)
    sig_rot, sig_shift = motion_sigma(est, gt_motion)
    l1_rot, l1_shift = motion_l1(est, gt_motion)
    h, w = gt.shape
    px = (h + w) / 4.0  # canonical units -> pixels (2 canonical units = w px)
    return EvalReport(
        psnr_db=p,
        ssim=s,
        sigma_rot_deg=float(rad_to_deg(sig_rot)),
        sigma_shift_px=sig_shift * px,
        l1_rot_deg=float(rad_to_deg(l1_rot)),
        l1_shift_px=l1_shift * px,
        psnr_capped=(p >= PSNR_CAP_DB),
    )


def _apply_gauge(recon: np.ndarray, gauge: MotionTriplet) -> np.ndarray:
    """recon(A(-rot)(u - shift)); exact (no resampling) for the identity."""
    if gauge.rotation == 0.0 and gauge.shift_x == 0.0 and gauge.shift_y == 0.0:
        return recon
    return rigid_resample(recon, gauge)
