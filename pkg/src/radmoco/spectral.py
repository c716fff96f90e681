"""Discrete spectral transforms linking k-space spokes and projection profiles.

A spoke is the continuous 2D Fourier transform of the image sampled along
one direction:

    k(theta, omega) = integral f(x, y) exp(-2 pi j omega (x cos + y sin)) dx dy

sampled at m (odd) centered frequencies omega_k = k / R with
k = -(m-1)/2 .. (m-1)/2 and R the detector extent.  The detector spans the
same 2*sqrt(2) canonical units as the rays (the diameter of the circle
circumscribing the canonical square), so frequencies land on the inverse
grid of the rho bins and the spoke <-> profile conversions are exact
inverses of each other.

The projection profile is the central slice mapped to the spatial domain:
g(theta, rho) = integral k(theta, omega) exp(+2 pi j omega rho) d omega,
discretized as a centered inverse DFT times the frequency step 1/R.  The
DC sample sits at the middle index (m-1)/2 in both domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RAY_EXTENT, CanonicalGrid

DETECTOR_EXTENT = RAY_EXTENT  # 2*sqrt(2) canonical units


def _check_odd_length(x) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 1 or a.shape[0] < 3 or a.shape[0] % 2 == 0:
        raise ValueError(f"expected an odd-length 1D array of length >= 3, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Spoke:
    """One k-space spoke: view angle plus m centered frequency samples."""

    view_angle: float
    samples: np.ndarray  # (m,) complex128, DC at index (m-1)//2

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.complex128)
        )
        _check_odd_length(self.samples)

    @property
    def m(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class ProjectionProfile:
    """One projection-domain profile: view angle plus m centered rho samples."""

    view_angle: float
    samples: np.ndarray  # (m,) complex128, rho=0 at index (m-1)//2

    def __post_init__(self):
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.complex128)
        )
        _check_odd_length(self.samples)

    @property
    def m(self) -> int:
        return self.samples.shape[0]


def spoke_frequencies(m: int) -> np.ndarray:
    """Centered spoke frequencies omega_k = k / DETECTOR_EXTENT, shape (m,)."""
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be odd and >= 3, got {m}")
    k = np.arange(m) - (m - 1) // 2
    return k / DETECTOR_EXTENT


def profile_offsets(m: int) -> np.ndarray:
    """Centered rho bin centers, spacing DETECTOR_EXTENT / m, shape (m,)."""
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be odd and >= 3, got {m}")
    k = np.arange(m) - (m - 1) // 2
    return k * (DETECTOR_EXTENT / m)


def default_spoke_length(image_size: int) -> int:
    """Desk default m: the smallest odd integer >= sqrt(2) * image_size."""
    m = int(np.ceil(np.sqrt(2.0) * image_size))
    return m if m % 2 == 1 else m + 1


def dft(x) -> np.ndarray:
    """Unnormalized forward DFT of arbitrary length.

    X[n] = sum_p x[p] exp(-2 pi j n p / m).  Matches the direct summation
    definition to floating-point accuracy for any length, prime or not.
    """
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty 1D array, got shape {a.shape}")
    return np.fft.fft(a)


def idft(X) -> np.ndarray:
    """Inverse DFT carrying the 1/m factor: x[p] = (1/m) sum X[n] exp(+2 pi j n p / m)."""
    a = np.asarray(X, dtype=np.complex128)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty 1D array, got shape {a.shape}")
    return np.fft.ifft(a)


def kspace_to_projection(spoke: Spoke) -> ProjectionProfile:
    """Central-slice inversion: centered spoke -> centered projection profile.

    Discretizes g(rho) = integral k(omega) exp(+2 pi j omega rho) d omega as
    a Riemann sum with step 1/R over the m centered frequencies, which is a
    centered inverse DFT scaled by m/R.
    """
    k = spoke.samples
    g = (spoke.m / DETECTOR_EXTENT) * np.fft.fftshift(idft(np.fft.ifftshift(k)))
    return ProjectionProfile(spoke.view_angle, g)


def projection_to_kspace(profile: ProjectionProfile) -> Spoke:
    """Exact inverse of `kspace_to_projection`."""
    g = profile.samples
    k = (DETECTOR_EXTENT / profile.m) * np.fft.fftshift(dft(np.fft.ifftshift(g)))
    return Spoke(profile.view_angle, k)


def projection_to_kspace_adjoint(upstream: np.ndarray, m: int) -> np.ndarray:
    """Adjoint (conjugate transpose) of the linear map `projection_to_kspace`.

    Backpropagates a k-space gradient vector onto the projection profile:
    for complex-linear K = c * S_f D S_i, the packed real/imag gradient maps
    through K^H = c * S_i^T D^H S_f^T with D^H = m * IDFT.
    """
    u = np.asarray(upstream, dtype=np.complex128)
    if u.shape != (m,):
        raise ValueError(f"upstream must have shape ({m},), got {u.shape}")
    return DETECTOR_EXTENT * np.fft.fftshift(idft(np.fft.ifftshift(u)))


def direct_spoke(image: np.ndarray, theta: float, m: int) -> Spoke:
    """Brute-force spoke acquisition straight from the Fourier integral.

    Approximates the continuous transform by the pixel-center Riemann sum

        k(omega) = sum_pixels f[r, c] exp(-2 pi j omega t_rc) * dA,

    with t_rc = x_c cos(theta) + y_r sin(theta) and dA the pixel area.

    Parameters
    ----------
    image : ndarray (h, w), real or complex, on the canonical grid
    theta : float, view angle in radians
    m : int, odd spoke length

    Returns
    -------
    Spoke
    """
    img = np.asarray(image, dtype=np.complex128)
    if img.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {img.shape}")
    grid = CanonicalGrid(*img.shape)
    pts = grid.points()
    t = pts[:, 0] * np.cos(theta) + pts[:, 1] * np.sin(theta)  # (h*w,)
    omega = spoke_frequencies(m)
    phase = np.exp(-2j * np.pi * np.outer(omega, t))  # (m, h*w)
    area = (2.0 / img.shape[0]) * (2.0 / img.shape[1])
    samples = phase @ img.ravel() * area
    return Spoke(float(theta), samples)
