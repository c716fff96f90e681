"""DFT/IDFT against direct-sum oracles; spoke <-> projection conversions."""

import numpy as np
import numpy.testing as npt
import pytest

from radmoco import (
    CanonicalGrid,
    ProjectionProfile,
    Spoke,
    direct_spoke,
    kspace_to_projection,
    profile_offsets,
    projection_to_kspace,
    spoke_frequencies,
)
from radmoco.spectral import (
    DETECTOR_EXTENT,
    default_spoke_length,
    dft,
    idft,
    projection_to_kspace_adjoint,
)

LENGTHS = [8, 15, 64, 511]


def dft_direct_sum(x):
    """O(m^2) direct-summation reference: X[k] = sum_n x[n] e^{-2 pi j k n / m}."""
    x = np.asarray(x, dtype=np.complex128)
    m = x.shape[0]
    out = np.zeros(m, dtype=np.complex128)
    n = np.arange(m)
    for k in range(m):
        out[k] = np.sum(x * np.exp(-2j * np.pi * k * n / m))
    return out


def random_complex(rng, m):
    return rng.normal(size=m) + 1j * rng.normal(size=m)


def test_dft_of_impulse_is_flat():
    x = np.zeros(9, dtype=np.complex128)
    x[0] = 1.0
    npt.assert_allclose(dft(x), np.ones(9), atol=1e-12)


def test_dft_of_constant_concentrates_at_dc():
    c = 0.7 - 0.2j
    x = np.full(11, c)
    want = np.zeros(11, dtype=np.complex128)
    want[0] = 11 * c
    npt.assert_allclose(dft(x), want, atol=1e-12)


@pytest.mark.parametrize("m", LENGTHS)
def test_dft_matches_direct_sum_oracle(m):
    rng = np.random.default_rng(m)
    for _ in range(3):
        x = random_complex(rng, m)
        npt.assert_allclose(dft(x), dft_direct_sum(x), atol=1e-9)


@pytest.mark.parametrize("m", LENGTHS)
def test_idft_round_trip_identity(m):
    rng = np.random.default_rng(100 + m)
    x = random_complex(rng, m)
    npt.assert_allclose(idft(dft(x)), x, atol=1e-12)
    npt.assert_allclose(dft(idft(x)), x, atol=1e-12)


def test_idft_of_flat_spectrum_is_impulse():
    want = np.zeros(9, dtype=np.complex128)
    want[0] = 1.0
    npt.assert_allclose(idft(np.ones(9)), want, atol=1e-13)


@pytest.mark.parametrize("m", LENGTHS)
def test_idft_conjugation_identity(m):
    rng = np.random.default_rng(200 + m)
    x = random_complex(rng, m)
    npt.assert_allclose(idft(x), np.conj(dft(np.conj(x))) / m, atol=1e-12)


@pytest.mark.parametrize("m", LENGTHS)
def test_parseval(m):
    rng = np.random.default_rng(300 + m)
    x = random_complex(rng, m)
    lhs = np.sum(np.abs(dft(x)) ** 2)
    rhs = m * np.sum(np.abs(x) ** 2)
    assert abs(lhs - rhs) <= 1e-9 * rhs


def test_dft_validation():
    with pytest.raises(ValueError):
        dft(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        idft(np.array([]))


def test_spoke_frequencies_centered():
    m = 7
    w = spoke_frequencies(m)
    npt.assert_allclose(w, (np.arange(7) - 3) / DETECTOR_EXTENT)
    assert w[3] == 0.0  # DC at the middle index
    npt.assert_allclose(w + w[::-1], np.zeros(m), atol=1e-18)
    with pytest.raises(ValueError):
        spoke_frequencies(8)


def test_profile_offsets_centered():
    m = 9
    rho = profile_offsets(m)
    assert rho[4] == 0.0
    npt.assert_allclose(np.diff(rho), np.full(m - 1, DETECTOR_EXTENT / m))
    # offsets times frequencies form the inverse-grid pairing k*l/m
    w = spoke_frequencies(m)
    npt.assert_allclose(
        np.outer(rho, w),
        np.outer(np.arange(m) - 4, np.arange(m) - 4) / m,
        atol=1e-15,
    )
    with pytest.raises(ValueError):
        profile_offsets(4)


@pytest.mark.parametrize("size,want", [(64, 91), (32, 47), (16, 23)])
def test_default_spoke_length_smallest_odd(size, want):
    m = default_spoke_length(size)
    assert m == want
    assert m % 2 == 1 and m >= np.sqrt(2) * size
    assert m - 2 < np.sqrt(2) * size  # smallest such odd integer


def test_spoke_and_profile_validation():
    with pytest.raises(ValueError):
        Spoke(0.0, np.zeros(4))  # even length
    with pytest.raises(ValueError):
        ProjectionProfile(0.0, np.zeros(1))  # too short
    s = Spoke(0.3, np.zeros(5))
    assert s.m == 5 and s.samples.dtype == np.complex128


def test_kspace_to_projection_zero():
    prof = kspace_to_projection(Spoke(0.1, np.zeros(11)))
    npt.assert_array_equal(prof.samples, np.zeros(11))
    assert prof.view_angle == 0.1


@pytest.mark.parametrize("m", [9, 15, 91])
def test_spoke_profile_round_trip(m):
    rng = np.random.default_rng(400 + m)
    k = random_complex(rng, m)
    spoke = Spoke(0.7, k)
    back = projection_to_kspace(kspace_to_projection(spoke))
    npt.assert_allclose(back.samples, k, atol=1e-12)
    g = random_complex(rng, m)
    prof = ProjectionProfile(0.7, g)
    back2 = kspace_to_projection(projection_to_kspace(prof))
    npt.assert_allclose(back2.samples, g, atol=1e-12)


def test_projection_to_kspace_matches_permutation_oracle():
    # composed-permutation oracle: scale * shift(dft(ishift(g))) written as
    # an explicit index-by-index direct sum
    rng = np.random.default_rng(5)
    m = 15
    g = random_complex(rng, m)
    spoke = projection_to_kspace(ProjectionProfile(0.0, g))
    c = (m - 1) // 2
    want = np.zeros(m, dtype=np.complex128)
    for k in range(-c, c + 1):
        acc = 0.0
        for l in range(-c, c + 1):
            acc += g[l + c] * np.exp(-2j * np.pi * k * l / m)
        want[k + c] = (DETECTOR_EXTENT / m) * acc
    npt.assert_allclose(spoke.samples, want, atol=1e-12)


def test_kspace_to_projection_matches_integral_discretization():
    # g(rho_l) ~ (1/R) sum_k K_k e^{+2 pi j omega_k rho_l}
    rng = np.random.default_rng(6)
    m = 9
    k = random_complex(rng, m)
    prof = kspace_to_projection(Spoke(0.0, k))
    omega = spoke_frequencies(m)
    rho = profile_offsets(m)
    want = np.array(
        [np.sum(k * np.exp(2j * np.pi * omega * r)) / DETECTOR_EXTENT for r in rho]
    )
    npt.assert_allclose(prof.samples, want, atol=1e-12)


def test_projection_to_kspace_adjoint_inner_product():
    # real inner product <K g, u> = <g, K^H u> for the packed real/imag view
    rng = np.random.default_rng(7)
    m = 15
    for _ in range(10):
        g = random_complex(rng, m)
        u = random_complex(rng, m)
        kg = projection_to_kspace(ProjectionProfile(0.0, g)).samples
        khu = projection_to_kspace_adjoint(u, m)
        lhs = np.vdot(u, kg).real
        rhs = np.vdot(khu, g).real
        npt.assert_allclose(lhs, rhs, rtol=1e-12)
    with pytest.raises(ValueError):
        projection_to_kspace_adjoint(np.zeros(5, dtype=complex), 7)


def test_direct_spoke_zero_image():
    spoke = direct_spoke(np.zeros((8, 8)), 0.4, 9)
    npt.assert_array_equal(spoke.samples, np.zeros(9))


def test_direct_spoke_point_source_flat_modulus():
    img = np.zeros((16, 16))
    img[7, 11] = 1.0
    spoke = direct_spoke(img, 0.9, 23)
    area = (2.0 / 16) ** 2
    npt.assert_allclose(np.abs(spoke.samples), np.full(23, area), atol=1e-15)
    # phase encodes the pixel position along the view direction
    g = CanonicalGrid(16, 16)
    t = g.xs()[11] * np.cos(0.9) + g.ys()[7] * np.sin(0.9)
    want = area * np.exp(-2j * np.pi * spoke_frequencies(23) * t)
    npt.assert_allclose(spoke.samples, want, atol=1e-15)


def test_direct_spoke_matches_loop_oracle():
    rng = np.random.default_rng(8)
    img = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
    theta, m = 1.234, 7
    spoke = direct_spoke(img, theta, m)
    grid = CanonicalGrid(6, 5)
    xs, ys = grid.xs(), grid.ys()
    omega = spoke_frequencies(m)
    area = (2.0 / 6) * (2.0 / 5)
    want = np.zeros(m, dtype=np.complex128)
    for k in range(m):
        for r in range(6):
            for c in range(5):
                t = xs[c] * np.cos(theta) + ys[r] * np.sin(theta)
                want[k] += img[r, c] * np.exp(-2j * np.pi * omega[k] * t) * area
    npt.assert_allclose(spoke.samples, want, atol=1e-13)


def test_direct_spoke_conjugate_symmetry_for_real_images():
    rng = np.random.default_rng(9)
    img = rng.normal(size=(12, 12))
    spoke = direct_spoke(img, 0.33, 15)
    npt.assert_allclose(
        spoke.samples[::-1], np.conj(spoke.samples), atol=1e-10
    )


def test_direct_spoke_linear_in_image():
    rng = np.random.default_rng(10)
    a = rng.normal(size=(8, 8))
    b = rng.normal(size=(8, 8))
    sa = direct_spoke(a, 0.2, 11).samples
    sb = direct_spoke(b, 0.2, 11).samples
    sab = direct_spoke(a + 2.0 * b, 0.2, 11).samples
    npt.assert_allclose(sab, sa + 2.0 * sb, atol=1e-13)
