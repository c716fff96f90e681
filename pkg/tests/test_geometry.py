"""Canonical-space geometry: rigid maps, rays, grids, resampling."""

import numpy as np
import numpy.testing as npt
import pytest

from radmoco import (
    RAY_EXTENT,
    RHO_MAX,
    CanonicalGrid,
    MotionTimeline,
    MotionTriplet,
    Ray,
    bilinear_sample,
    build_ray,
    canonical_to_mm,
    compose_triplets,
    deg_to_rad,
    gauge_align,
    invert_triplet,
    mm_to_canonical,
    rad_to_deg,
    ray_sample_points,
    rigid_resample,
    rotation_matrix,
    rotation_matrix_derivative,
    spatial_transform,
)


def test_extent_constants():
    # rays span the diameter of the circle circumscribing [-1, 1]^2
    assert RAY_EXTENT == 2.0 * np.sqrt(2.0)
    assert RHO_MAX == np.sqrt(2.0)


@pytest.mark.parametrize(
    "theta,expected",
    [
        (0.0, np.eye(2)),
        (np.pi / 2.0, np.array([[0.0, -1.0], [1.0, 0.0]])),
        (np.pi, np.array([[-1.0, 0.0], [0.0, -1.0]])),
    ],
)
def test_rotation_matrix_values(theta, expected):
    npt.assert_allclose(rotation_matrix(theta), expected, atol=1e-15)


def test_rotation_matrix_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rotation_matrix(rng.uniform(-10, 10))
        npt.assert_allclose(a @ a.T, np.eye(2), atol=1e-15)
        npt.assert_allclose(np.linalg.det(a), 1.0, atol=1e-15)


def test_rotation_matrix_derivative_matches_fd():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(20):
        t = rng.uniform(-3, 3)
        fd = (rotation_matrix(t + h) - rotation_matrix(t - h)) / (2 * h)
        npt.assert_allclose(rotation_matrix_derivative(t), fd, atol=1e-9)


def test_rotation_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        rotation_matrix(np.nan)
    with pytest.raises(ValueError):
        rotation_matrix_derivative(np.inf)


def test_spatial_transform_hand_case():
    # quarter turn sends (1, 0) to (0, 1); then shift by (0.5, -0.25)
    t = MotionTriplet(np.pi / 2.0, 0.5, -0.25)
    out = spatial_transform([1.0, 0.0], t)
    npt.assert_allclose(out, [0.5, 0.75], atol=1e-15)


def test_spatial_transform_batch_matches_loop():
    rng = np.random.default_rng(2)
    t = MotionTriplet(0.7, -0.2, 0.35)
    pts = rng.uniform(-1, 1, size=(4, 5, 2))
    got = spatial_transform(pts, t)
    assert got.shape == pts.shape
    a = rotation_matrix(t.rotation)
    for idx in np.ndindex(4, 5):
        npt.assert_allclose(got[idx], a @ pts[idx] + t.shift, atol=1e-15)


def test_spatial_transform_rejects_bad_points():
    t = MotionTriplet()
    with pytest.raises(ValueError):
        spatial_transform([1.0, 2.0, 3.0], t)
    with pytest.raises(ValueError):
        spatial_transform([np.nan, 0.0], t)


def test_motion_triplet_array_round_trip():
    t = MotionTriplet(0.3, -0.1, 0.2)
    npt.assert_allclose(t.as_array(), [0.3, -0.1, 0.2])
    t2 = MotionTriplet.from_array(t.as_array())
    assert t2 == t
    with pytest.raises(ValueError):
        MotionTriplet(np.inf, 0.0, 0.0)


def test_invert_triplet_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        t = MotionTriplet(*rng.uniform(-1, 1, size=3))
        for comp in (
            compose_triplets(t, invert_triplet(t)),
            compose_triplets(invert_triplet(t), t),
        ):
            npt.assert_allclose(comp.as_array(), [0.0, 0.0, 0.0], atol=1e-15)


def test_compose_matches_pointwise_composition():
    rng = np.random.default_rng(4)
    for _ in range(10):
        outer = MotionTriplet(*rng.uniform(-1, 1, size=3))
        inner = MotionTriplet(*rng.uniform(-1, 1, size=3))
        pts = rng.uniform(-1, 1, size=(7, 2))
        direct = spatial_transform(spatial_transform(pts, inner), outer)
        fused = spatial_transform(pts, compose_triplets(outer, inner))
        npt.assert_allclose(fused, direct, atol=1e-14)


def test_ray_middle_sample_is_perpendicular_foot():
    # odd sample counts place the central sample exactly at rho * (cos, sin)
    ray = build_ray(0.6, 0.4, 9)
    pts = ray.sample_points()
    npt.assert_allclose(pts[4], [0.4 * np.cos(0.6), 0.4 * np.sin(0.6)], atol=1e-15)


def test_ray_sample_geometry():
    rng = np.random.default_rng(5)
    m = 16
    for _ in range(10):
        theta = rng.uniform(0, np.pi)
        rho = rng.uniform(-RHO_MAX, RHO_MAX)
        ray = build_ray(theta, rho, m)
        pts = ray.sample_points()
        assert pts.shape == (m, 2)
        # every sample satisfies the line equation p . n = rho
        n = np.array([np.cos(theta), np.sin(theta)])
        npt.assert_allclose(pts @ n, np.full(m, rho), atol=1e-14)
        # equispaced at cell centers covering length RAY_EXTENT
        d = np.diff(pts, axis=0)
        npt.assert_allclose(
            np.linalg.norm(d, axis=1), np.full(m - 1, ray.step), atol=1e-14
        )
        npt.assert_allclose(ray.step, RAY_EXTENT / m)
        mid = 0.5 * (pts[0] + pts[-1])
        npt.assert_allclose(mid, rho * n, atol=1e-14)


def test_ray_sample_points_batch_matches_single():
    thetas = np.array([0.1, 1.2, 2.9])
    rhos = np.array([-0.5, 0.0, 1.0])
    batch = ray_sample_points(thetas, rhos, 7)
    for i in range(3):
        npt.assert_allclose(
            batch[i], build_ray(thetas[i], rhos[i], 7).sample_points()
        )


def test_ray_validation():
    with pytest.raises(ValueError):
        build_ray(0.0, RHO_MAX + 1e-6, 5)
    with pytest.raises(ValueError):
        build_ray(0.0, 0.0, 0)
    with pytest.raises(ValueError):
        build_ray(np.nan, 0.0, 5)


def test_timeline_round_trip_and_validation():
    tl = MotionTimeline.from_triplets([[0.1, 0.2, 0.3], [-0.4, 0.5, -0.6]])
    npt.assert_allclose(tl.triplets(), [[0.1, 0.2, 0.3], [-0.4, 0.5, -0.6]])
    assert len(tl) == 2
    assert tl.triplet(1) == MotionTriplet(-0.4, 0.5, -0.6)
    ident = MotionTimeline.identity(3)
    npt.assert_allclose(ident.triplets(), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        MotionTimeline(np.zeros(3), np.zeros((2, 2)), np.ones(3, dtype=int))
    with pytest.raises(ValueError):
        MotionTimeline(np.array([np.nan]), np.zeros((1, 2)), np.ones(1, dtype=int))


def test_gauge_align_removes_constant_offset():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = 12
        ref = MotionTimeline(
            rng.uniform(-0.2, 0.2, n),
            rng.uniform(-0.1, 0.1, (n, 2)),
            np.ones(n, dtype=int),
        )
        off = rng.uniform(-0.5, 0.5, size=3)
        est = MotionTimeline(
            ref.rotations + off[0], ref.shifts + off[1:], ref.stage_of_view
        )
        aligned = gauge_align(est, ref)
        # residual means vanish to the last ulp (an exactly-zero mean need
        # not be attainable by any representable constant offset)
        assert abs(np.mean(ref.rotations - aligned.rotations)) < 1e-16
        assert np.all(np.abs(np.mean(ref.shifts - aligned.shifts, axis=0)) < 1e-16)
        npt.assert_allclose(aligned.rotations, ref.rotations, atol=1e-12)
        npt.assert_allclose(aligned.shifts, ref.shifts, atol=1e-12)


def test_gauge_align_exact_on_dyadic_grid():
    # on a coarse power-of-two grid with 8 views every sum is exact, so
    # constant-offset removal recovers the reference bit for bit
    rng = np.random.default_rng(60)
    n = 8
    scale = 2.0**-10
    ref = MotionTimeline(
        rng.integers(-200, 200, n) * scale,
        rng.integers(-200, 200, (n, 2)) * scale,
        np.ones(n, dtype=int),
    )
    off = np.array([96.0, -160.0, 288.0]) * scale
    est = MotionTimeline(
        ref.rotations + off[0], ref.shifts + off[1:], ref.stage_of_view
    )
    aligned = gauge_align(est, ref)
    npt.assert_array_equal(aligned.rotations, ref.rotations)
    npt.assert_array_equal(aligned.shifts, ref.shifts)
    # identity case: aligning a timeline to itself changes nothing
    same = gauge_align(ref, ref)
    npt.assert_array_equal(same.rotations, ref.rotations)
    npt.assert_array_equal(same.shifts, ref.shifts)


def test_gauge_align_idempotent():
    rng = np.random.default_rng(7)
    n = 9
    ref = MotionTimeline(
        rng.normal(size=n), rng.normal(size=(n, 2)), np.ones(n, dtype=int)
    )
    est = MotionTimeline(
        rng.normal(size=n), rng.normal(size=(n, 2)), np.ones(n, dtype=int)
    )
    once = gauge_align(est, ref)
    twice = gauge_align(once, ref)
    npt.assert_array_equal(once.rotations, twice.rotations)
    npt.assert_array_equal(once.shifts, twice.shifts)


def test_gauge_align_length_mismatch():
    with pytest.raises(ValueError):
        gauge_align(MotionTimeline.identity(2), MotionTimeline.identity(3))


def test_canonical_grid_centers():
    g = CanonicalGrid(4, 8)
    assert g.shape == (4, 8)
    npt.assert_allclose(g.pixel_size, (0.5, 0.25))
    # centers are symmetric about the origin and strictly inside [-1, 1]
    npt.assert_allclose(g.xs() + g.xs()[::-1], np.zeros(8), atol=1e-15)
    npt.assert_allclose(g.ys() + g.ys()[::-1], np.zeros(4), atol=1e-15)
    npt.assert_allclose(g.xs()[0], -1.0 + 0.125)
    pts = g.points()
    assert pts.shape == (32, 2)
    # row-major over (row, col): first row scans x at fixed lowest y
    npt.assert_allclose(pts[:8, 1], np.full(8, g.ys()[0]))
    npt.assert_allclose(pts[:8, 0], g.xs())
    with pytest.raises(ValueError):
        CanonicalGrid(1, 8)


def test_bilinear_exact_at_pixel_centers():
    rng = np.random.default_rng(8)
    img = rng.normal(size=(6, 5))
    g = CanonicalGrid(6, 5)
    vals = bilinear_sample(img, g.points()).reshape(6, 5)
    npt.assert_allclose(vals, img, atol=1e-14)


def test_bilinear_matches_four_point_oracle():
    rng = np.random.default_rng(9)
    h, w = 7, 6
    img = rng.normal(size=(h, w))
    g = CanonicalGrid(h, w)
    xs, ys = g.xs(), g.ys()
    for _ in range(50):
        r = rng.integers(0, h - 1)
        c = rng.integers(0, w - 1)
        fy, fx = rng.uniform(0, 1, size=2)
        x = xs[c] + fx * (xs[c + 1] - xs[c])
        y = ys[r] + fy * (ys[r + 1] - ys[r])
        want = (
            (1 - fy) * ((1 - fx) * img[r, c] + fx * img[r, c + 1])
            + fy * ((1 - fx) * img[r + 1, c] + fx * img[r + 1, c + 1])
        )
        npt.assert_allclose(bilinear_sample(img, [x, y]), want, atol=1e-13)


def test_bilinear_zero_outside_square():
    img = np.ones((4, 4))
    far = np.array([[2.0, 0.0], [0.0, -2.0], [1.6, 1.6]])
    npt.assert_allclose(bilinear_sample(img, far), np.zeros(3))


def test_bilinear_complex_image():
    rng = np.random.default_rng(10)
    img = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    pts = rng.uniform(-0.7, 0.7, size=(20, 2))
    got = bilinear_sample(img, pts)
    npt.assert_allclose(got.real, bilinear_sample(img.real, pts), atol=1e-14)
    npt.assert_allclose(got.imag, bilinear_sample(img.imag, pts), atol=1e-14)


def test_rigid_resample_identity():
    rng = np.random.default_rng(11)
    img = rng.normal(size=(8, 8))
    npt.assert_allclose(rigid_resample(img, MotionTriplet()), img, atol=1e-13)


def test_rigid_resample_linear_ramp_oracle():
    # bilinear interpolation reproduces affine functions exactly, so the
    # moved image must equal the ramp evaluated at the back-transformed
    # point wherever the stencil stays inside the square
    rng = np.random.default_rng(12)
    h = w = 32
    g = CanonicalGrid(h, w)
    coef = np.array([0.3, 0.7, -0.4])

    def ramp(p):
        return coef[0] + coef[1] * p[..., 0] + coef[2] * p[..., 1]

    img = ramp(g.points()).reshape(h, w)
    for _ in range(5):
        t = MotionTriplet(rng.uniform(-0.3, 0.3), *rng.uniform(-0.1, 0.1, size=2))
        moved = rigid_resample(img, t)
        src = spatial_transform(g.points(), invert_triplet(t))
        inside = np.all(np.abs(src) <= 0.8, axis=1).reshape(h, w)
        want = ramp(src).reshape(h, w)
        npt.assert_allclose(moved[inside], want[inside], atol=1e-12)


def test_rigid_resample_pure_shift_moves_peak():
    # shifting the subject by exactly one pixel pitch relocates a delta
    h = w = 16
    img = np.zeros((h, w))
    img[8, 8] = 1.0
    dx = 2.0 / w
    moved = rigid_resample(img, MotionTriplet(0.0, dx, 0.0))
    want = np.zeros((h, w))
    want[8, 9] = 1.0
    npt.assert_allclose(moved, want, atol=1e-12)


def test_unit_conversions():
    npt.assert_allclose(deg_to_rad(180.0), np.pi)
    npt.assert_allclose(rad_to_deg(np.pi / 2), 90.0)
    # the canonical square spans the FOV: fov/2 mm = 1 canonical unit
    npt.assert_allclose(mm_to_canonical(110.0, 220.0), 1.0)
    npt.assert_allclose(canonical_to_mm(mm_to_canonical(37.5, 220.0), 220.0), 37.5)
    with pytest.raises(ValueError):
        mm_to_canonical(1.0, 0.0)
    with pytest.raises(ValueError):
        canonical_to_mm(1.0, -5.0)
