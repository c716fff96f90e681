"""Tests for binary containers, versioned CSVs, and checkpoints."""

import hashlib

import numpy as np
import numpy.testing as npt
import pytest

from radmoco import (
    AcquisitionSpec,
    EvalReport,
    MotionTimeline,
    ProjectionSet,
    RadialKSpace,
    TrainConfig,
    simulate_dataset,
    train,
)
from radmoco.fileio import (
    load_checkpoint,
    read_dataset,
    read_image,
    read_metrics_csv,
    read_motion_csv,
    read_train_log,
    save_checkpoint,
    write_dataset,
    write_image,
    write_metrics_csv,
    write_motion_csv,
    write_pgm,
    write_train_log,
)
from radmoco.hashgrid import HashGridConfig
from radmoco.training import to_projection_set


@pytest.fixture(scope="module")
def small_kspace():
    spec = AcquisitionSpec(image_size=16, n_views=10, n_stages=2, beta=3.0,
                           af=1, seed=5, phase_mode="smooth", noise_std=0.01)
    kspace, _, _ = simulate_dataset(spec)
    return kspace


def assert_timelines_equal(a, b):
    npt.assert_array_equal(a.rotations, b.rotations)
    npt.assert_array_equal(a.shifts, b.shifts)
    npt.assert_array_equal(a.stage_of_view, b.stage_of_view)


class TestDatasetContainer:
    def test_kspace_round_trip_bit_exact(self, small_kspace, tmp_path):
        path = tmp_path / "d.monr"
        write_dataset(path, small_kspace)
        back = read_dataset(path)
        assert isinstance(back, RadialKSpace)
        npt.assert_array_equal(back.spokes, small_kspace.spokes)
        npt.assert_array_equal(back.angles, small_kspace.angles)
        npt.assert_array_equal(back.stage_ids, small_kspace.stage_ids)
        assert back.fov_mm == small_kspace.fov_mm
        assert tuple(back.image_shape) == tuple(small_kspace.image_shape)
        assert_timelines_equal(back.gt_motion, small_kspace.gt_motion)

    def test_projection_round_trip_bit_exact(self, small_kspace, tmp_path):
        ps = to_projection_set(small_kspace)
        path = tmp_path / "p.monr"
        write_dataset(path, ps)
        back = read_dataset(path)
        assert isinstance(back, ProjectionSet)
        npt.assert_array_equal(back.profiles, ps.profiles)
        npt.assert_array_equal(back.angles, ps.angles)

    def test_round_trip_without_gt_motion(self, small_kspace, tmp_path):
        bare = RadialKSpace(
            angles=small_kspace.angles,
            stage_ids=small_kspace.stage_ids,
            spokes=small_kspace.spokes,
            fov_mm=small_kspace.fov_mm,
            image_shape=small_kspace.image_shape,
            gt_motion=None,
        )
        path = tmp_path / "bare.monr"
        write_dataset(path, bare)
        assert read_dataset(path).gt_motion is None

    def test_identical_writes_are_byte_identical(self, small_kspace, tmp_path):
        a, b = tmp_path / "a.monr", tmp_path / "b.monr"
        write_dataset(a, small_kspace)
        write_dataset(b, small_kspace)
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_wrong_container_kind(self, small_kspace, tmp_path):
        dpath, ipath = tmp_path / "d.monr", tmp_path / "i.monr"
        write_dataset(dpath, small_kspace)
        write_image(ipath, np.ones((8, 8), dtype=np.complex128))
        with pytest.raises(ValueError, match="image container"):
            read_dataset(ipath)
        with pytest.raises(ValueError, match="dataset"):
            read_image(dpath)

    @pytest.mark.parametrize("where", ["header", "records", "payload", "trailer"])
    def test_single_flipped_byte_is_detected(self, small_kspace, tmp_path, where):
        path = tmp_path / "d.monr"
        write_dataset(path, small_kspace)
        raw = bytearray(path.read_bytes())
        pos = {
            "header": 20,              # image-rows field
            "records": 48,             # first view angle
            "payload": len(raw) // 2,  # somewhere inside the samples
            "trailer": len(raw) - 1,   # checksum itself
        }[where]
        raw[pos] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="checksum"):
            read_dataset(path)

    def test_truncated_file_is_detected(self, small_kspace, tmp_path):
        path = tmp_path / "d.monr"
        write_dataset(path, small_kspace)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 7])
        with pytest.raises(ValueError):
            read_dataset(path)

    def test_rejects_bad_magic_with_valid_checksum(self, small_kspace, tmp_path):
        # re-sign the tampered body so only the magic check can fire
        path = tmp_path / "d.monr"
        write_dataset(path, small_kspace)
        body = bytearray(path.read_bytes()[:-32])
        body[:4] = b"XXXX"
        path.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())
        with pytest.raises(ValueError, match="magic"):
            read_dataset(path)

    def test_rejects_unsupported_version(self, small_kspace, tmp_path):
        path = tmp_path / "d.monr"
        write_dataset(path, small_kspace)
        body = bytearray(path.read_bytes()[:-32])
        body[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())
        with pytest.raises(ValueError, match="version"):
            read_dataset(path)


class TestImageContainer:
    def test_complex_image_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = rng.normal(size=(12, 9)) + 1j * rng.normal(size=(12, 9))
        path = tmp_path / "i.monr"
        write_image(path, img, fov_mm=48.0)
        back, fov = read_image(path)
        npt.assert_array_equal(back, img)
        assert back.shape == (12, 9)
        assert fov == 48.0

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError, match="2D"):
            write_image(tmp_path / "i.monr", np.ones((2, 3, 4)))


class TestMotionCsv:
    def test_round_trip_is_lossless(self, small_kspace, tmp_path):
        path = tmp_path / "m.csv"
        write_motion_csv(path, small_kspace.gt_motion)
        assert_timelines_equal(read_motion_csv(path), small_kspace.gt_motion)

    def test_rejects_missing_schema_line(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("view,stage,rot_rad,shift_x_can,shift_y_can\n0,1,0,0,0\n")
        with pytest.raises(ValueError, match="schema"):
            read_motion_csv(path)

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# schema=motion-v1\nview,rot\n0,0\n")
        with pytest.raises(ValueError, match="header"):
            read_motion_csv(path)

    def test_rejects_out_of_order_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(
            "# schema=motion-v1\nview,stage,rot_rad,shift_x_can,shift_y_can\n"
            "1,1,0,0,0\n"
        )
        with pytest.raises(ValueError, match="row"):
            read_motion_csv(path)


class TestTrainLogCsv:
    def test_round_trip(self, tmp_path):
        history = [(0, 1.5, 1e-3, 4.0), (1, 0.75, 1e-3, 4.25)]
        path = tmp_path / "log.csv"
        write_train_log(path, history)
        assert read_train_log(path) == history


class TestMetricsCsv:
    def test_round_trip(self, tmp_path):
        report = EvalReport(psnr_db=23.456, ssim=0.87, sigma_rot_deg=0.12,
                            sigma_shift_px=0.34, l1_rot_deg=1.2, l1_shift_px=2.1,
                            psnr_capped=False)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, report)
        back = read_metrics_csv(path)
        assert back == {
            "psnr_db": 23.456, "ssim": 0.87, "sigma_rot_deg": 0.12,
            "sigma_shift_px": 0.34, "l1_rot_deg": 1.2, "l1_shift_px": 2.1,
            "psnr_capped": False,
        }


class TestPgm:
    def test_header_and_value_mapping(self, tmp_path):
        img = np.array([[0.0, 0.5], [1.0, 2.0]])
        path = tmp_path / "p.pgm"
        write_pgm(path, img)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n2 2\n255\n")
        pixels = np.frombuffer(raw[len(b"P5\n2 2\n255\n"):], dtype=np.uint8)
        npt.assert_array_equal(pixels, [0, 64, 128, 255])  # min-max scaled

    def test_constant_image_maps_to_zeros(self, tmp_path):
        path = tmp_path / "c.pgm"
        write_pgm(path, np.full((3, 3), 7.0))
        pixels = np.frombuffer(path.read_bytes()[len(b"P5\n3 3\n255\n"):],
                               dtype=np.uint8)
        npt.assert_array_equal(pixels, 0)


class TestCheckpoint:
    def test_round_trip_restores_model_state(self, small_kspace, tmp_path):
        cfg = TrainConfig(epochs=4, seed=1, motion_fit_fraction=0.75)
        hc = HashGridConfig(levels=4, table_size=1 << 8)
        result = train(small_kspace, cfg, hc, mlp_width=8)
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, result.state)
        back = load_checkpoint(path)
        assert back.config == cfg
        assert back.hash_config == hc
        assert back.step == result.state.step
        assert back.masks.lam == result.state.masks.lam
        npt.assert_array_equal(back.motion_raw, result.state.motion_raw)
        npt.assert_array_equal(back.mlp.w1, result.state.mlp.w1)
        npt.assert_array_equal(back.mlp.b2, result.state.mlp.b2)
        for ta, tb in zip(back.grid.tables, result.state.grid.tables):
            npt.assert_array_equal(ta, tb)
