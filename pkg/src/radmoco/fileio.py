"""File formats: MONR binary containers, versioned CSVs, PGM previews.

MONR layout (all integers and floats little-endian):

    offset  size  field
    0       4     magic b"MONR"
    4       4     u32 format version (currently 1)
    8       4     u32 kind: 0 = kspace, 1 = projection, 2 = image
    12      4     u32 byte-order marker 0x01020304 (rejects foreign order)
    16      4     u32 flags (bit 0: ground-truth motion block present)
    20      4     u32 image rows
    24      4     u32 image cols
    28      8     f64 field of view, millimeters
    36      4     u32 view count n (0 for kind=image)
    40      4     u32 spoke length m (0 for kind=image)
    44      12n   per-view records: f64 view angle (radians), u32 stage id
    --      16P   payload: P complex values as interleaved f64 (re, im);
                  P = n*m for kspace/projection, rows*cols for image
    --      24n   optional motion block: f64 rotation, f64 shift_x,
                  f64 shift_y per view (present iff flags bit 0)
    end-32  32    SHA-256 of every preceding byte

Every file is self-describing and platform-independent; readers verify
magic, version, byte order, payload size, and the checksum.  CSV files
carry a "# schema=<name>-v1" version line above the header row.  All
writes are atomic (temp file in the target directory, then rename).
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import io
import os
import struct

import numpy as np

from .geometry import MotionTimeline
from .hashgrid import HashGrid, HashGridConfig, MaskState
from .mlp import MlpParams
from .simulate import ProjectionSet, RadialKSpace
from .training import ModelState, TrainConfig

MONR_MAGIC = b"MONR"
MONR_VERSION = 1
BYTE_ORDER_MARKER = 0x01020304
KIND_KSPACE, KIND_PROJECTION, KIND_IMAGE = 0, 1, 2
FLAG_GT_MOTION = 1

_HEADER = struct.Struct("<4sIIIIIIdII")  # up to and including spoke length
_RECORD_DTYPE = np.dtype([("theta", "<f8"), ("stage", "<u4")])


def _atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.remove(tmp)


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _complex_payload(values: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(values, dtype=np.complex128).reshape(-1)
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return inter.tobytes()


def _payload_complex(data: bytes, count: int) -> np.ndarray:
    inter = np.frombuffer(data, dtype="<f8", count=2 * count)
    return (inter[0::2] + 1j * inter[1::2]).astype(np.complex128)


def _encode_monr(kind, image_shape, fov_mm, angles, stages, payload, gt_motion):
    n = 0 if angles is None else int(angles.shape[0])
    m = 0 if n == 0 else int(payload.shape[-1])
    flags = FLAG_GT_MOTION if gt_motion is not None else 0
    parts = [
        _HEADER.pack(
            MONR_MAGIC,
            MONR_VERSION,
            kind,
            BYTE_ORDER_MARKER,
            flags,
            int(image_shape[0]),
            int(image_shape[1]),
            float(fov_mm),
            n,
            m,
        )
    ]
    if n:
        records = np.empty(n, dtype=_RECORD_DTYPE)
        records["theta"] = angles
        records["stage"] = stages
        parts.append(records.tobytes())
    parts.append(_complex_payload(payload))
    if gt_motion is not None:
        block = np.empty((n, 3), dtype="<f8")
        block[:, 0] = gt_motion.rotations
        block[:, 1:] = gt_motion.shifts
        parts.append(block.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def _decode_monr(data: bytes) -> dict:
    if len(data) < _HEADER.size + 32:
        raise ValueError("file too short to be a MONR container")
    body, trailer = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != trailer:
        raise ValueError("MONR checksum mismatch: file is corrupt or truncated")
    magic, version, kind, marker, flags, rows, cols, fov_mm, n, m = _HEADER.unpack_from(
        body, 0
    )
    if magic != MONR_MAGIC:
        raise ValueError(f"bad magic {magic!r}; not a MONR file")
    if version != MONR_VERSION:
        raise ValueError(f"unsupported MONR version {version}")
    if marker != BYTE_ORDER_MARKER:
        raise ValueError("byte-order marker mismatch")
    if kind not in (KIND_KSPACE, KIND_PROJECTION, KIND_IMAGE):
        raise ValueError(f"unknown MONR kind {kind}")
    offset = _HEADER.size
    angles = stages = None
    if n:
        records = np.frombuffer(body, dtype=_RECORD_DTYPE, count=n, offset=offset)
        angles = records["theta"].astype(np.float64)
        stages = records["stage"].astype(np.int64)
        offset += n * _RECORD_DTYPE.itemsize
    count = n * m if kind != KIND_IMAGE else rows * cols
    expected = offset + 16 * count + (24 * n if flags & FLAG_GT_MOTION else 0)
    if len(body) != expected:
        raise ValueError(
            f"payload size mismatch: header implies {expected} body bytes, "
            f"found {len(body)}"
        )
    payload = _payload_complex(body[offset:], count)
    offset += 16 * count
    gt_motion = None
    if flags & FLAG_GT_MOTION:
        block = np.frombuffer(body, dtype="<f8", count=3 * n, offset=offset)
        block = block.reshape(n, 3)
        gt_motion = MotionTimeline(block[:, 0].copy(), block[:, 1:].copy(), stages)
    return {
        "kind": kind,
        "image_shape": (rows, cols),
        "fov_mm": fov_mm,
        "angles": angles,
        "stages": stages,
        "payload": payload,
        "gt_motion": gt_motion,
        "n": n,
        "m": m,
    }


def write_dataset(path, dataset) -> None:
    """Write a RadialKSpace or ProjectionSet as a MONR container."""
    if isinstance(dataset, RadialKSpace):
        kind, values = KIND_KSPACE, dataset.spokes
    elif isinstance(dataset, ProjectionSet):
        kind, values = KIND_PROJECTION, dataset.profiles
    else:
        raise TypeError(f"unsupported dataset type {type(dataset).__name__}")
    _atomic_write_bytes(
        path,
        _encode_monr(
            kind,
            dataset.image_shape,
            dataset.fov_mm,
            dataset.angles,
            dataset.stage_ids,
            values,
            dataset.gt_motion,
        ),
    )


def read_dataset(path):
    """Read a MONR dataset; returns RadialKSpace or ProjectionSet."""
    with open(path, "rb") as fh:
        info = _decode_monr(fh.read())
    if info["kind"] == KIND_IMAGE:
        raise ValueError("expected a dataset file, found an image container")
    cls = RadialKSpace if info["kind"] == KIND_KSPACE else ProjectionSet
    values = info["payload"].reshape(info["n"], info["m"])
    return cls(
        angles=info["angles"],
        stage_ids=info["stages"],
        **{"spokes" if cls is RadialKSpace else "profiles": values},
        fov_mm=info["fov_mm"],
        image_shape=info["image_shape"],
        gt_motion=info["gt_motion"],
    )


def write_image(path, image: np.ndarray, fov_mm: float = 0.0) -> None:
    """Write a complex image as a MONR container (kind=image)."""
    img = np.asarray(image, dtype=np.complex128)
    if img.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {img.shape}")
    _atomic_write_bytes(
        path, _encode_monr(KIND_IMAGE, img.shape, fov_mm, None, None, img, None)
    )


def read_image(path):
    """Read a MONR image container; returns (image, fov_mm)."""
    with open(path, "rb") as fh:
        info = _decode_monr(fh.read())
    if info["kind"] != KIND_IMAGE:
        raise ValueError("expected an image container, found a dataset file")
    return info["payload"].reshape(info["image_shape"]), info["fov_mm"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_motion_csv(path, timeline: MotionTimeline) -> None:
    """Per-view motion triplets; radians and canonical units (lossless)."""
    lines = ["# schema=motion-v1", "view,stage,rot_rad,shift_x_can,shift_y_can"]
    for i in range(len(timeline)):
        lines.append(
            f"{i},{int(timeline.stage_of_view[i])},{_fmt(timeline.rotations[i])},"
            f"{_fmt(timeline.shifts[i, 0])},{_fmt(timeline.shifts[i, 1])}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _read_csv_rows(path, schema: str, header: str):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    content = [ln for ln in lines if ln.strip()]
    if not content or content[0].strip() != f"# schema={schema}":
        raise ValueError(f"{path}: missing '# schema={schema}' version line")
    rows = [ln for ln in content[1:] if not ln.lstrip().startswith("#")]
    if not rows or rows[0].strip() != header:
        raise ValueError(f"{path}: expected header {header!r}")
    return [row.split(",") for row in rows[1:]]


def read_motion_csv(path) -> MotionTimeline:
    """Read a motion-v1 CSV back into a MotionTimeline."""
    rows = _read_csv_rows(path, "motion-v1", "view,stage,rot_rad,shift_x_can,shift_y_can")
    if not rows:
        raise ValueError(f"{path}: no motion rows")
    n = len(rows)
    rotations = np.empty(n)
    shifts = np.empty((n, 2))
    stages = np.empty(n, dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != 5 or int(row[0]) != i:
            raise ValueError(f"{path}: malformed row {i}: {row}")
        stages[i] = int(row[1])
        rotations[i] = float(row[2])
        shifts[i] = (float(row[3]), float(row[4]))
    return MotionTimeline(rotations, shifts, stages)


def write_train_log(path, history) -> None:
    """Per-epoch optimization log (epoch, loss, lr, lambda)."""
    lines = ["# schema=trainlog-v1", "epoch,loss,lr,lambda"]
    for epoch, loss_val, lr, lam in history:
        lines.append(f"{int(epoch)},{_fmt(loss_val)},{_fmt(lr)},{_fmt(lam)}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_train_log(path):
    """Read a trainlog-v1 CSV; returns a list of (epoch, loss, lr, lambda)."""
    rows = _read_csv_rows(path, "trainlog-v1", "epoch,loss,lr,lambda")
    return [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in rows]


METRICS_HEADER = "psnr_db,ssim,sigma_rot_deg,sigma_shift_px,l1_rot_deg,l1_shift_px,psnr_capped"


def write_metrics_csv(path, report) -> None:
    """One EvalReport row with the documented column order."""
    line = ",".join(
        [
            _fmt(report.psnr_db),
            _fmt(report.ssim),
            _fmt(report.sigma_rot_deg),
            _fmt(report.sigma_shift_px),
            _fmt(report.l1_rot_deg),
            _fmt(report.l1_shift_px),
            "true" if report.psnr_capped else "false",
        ]
    )
    _atomic_write_text(
        path, "\n".join(["# schema=metrics-v1", METRICS_HEADER, line]) + "\n"
    )


def read_metrics_csv(path) -> dict:
    """Read a metrics-v1 CSV into a column -> value dict."""
    rows = _read_csv_rows(path, "metrics-v1", METRICS_HEADER)
    if len(rows) != 1:
        raise ValueError(f"{path}: expected exactly one metrics row")
    row = rows[0]
    names = METRICS_HEADER.split(",")
    out = {name: float(v) for name, v in zip(names[:-1], row[:-1])}
    out["psnr_capped"] = row[-1].strip() == "true"
    return out


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit magnitude preview, min-max normalized; human inspection only."""
    mag = np.abs(np.asarray(image))
    if mag.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {mag.shape}")
    lo, hi = float(mag.min()), float(mag.max())
    if hi > lo:
        scaled = np.round((mag - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(mag)
    h, w = mag.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    _atomic_write_bytes(path, header + scaled.astype(np.uint8).tobytes())


def save_checkpoint(path, state: ModelState) -> None:
    """Model state as an .npz archive (tables, MLP, motion, schedule)."""
    arrays = {f"table_{i:02d}": t for i, t in enumerate(state.grid.tables)}
    arrays.update(
        w1=state.mlp.w1,
        b1=state.mlp.b1,
        w2=state.mlp.w2,
        b2=state.mlp.b2,
        motion_raw=state.motion_raw,
        lam=np.float64(state.masks.lam),
        step=np.int64(state.step),
        config_json=np.frombuffer(
            json.dumps(
                {
                    "train": state.config.__dict__,
                    "hash": state.hash_config.__dict__,
                }
            ).encode("utf-8"),
            dtype=np.uint8,
        ),
    )
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    _atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path) -> ModelState:
    """Restore a ModelState written by save_checkpoint."""
    with np.load(path) as data:
        cfg = json.loads(data["config_json"].tobytes().decode("utf-8"))
        hash_config = HashGridConfig(**cfg["hash"])
        config = TrainConfig(**cfg["train"])
        tables = [
            data[f"table_{i:02d}"].astype(np.float64)
            for i in range(hash_config.levels)
        ]
        grid = HashGrid(hash_config, tables)
        masks = MaskState.for_lambda(hash_config, float(data["lam"]))
        mlp = MlpParams(
            data["w1"].astype(np.float64),
            data["b1"].astype(np.float64),
            data["w2"].astype(np.float64),
            data["b2"].astype(np.float64),
        )
        return ModelState(
            grid=grid,
            masks=masks,
            mlp=mlp,
            motion_raw=data["motion_raw"].astype(np.float64),
            step=int(data["step"]),
            config=config,
            hash_config=hash_config,
        )
