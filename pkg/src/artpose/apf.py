"""Reader and writer for the APF1 binary interchange format.

Layout (all integers little-endian)::

    offset 0   4 bytes   magic b"APF1"
    offset 4   uint32    H, byte length of the header field
    offset 8   H bytes   UTF-8 JSON header, right-padded with spaces so
                         that 8 + H is a multiple of 8
    then       blocks in the order listed by ``header["blocks"]``; each
               block is C-order data zero-padded to a multiple of 8 bytes

Blocks, for N points:

    points       float32  (N, 3)
    semantic     float32  (N, 10)
    offsets      float32  (N, 3)
    npcs_bins    float32  (N, 3, 32)
    gt_labels    int32    (N,)        only if has_ground_truth
    gt_instance  int32    (N,)        only if has_ground_truth, -1 = background
    gt_npcs      float32  (N, 3)      only if has_ground_truth

Header keys: ``version`` (1), ``n_points``, ``has_ground_truth``,
``class_names`` (the fixed class order), ``n_bins`` (32), ``scene_id``,
``blocks`` (name, dtype, shape per block) and, with ground truth,
``ground_truth`` (list of {class, pose, joint} per instance id).

Values are stored as float32, so a write/parse round trip reproduces the
float32-rounded arrays bit for bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CLASS_NAMES,
    N_BINS,
    N_CLASSES,
    STOCHASTIC_TOL,
    GroundTruthPart,
    JointSpec,
    PartClass,
    PartPose,
    PerPointPrediction,
    PointCloud,
    SceneGroundTruth,
    ValidationError,
)

MAGIC = b"APF1"
VERSION = 1
ALIGN = 8

PREDICTION_BLOCKS = (
    ("points", "<f4", (3,)),
    ("semantic", "<f4", (N_CLASSES,)),
    ("offsets", "<f4", (3,)),
    ("npcs_bins", "<f4", (3, N_BINS)),
)
GT_BLOCKS = (
    ("gt_labels", "<i4", ()),
    ("gt_instance", "<i4", ()),
    ("gt_npcs", "<f4", (3,)),
)
_HEADER_KEYS = {"version", "n_points", "has_ground_truth", "class_names", "n_bins", "scene_id", "blocks"}


class FormatError(ValueError):
    """A file violates the interchange format; carries byte offset and field name."""

    def __init__(self, message: str, offset: int, field: str):
        super().__init__(f"{message} (field {field!r}, byte offset {offset})")
        self.offset = offset
        self.field = field


class MalformedHeaderError(FormatError):
    pass


class ShapeMismatchError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


class NotStochasticError(FormatError):
    pass


@dataclass(frozen=True)
class SceneFile:
    scene_id: str
    cloud: PointCloud
    prediction: PerPointPrediction
    ground_truth: Optional[SceneGroundTruth]


def _pad(n: int) -> int:
    return (-n) % ALIGN


def _gt_header(gt: SceneGroundTruth) -> list:
    return [
        {"class": p.part_class.label, "pose": p.pose.to_dict(), "joint": p.joint.to_dict()}
        for p in gt.parts
    ]


def serialize_scene(
    cloud: PointCloud,
    pred: PerPointPrediction,
    gt: Optional[SceneGroundTruth] = None,
    scene_id: str = "",
) -> bytes:
    pred.check_matches(cloud)
    n = len(cloud)
    arrays = {"points": cloud.points, "semantic": pred.semantic, "offsets": pred.offsets, "npcs_bins": pred.npcs_bins}
    blocks = list(PREDICTION_BLOCKS)
    if gt is not None:
        if len(gt) != n:
            raise ValidationError(f"ground truth has {len(gt)} points, cloud has {n}")
        arrays.update(gt_labels=gt.labels, gt_instance=gt.instance_ids, gt_npcs=gt.npcs)
        blocks += GT_BLOCKS
    header = {
        "version": VERSION,
        "n_points": n,
        "has_ground_truth": gt is not None,
        "class_names": list(CLASS_NAMES),
        "n_bins": N_BINS,
        "scene_id": scene_id,
        "blocks": [{"name": b, "dtype": dt, "shape": [n, *shape]} for b, dt, shape in blocks],
    }
    if gt is not None:
        header["ground_truth"] = _gt_header(gt)
    hbytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    hbytes += b" " * _pad(8 + len(hbytes))
    out = [MAGIC, struct.pack("<I", len(hbytes)), hbytes]
    for name, dt, shape in blocks:
        data = np.ascontiguousarray(arrays[name], dtype=dt).tobytes()
        out += [data, b"\0" * _pad(len(data))]
    return b"".join(out)


def _read_header(buf: bytes) -> tuple[dict, int]:
    if len(buf) < 8:
        raise MalformedHeaderError("file shorter than the fixed preamble", 0, "magic")
    if buf[:4] != MAGIC:
        raise MalformedHeaderError(f"bad magic {buf[:4]!r}", 0, "magic")
    (hlen,) = struct.unpack_from("<I", buf, 4)
    if 8 + hlen > len(buf):
        raise MalformedHeaderError(f"header length {hlen} runs past end of file", 4, "header_length")
    if (8 + hlen) % ALIGN:
        raise MalformedHeaderError("header does not end on an 8-byte boundary", 4, "header_length")
    try:
        header = json.loads(buf[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeaderError(f"header is not valid JSON: {exc}", 8, "header") from None
    if not isinstance(header, dict):
        raise MalformedHeaderError("header must be a JSON object", 8, "header")
    missing = _HEADER_KEYS - header.keys()
    if missing:
        raise MalformedHeaderError(f"header lacks keys {sorted(missing)}", 8, sorted(missing)[0])
    if header["version"] != VERSION:
        raise MalformedHeaderError(f"unsupported version {header['version']!r}", 8, "version")
    if list(header["class_names"]) != list(CLASS_NAMES):
        raise MalformedHeaderError("class_names differ from the fixed class order", 8, "class_names")
    if header["n_bins"] != N_BINS:
        raise MalformedHeaderError(f"n_bins must be {N_BINS}", 8, "n_bins")
    n = header["n_points"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise MalformedHeaderError(f"n_points must be a positive integer, got {n!r}", 8, "n_points")
    if not isinstance(header["has_ground_truth"], bool):
        raise MalformedHeaderError("has_ground_truth must be a boolean", 8, "has_ground_truth")
    return header, 8 + hlen


def _expected_blocks(header: dict) -> list:
    n = header["n_points"]
    blocks = list(PREDICTION_BLOCKS) + (list(GT_BLOCKS) if header["has_ground_truth"] else [])
    return [{"name": b, "dtype": dt, "shape": [n, *shape]} for b, dt, shape in blocks]


def _read_blocks(buf: bytes, header: dict, pos: int) -> dict[str, np.ndarray]:
    if header["blocks"] != _expected_blocks(header):
        raise ShapeMismatchError("block table does not match n_points and has_ground_truth", 8, "blocks")
    arrays = {}
    for blk in header["blocks"]:
        name, dt, shape = blk["name"], np.dtype(blk["dtype"]), tuple(blk["shape"])
        nbytes = int(np.prod(shape)) * dt.itemsize
        if pos + nbytes > len(buf):
            raise ShapeMismatchError(
                f"block needs {nbytes} bytes, {max(len(buf) - pos, 0)} remain", pos, name
            )
        a = np.frombuffer(buf, dtype=dt, count=int(np.prod(shape)), offset=pos).reshape(shape)
        if dt.kind == "f":
            bad = np.flatnonzero(~np.isfinite(a.ravel()))
            if bad.size:
                raise NonFiniteError("non-finite value", pos + int(bad[0]) * dt.itemsize, name)
        arrays[name] = (a, pos)
        pos += nbytes + _pad(nbytes)
    if pos != len(buf):
        raise ShapeMismatchError(f"{len(buf) - pos} trailing bytes after the last block", pos, "eof")
    return arrays


def _check_rows(a: np.ndarray, pos: int, name: str) -> None:
    row_len = a.shape[-1]
    sums = a.astype(np.float64).sum(axis=-1).ravel()
    mins = a.reshape(-1, row_len).min(axis=1)
    bad = np.flatnonzero((np.abs(sums - 1.0) > STOCHASTIC_TOL) | (mins < 0))
    if bad.size:
        raise NotStochasticError(
            f"row {int(bad[0])} sums to {sums[bad[0]]:.9g}", pos + int(bad[0]) * row_len * 4, name
        )


def _parse(buf: bytes):
    header, pos = _read_header(bytes(buf))
    arrays = _read_blocks(bytes(buf), header, pos)
    for name in ("semantic", "npcs_bins"):
        _check_rows(*arrays[name], name)
    get = {k: v[0] for k, v in arrays.items()}
    cloud = PointCloud(get["points"].astype(np.float64))
    pred = PerPointPrediction(
        get["semantic"].astype(np.float64), get["offsets"].astype(np.float64), get["npcs_bins"].astype(np.float64)
    )
    return header, arrays, cloud, pred


def _parse_ground_truth(header: dict, arrays: dict) -> SceneGroundTruth:
    entries = header.get("ground_truth")
    if not isinstance(entries, list):
        raise MalformedHeaderError("has_ground_truth is set but ground_truth is missing", 8, "ground_truth")
    try:
        parts = tuple(
            GroundTruthPart(PartClass.from_label(e["class"]), PartPose.from_dict(e["pose"]), JointSpec.from_dict(e["joint"]))
            for e in entries
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"bad ground-truth entry: {exc}", 8, "ground_truth") from None
    labels, lpos = arrays["gt_labels"]
    inst, _ = arrays["gt_instance"]
    try:
        return SceneGroundTruth(
            labels.astype(np.int64), inst.astype(np.int64), arrays["gt_npcs"][0].astype(np.float64), parts
        )
    except ValidationError as exc:
        raise ShapeMismatchError(f"inconsistent ground truth: {exc}", lpos, "gt_labels") from None


def parse_prediction_file(buf: bytes) -> tuple[PointCloud, PerPointPrediction]:
    """Point cloud and per-point predictions; ground-truth blocks are validated but ignored."""
    _, _, cloud, pred = _parse(buf)
    return cloud, pred


def parse_scene_file(buf: bytes) -> SceneFile:
    header, arrays, cloud, pred = _parse(buf)
    gt = _parse_ground_truth(header, arrays) if header["has_ground_truth"] else None
    return SceneFile(str(header["scene_id"]), cloud, pred, gt)
