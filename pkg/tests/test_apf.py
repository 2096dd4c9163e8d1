import json
import struct

import numpy as np
import pytest

from artpose.apf import (
    MAGIC,
    MalformedHeaderError,
    NonFiniteError,
    NotStochasticError,
    ShapeMismatchError,
    parse_prediction_file,
    parse_scene_file,
    serialize_scene,
)
from artpose.core import PerPointPrediction, PointCloud
from artpose.synth import CorruptionParams, corrupt, generate_scene, oracle_prediction, sample_scene_spec


def _one_point():
    cloud = PointCloud([[0.1, 0.2, 0.3]])
    pred = PerPointPrediction(np.eye(10)[[4]], [[0.0, 0.5, -0.5]], np.full((1, 3, 32), 1 / 32))
    return cloud, pred


def _header(buf):
    (n,) = struct.unpack_from("<I", buf, 4)
    return json.loads(buf[8 : 8 + n]), 8 + n


def test_minimal_file():
    buf = serialize_scene(*_one_point())
    assert buf[:4] == MAGIC
    assert len(buf) % 8 == 0
    cloud, pred = parse_prediction_file(buf)
    assert len(cloud) == 1 and len(pred) == 1
    header, start = _header(buf)
    assert header["n_points"] == 1 and header["has_ground_truth"] is False
    assert start % 8 == 0


def test_block_layout_is_byte_exact():
    cloud, pred = _one_point()
    buf = serialize_scene(cloud, pred)
    _, pos = _header(buf)
    blocks = [cloud.points, pred.semantic, pred.offsets, pred.npcs_bins]
    for a in blocks:
        raw = np.asarray(a, dtype="<f4").tobytes()
        assert buf[pos : pos + len(raw)] == raw
        pos += len(raw) + (-len(raw)) % 8
    assert pos == len(buf)


def test_nan_offset_reports_field_and_offset():
    cloud, pred = _one_point()
    buf = bytearray(serialize_scene(cloud, pred))
    _, pos = _header(bytes(buf))
    off_start = pos + 16 + 40  # points (12 bytes + 4 pad) then semantic (40 bytes)
    struct.pack_into("<f", buf, off_start + 4, float("nan"))
    with pytest.raises(NonFiniteError) as err:
        parse_prediction_file(bytes(buf))
    assert err.value.field == "offsets"
    assert err.value.offset == off_start + 4


def test_non_stochastic_row():
    cloud, pred = _one_point()
    buf = bytearray(serialize_scene(cloud, pred))
    _, pos = _header(bytes(buf))
    struct.pack_into("<f", buf, pos + 16, 0.5)
    with pytest.raises(NotStochasticError) as err:
        parse_prediction_file(bytes(buf))
    assert err.value.field == "semantic"


@pytest.mark.parametrize(
    "mutate, exc",
    [
        (lambda b: b"", MalformedHeaderError),
        (lambda b: b"APF2" + b[4:], MalformedHeaderError),
        (lambda b: b[:4] + struct.pack("<I", 10**6) + b[8:], MalformedHeaderError),
        (lambda b: b[:-8], ShapeMismatchError),
        (lambda b: b + b"\0" * 8, ShapeMismatchError),
    ],
)
def test_malformed_files(mutate, exc):
    with pytest.raises(exc):
        parse_prediction_file(mutate(serialize_scene(*_one_point())))


def test_header_key_errors():
    buf = serialize_scene(*_one_point())
    header, start = _header(buf)
    header["n_points"] = 2
    body = json.dumps(header).encode()
    body += b" " * ((-(8 + len(body))) % 8)
    with pytest.raises(ShapeMismatchError):
        parse_prediction_file(MAGIC + struct.pack("<I", len(body)) + body + buf[start:])
    del header["class_names"]
    body = json.dumps(header).encode()
    body += b" " * ((-(8 + len(body))) % 8)
    with pytest.raises(MalformedHeaderError) as err:
        parse_prediction_file(MAGIC + struct.pack("<I", len(body)) + body + buf[start:])
    assert err.value.field == "class_names"


@pytest.mark.parametrize("seed", [0, 8, 23])
def test_generated_scene_roundtrip(seed):
    cloud, gt = generate_scene(sample_scene_spec(seed))
    pred = corrupt(oracle_prediction(gt, cloud), CorruptionParams(0.1, 0.01, 1.0, 0.7, seed))
    buf = serialize_scene(cloud, pred, gt, f"s{seed}")
    scene = parse_scene_file(buf)
    f32 = lambda a: np.asarray(a, dtype=np.float32).astype(np.float64)  # noqa: E731
    assert scene.scene_id == f"s{seed}"
    assert scene.cloud.points.tobytes() == f32(cloud.points).tobytes()
    assert scene.prediction.semantic.tobytes() == f32(pred.semantic).tobytes()
    assert scene.prediction.npcs_bins.tobytes() == f32(pred.npcs_bins).tobytes()
    assert scene.prediction.offsets.tobytes() == f32(pred.offsets).tobytes()
    np.testing.assert_array_equal(scene.ground_truth.labels, gt.labels)
    np.testing.assert_array_equal(scene.ground_truth.instance_ids, gt.instance_ids)
    assert scene.ground_truth.npcs.tobytes() == f32(gt.npcs).tobytes()
    for a, b in zip(scene.ground_truth.parts, gt.parts):
        assert a.part_class == b.part_class
        assert a.pose.rotation.tobytes() == b.pose.rotation.tobytes()
        assert a.pose.scale == b.pose.scale
        np.testing.assert_array_equal(a.joint.axis_npcs, b.joint.axis_npcs)
    # float32 data is a fixed point of serialize . parse
    again = serialize_scene(scene.cloud, scene.prediction, scene.ground_truth, scene.scene_id)
    assert again == buf
