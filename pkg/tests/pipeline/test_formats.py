import numpy as np
import pytest

from tacslam.geometry import random_transform
from tacslam.pipeline import (GtsHeader, GtsReader, GtsWriter, PayloadKind, UnreadableInput, concat_gts, read_gts,
                              read_net, read_trajectory, write_gts, write_net, write_trajectory)
from tacslam.sim.calibration import CalibrationNet
from tacslam.surface import SensorSpec

SPEC = SensorSpec(width=8, height=6, pitch=0.1, frame_rate=20.0)


def unit_normals(rng, n=1):
    v = rng.normal(size=(n, SPEC.height, SPEC.width, 3))
    v[..., 2] = -np.abs(v[..., 2]) - 1.0
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.fixture
def sequence(tmp_path):
    rng = np.random.default_rng(0)
    frames = [(0.05 * k, n) for k, n in enumerate(unit_normals(rng, 4))]
    path = write_gts(tmp_path / "seq.gts", GtsHeader.for_spec(SPEC, PayloadKind.NORMALS), frames)
    return path, frames


def test_gts_keeps_frames_and_geometry(sequence):
    path, frames = sequence
    header, back = read_gts(path)
    assert header.count == 4 and header.kind is PayloadKind.NORMALS
    assert header.sensor() == SensorSpec(8, 6, 0.1, SensorSpec().max_indentation, 20.0)
    for (t, a), (s, b) in zip(frames, back):
        assert s == t
        assert np.allclose(a, b, atol=1e-6) and b.dtype == np.float32
    assert GtsReader(path).frame(2)[0] == pytest.approx(0.1)
    with pytest.raises(IndexError):
        GtsReader(path).frame(4)


def test_truncated_or_foreign_files(sequence, tmp_path):
    path, _ = sequence
    data = path.read_bytes()
    short = tmp_path / "short.gts"
    short.write_bytes(data[:-10])
    with pytest.raises(UnreadableInput) as e:
        GtsReader(short)
    assert e.value.reason == "frame count mismatch"

    foreign = tmp_path / "foreign.gts"
    foreign.write_bytes(b"PNG!" + data[4:])
    with pytest.raises(UnreadableInput, match="not a .gts"):
        GtsReader(foreign)
    with pytest.raises(UnreadableInput):
        GtsReader(tmp_path / "missing.gts")
    header_only = tmp_path / "header.gts"
    header_only.write_bytes(data[:12])
    with pytest.raises(UnreadableInput, match="truncated header"):
        GtsReader(header_only)


def test_payload_checks(tmp_path):
    header = GtsHeader.for_spec(SPEC, PayloadKind.NORMALS)
    with GtsWriter(tmp_path / "bad.gts", header) as w:
        with pytest.raises(ValueError, match="unit length"):
            w.write(0.0, np.ones(SPEC.shape + (3,)))
        with pytest.raises(ValueError, match="shape"):
            w.write(0.0, np.ones((2, 2, 3)))
    assert GtsReader(tmp_path / "bad.gts").header.count == 0

    rgb = GtsHeader.for_spec(SPEC, PayloadKind.RGB)
    with GtsWriter(tmp_path / "rgb.gts", rgb) as w:
        with pytest.raises(ValueError, match="uint8"):
            w.write(0.0, np.zeros(SPEC.shape + (3,)))
        w.write(0.0, np.full(SPEC.shape + (3,), 200, dtype=np.uint8))
    _, frames = read_gts(tmp_path / "rgb.gts")
    assert frames[0][1].dtype == np.uint8 and frames[0][1].max() == 200


def test_concat_rebases_timestamps(sequence, tmp_path):
    path, _ = sequence
    header = concat_gts([path, path], tmp_path / "both.gts")
    assert header.count == 8
    stamps = [t for t, _ in GtsReader(tmp_path / "both.gts")]
    assert stamps == pytest.approx([k / 20.0 for k in range(8)])

    other = write_gts(tmp_path / "rgb.gts", GtsHeader.for_spec(SPEC, PayloadKind.RGB), [])
    with pytest.raises(UnreadableInput):
        concat_gts([path, other], tmp_path / "mixed.gts")
    with pytest.raises(ValueError):
        concat_gts([], tmp_path / "none.gts")


def test_trajectory_file(tmp_path):
    rng = np.random.default_rng(3)
    poses = {f: random_transform(rng) for f in (0, 2, 5)}
    stamps = {0: 0.0, 2: 0.08, 5: 0.2}
    path = write_trajectory(tmp_path / "traj.txt", poses, stamps, comment="three frames")
    back, times = read_trajectory(path)
    assert sorted(back) == [0, 2, 5] and times == stamps
    for f in poses:
        assert back[f].allclose(poses[f], 1e-12, 1e-12)

    (tmp_path / "short.txt").write_text("0 0.0 1 2 3 0 0 0\n")
    with pytest.raises(UnreadableInput, match=":1:"):
        read_trajectory(tmp_path / "short.txt")
    (tmp_path / "quat.txt").write_text("# header\n0 0.0 1 2 3 0 0 0 2\n")
    with pytest.raises(UnreadableInput) as e:
        read_trajectory(tmp_path / "quat.txt")
    assert e.value.reason == "quaternion"


def test_calibration_net_file(tmp_path):
    rng = np.random.default_rng(5)
    sizes = [5, 4, 2]
    net = CalibrationNet([rng.normal(size=(a, b)).astype(np.float32) for a, b in zip(sizes[:-1], sizes[1:])],
                         [rng.normal(size=b).astype(np.float32) for b in sizes[1:]])
    back = read_net(write_net(net, tmp_path / "net.bin"))
    assert back.layer_sizes == sizes
    for a, b in zip(net.weights + net.biases, back.weights + back.biases):
        assert np.array_equal(a, b)

    data = (tmp_path / "net.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(data[:-4])
    with pytest.raises(UnreadableInput, match="truncated"):
        read_net(tmp_path / "cut.bin")
    (tmp_path / "long.bin").write_bytes(data + b"\0\0\0\0")
    with pytest.raises(UnreadableInput, match="trailing"):
        read_net(tmp_path / "long.bin")
    (tmp_path / "junk.bin").write_bytes(b"junk" * 8)
    with pytest.raises(UnreadableInput, match="not a calibration net"):
        read_net(tmp_path / "junk.bin")
