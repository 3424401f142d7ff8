import numpy as np
import pytest

from erasorpp import ingest
from erasorpp.errors import LabelCountMismatch, MalformedPoseLine, MalformedScan
from erasorpp.model import PointCloud, PoseSE3


def test_read_scan_decodes_records(tmp_path):
    p = tmp_path / "a.bin"
    np.array([[1, 2, 3, 0.5], [4, 5, 6, 0.1]], dtype="<f4").tofile(p)
    cloud = ingest.read_scan(p)
    assert np.array_equal(cloud.xyz, [[1, 2, 3], [4, 5, 6]])
    assert np.array_equal(cloud.intensity, np.array([0.5, 0.1], dtype=np.float32))


def test_read_scan_empty_and_malformed(tmp_path):
    (tmp_path / "e.bin").write_bytes(b"")
    assert len(ingest.read_scan(tmp_path / "e.bin")) == 0
    (tmp_path / "m.bin").write_bytes(b"\0" * 17)
    with pytest.raises(MalformedScan):
        ingest.read_scan(tmp_path / "m.bin")


def test_read_scan_drops_non_finite(tmp_path, caplog):
    p = tmp_path / "n.bin"
    np.array([[1, 2, 3, 0], [np.nan, 0, 0, 0], [0, np.inf, 0, 0]], dtype="<f4").tofile(p)
    assert len(ingest.read_scan(p)) == 1
    assert "2" in caplog.text


def test_read_labels_bit_split(tmp_path):
    p = tmp_path / "l.label"
    np.array([0x000100FE, 0], dtype="<u4").tofile(p)
    sem, inst = ingest.read_labels(p, 2)
    assert (sem[0], inst[0]) == (254, 1)
    assert (sem[1], inst[1]) == (0, 0)


def test_read_labels_count_mismatch(tmp_path):
    p = tmp_path / "l.label"
    np.array([7], dtype="<u4").tofile(p)
    with pytest.raises(LabelCountMismatch):
        ingest.read_labels(p, 2)


def test_label_round_trip_is_bit_exact(tmp_path, rng):
    sem = rng.integers(0, 2**16, 100).astype(np.uint16)
    inst = rng.integers(0, 2**16, 100).astype(np.uint16)
    ingest.write_labels(tmp_path / "x.label", sem, inst)
    s2, i2 = ingest.read_labels(tmp_path / "x.label", 100)
    assert np.array_equal(s2, sem) and np.array_equal(i2, inst)


def test_read_poses(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n\n1 0 0 5 0 1 0 0 0 0 1 0\n")
    poses = ingest.read_poses(p)
    assert len(poses) == 2
    assert poses[0].allclose(PoseSE3.identity())
    assert np.array_equal(poses[1].translation, [5, 0, 0])
    same = ingest.read_poses(p, calib=PoseSE3.identity())
    assert all(a.allclose(b) for a, b in zip(poses, same))


def test_read_poses_conjugates_by_calibration(tmp_path):
    p = tmp_path / "poses.txt"
    P = PoseSE3.from_yaw(0.4, (3, -1, 2))
    ingest.write_poses(p, [P])
    Tr = PoseSE3.from_yaw(1.1, (0.2, 0.0, -0.1))
    got = ingest.read_poses(p, calib=Tr)[0]
    expected = np.linalg.inv(Tr.matrix()) @ P.matrix() @ Tr.matrix()
    assert np.allclose(got.matrix(), expected, atol=1e-12)


def test_read_poses_malformed(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1\n")
    with pytest.raises(MalformedPoseLine):
        ingest.read_poses(p)
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 x\n")
    with pytest.raises(MalformedPoseLine):
        ingest.read_poses(p)


def test_read_calib_tr_line(tmp_path):
    p = tmp_path / "calib.txt"
    p.write_text("P0: " + " ".join(["0"] * 12) + "\nTr: 1 0 0 1 0 1 0 2 0 0 1 3\n")
    assert np.array_equal(ingest.read_calib(p).translation, [1, 2, 3])


def test_write_ply_single_point(tmp_path):
    p = tmp_path / "one.ply"
    ingest.write_cloud(PointCloud([[1.0, 2.0, 3.0]]), p, "ply")
    text = p.read_text()
    assert "element vertex 1" in text
    body = text.split("end_header\n")[1].strip().splitlines()
    assert len(body) == 1 and [float(v) for v in body[0].split()] == [1, 2, 3]


def test_write_ply_empty(tmp_path):
    p = tmp_path / "e.ply"
    ingest.write_cloud(PointCloud.empty(), p, "ply")
    assert "element vertex 0" in p.read_text()
    assert len(ingest.read_ply(p)) == 0


def test_ply_round_trip_exact(tmp_path, rng):
    cloud = PointCloud(rng.normal(scale=30, size=(200, 3)))
    ingest.write_cloud(cloud, tmp_path / "r.ply", "ply")
    assert np.array_equal(ingest.read_cloud(tmp_path / "r.ply").xyz, cloud.xyz)


def test_binary_round_trip_is_bit_exact(tmp_path, rng):
    xyz = rng.normal(scale=30, size=(500, 3)).astype(np.float32).astype(np.float64)
    ingest.write_cloud(PointCloud(xyz), tmp_path / "r.bin", "bin")
    back = ingest.read_scan(tmp_path / "r.bin")
    assert np.array_equal(back.xyz, xyz)
    assert np.all(back.intensity == 0)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        ingest.write_cloud(PointCloud.empty(), tmp_path / "x", "las")


def test_sequence_source_directory(tmp_path, rng):
    frames = [PointCloud(rng.normal(size=(10 + i, 3)).astype(np.float32),
                         semantic=np.full(10 + i, 40)) for i in range(4)]
    poses = [PoseSE3.from_yaw(0.1 * i, (i, 0, 0)) for i in range(4)]
    ingest.write_sequence(tmp_path, frames, poses)
    src = ingest.SequenceSource.from_directory(tmp_path, start=1, end=2)
    assert list(src.indices()) == [1, 2]
    assert src.has_labels
    f = src.load_frame(2)
    assert np.array_equal(f.xyz, frames[2].xyz) and np.all(f.semantic == 40)
    assert src.pose(2).allclose(poses[2], atol=1e-12)


def test_sequence_source_rejects_bad_range():
    with pytest.raises(ValueError):
        ingest.SequenceSource(poses=[PoseSE3.identity()], start=0, end=3)
