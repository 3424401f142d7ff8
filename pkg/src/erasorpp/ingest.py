"""KITTI / SemanticKITTI readers and point-cloud writers.

Binary layouts (all little-endian):

* ``.bin`` scans: 16-byte records of four float32 ``x, y, z, reflectance``.
* ``.label`` files: one uint32 per point, low 16 bits semantic class,
  high 16 bits instance id.
* ``poses.txt``: one row-major 3x4 matrix (12 reals) per non-empty line.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import LabelCountMismatch, MalformedPoseLine, MalformedScan
from .model import Frame, PointCloud, PoseSE3, invert_pose

logger = logging.getLogger(__name__)

# SemanticKITTI "moving-*" classes
DEFAULT_DYNAMIC_CLASSES = frozenset(range(252, 260))

SCAN_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("<u4")
RECORD_BYTES = 16


def _read_raw_scan(path) -> np.ndarray:
    path = Path(path)
    size = path.stat().st_size
    if size % RECORD_BYTES:
        raise MalformedScan(f"{path}: length {size} is not a multiple of {RECORD_BYTES}")
    return np.fromfile(path, dtype=SCAN_DTYPE).reshape(-1, 4)


def _finite_rows(raw: np.ndarray, path) -> np.ndarray:
    finite = np.all(np.isfinite(raw[:, :3]), axis=1)
    dropped = int(len(raw) - finite.sum())
    if dropped:
        logger.warning("%s: dropped %d non-finite points", path, dropped)
    return finite


def read_scan(path) -> PointCloud:
    """Read a KITTI velodyne ``.bin`` scan in the sensor frame.

    Non-finite points are dropped with a logged warning.
    """
    raw = _read_raw_scan(path)
    keep = _finite_rows(raw, path)
    raw = raw[keep]
    return PointCloud(raw[:, :3].astype(np.float64), intensity=raw[:, 3], frame=Frame.SENSOR_LOCAL)


def split_labels(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.uint32)
    return (values & 0xFFFF).astype(np.uint16), (values >> 16).astype(np.uint16)


def read_labels(path, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(semantic, instance)`` uint16 arrays for a ``.label`` file."""
    path = Path(path)
    size = path.stat().st_size
    if size != LABEL_DTYPE.itemsize * n_points:
        raise LabelCountMismatch(
            f"{path}: {size} bytes holds {size / 4:g} labels, expected {n_points}"
        )
    return split_labels(np.fromfile(path, dtype=LABEL_DTYPE))


def read_labeled_scan(scan_path, label_path) -> PointCloud:
    """Read a scan with its labels; the finite-point filter is applied to both."""
    raw = _read_raw_scan(scan_path)
    semantic, instance = read_labels(label_path, len(raw))
    keep = _finite_rows(raw, scan_path)
    raw = raw[keep]
    return PointCloud(
        raw[:, :3].astype(np.float64),
        intensity=raw[:, 3],
        semantic=semantic[keep],
        instance=instance[keep],
        frame=Frame.SENSOR_LOCAL,
    )


def write_labels(path, semantic: np.ndarray, instance: Optional[np.ndarray] = None) -> None:
    semantic = np.asarray(semantic, dtype=np.uint32)
    instance = np.zeros_like(semantic) if instance is None else np.asarray(instance, dtype=np.uint32)
    ((instance << 16) | semantic).astype(LABEL_DTYPE).tofile(path)


def _parse_matrix_line(line: str, lineno: int, path) -> np.ndarray:
    parts = line.split()
    if len(parts) != 12:
        raise MalformedPoseLine(f"{path}:{lineno}: expected 12 values, got {len(parts)}")
    try:
        vals = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise MalformedPoseLine(f"{path}:{lineno}: {exc}") from None
    if not np.all(np.isfinite(vals)):
        raise MalformedPoseLine(f"{path}:{lineno}: non-finite value")
    return vals.reshape(3, 4)


def read_poses(pose_path, calib: Optional[PoseSE3] = None) -> list[PoseSE3]:
    """Read a KITTI pose file.

    When the LiDAR-to-camera calibration ``calib`` is given, each pose ``P``
    is re-expressed in the LiDAR frame as ``calib^-1 * P * calib``.
    """
    poses = []
    calib_inv = invert_pose(calib) if calib is not None else None
    with open(pose_path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            m = _parse_matrix_line(line, lineno, pose_path)
            try:
                pose = PoseSE3.from_matrix(m)
            except Exception as exc:
                raise MalformedPoseLine(f"{pose_path}:{lineno}: {exc}") from None
            if calib is not None:
                pose = calib_inv @ pose @ calib
            poses.append(pose)
    return poses


def read_calib(path) -> PoseSE3:
    """Read the velodyne-to-camera transform.

    Accepts a KITTI ``calib.txt`` (uses the ``Tr:`` line) or a file whose
    first non-empty line is 12 bare reals.
    """
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    for lineno, line in enumerate(lines, 1):
        if line.startswith("Tr:"):
            return PoseSE3.from_matrix(_parse_matrix_line(line[3:], lineno, path))
    if lines and ":" not in lines[0]:
        return PoseSE3.from_matrix(_parse_matrix_line(lines[0], 1, path))
    raise MalformedPoseLine(f"{path}: no 'Tr:' calibration line")


def write_poses(path, poses: Sequence[PoseSE3]) -> None:
    with open(path, "w") as f:
        for pose in poses:
            row = pose.matrix()[:3, :].reshape(-1)
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_cloud(cloud: PointCloud, path, format: str = "ply") -> None:
    """Write ``cloud`` as ASCII PLY (``"ply"``) or KITTI binary (``"bin"``).

    The binary form stores float32 coordinates, so round trips are exact for
    clouds whose coordinates are float32-representable.
    """
    fmt = format.lower()
    if fmt in ("ply", "asciiply"):
        _write_ascii_ply(cloud, path)
    elif fmt in ("bin", "binaryxyz"):
        out = np.zeros((len(cloud), 4), dtype=SCAN_DTYPE)
        out[:, :3] = cloud.xyz
        if cloud.intensity is not None:
            out[:, 3] = cloud.intensity
        out.tofile(path)
    else:
        raise ValueError(f"unknown cloud format {format!r}")


def _write_ascii_ply(cloud: PointCloud, path) -> None:
    header = (
        "ply\n"
        "format ascii 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "end_header\n"
    )
    with open(path, "w") as f:
        f.write(header)
        if len(cloud):
            np.savetxt(f, cloud.xyz, fmt="%.17g")


def read_ply(path) -> PointCloud:
    """Read the x, y, z columns of an ASCII PLY vertex element."""
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise MalformedScan(f"{path}: not a PLY file")
        n_vertex = None
        props: list[str] = []
        in_vertex = False
        for line in f:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise MalformedScan(f"{path}: only ASCII PLY is supported")
            elif tok[0] == "element":
                in_vertex = tok[1] == "vertex"
                if in_vertex:
                    n_vertex = int(tok[2])
            elif tok[0] == "property" and in_vertex:
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n_vertex is None or not {"x", "y", "z"} <= set(props):
            raise MalformedScan(f"{path}: missing vertex x/y/z properties")
        if n_vertex == 0:
            return PointCloud.empty(Frame.MAP)
        data = np.loadtxt(f, max_rows=n_vertex, ndmin=2)
    cols = [props.index(c) for c in ("x", "y", "z")]
    return PointCloud(data[:, cols], frame=Frame.MAP)


def read_cloud(path) -> PointCloud:
    """Read a map cloud from ``.ply`` or KITTI ``.bin`` by file extension."""
    if Path(path).suffix.lower() == ".ply":
        return read_ply(path)
    cloud = read_scan(path)
    cloud.frame = Frame.MAP
    return cloud


@dataclass
class SequenceSource:
    """Frames of one sequence plus poses, either on disk or in memory.

    ``start`` and ``end`` are inclusive frame indices. In-memory sources
    set ``frames`` (one cloud per pose, sensor frame) instead of paths.
    """

    poses: list[PoseSE3]
    scan_paths: dict[int, Path] = field(default_factory=dict)
    label_paths: dict[int, Path] = field(default_factory=dict)
    calib: Optional[PoseSE3] = None
    start: int = 0
    end: Optional[int] = None
    frames: Optional[list[PointCloud]] = None

    def __post_init__(self):
        if self.end is None:
            if self.frames is not None:
                self.end = len(self.frames) - 1
            elif self.scan_paths:
                self.end = max(self.scan_paths)
            else:
                self.end = len(self.poses) - 1
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad frame range [{self.start}, {self.end}]")
        if len(self.poses) <= self.end:
            raise ValueError(f"{len(self.poses)} poses do not cover frame {self.end}")
        if self.frames is not None and len(self.frames) <= self.end:
            raise ValueError(f"{len(self.frames)} frames do not cover frame {self.end}")

    @classmethod
    def from_directory(
        cls,
        sequence_dir,
        poses_path=None,
        calib_path=None,
        start: int = 0,
        end: Optional[int] = None,
        with_labels: bool = True,
    ) -> "SequenceSource":
        """Index a SemanticKITTI-style directory (``velodyne/``, ``labels/``)."""
        seq = Path(sequence_dir)
        scan_dir = seq / "velodyne"
        if not scan_dir.is_dir():
            raise FileNotFoundError(f"{scan_dir} does not exist")
        scans = {int(p.stem): p for p in scan_dir.glob("*.bin")}
        labels = {}
        if with_labels and (seq / "labels").is_dir():
            labels = {int(p.stem): p for p in (seq / "labels").glob("*.label")}
        calib = read_calib(calib_path) if calib_path else None
        poses = read_poses(poses_path or seq / "poses.txt", calib)
        if end is None:
            end = max(scans) if scans else -1
        missing = [i for i in range(start, end + 1) if i not in scans]
        if missing:
            raise FileNotFoundError(f"missing scans for frames {missing[:5]}...")
        return cls(poses, scans, labels, calib, start, end)

    @property
    def has_labels(self) -> bool:
        if self.frames is not None:
            return all(self.frames[i].is_labeled for i in self.indices())
        return all(i in self.label_paths for i in self.indices())

    def indices(self, interval: int = 1) -> range:
        return range(self.start, self.end + 1, interval)

    def load_frame(self, index: int) -> PointCloud:
        if self.frames is not None:
            return self.frames[index]
        if index in self.label_paths:
            return read_labeled_scan(self.scan_paths[index], self.label_paths[index])
        return read_scan(self.scan_paths[index])

    def pose(self, index: int) -> PoseSE3:
        return self.poses[index]


def write_sequence(out_dir, frames: Sequence[PointCloud], poses: Sequence[PoseSE3]) -> None:
    """Write frames, labels and poses in the layout read by ``from_directory``."""
    out = Path(out_dir)
    (out / "velodyne").mkdir(parents=True, exist_ok=True)
    if any(f.is_labeled for f in frames):
        (out / "labels").mkdir(exist_ok=True)
    for i, frame in enumerate(frames):
        write_cloud(frame, out / "velodyne" / f"{i:06d}.bin", "bin")
        if frame.is_labeled:
            write_labels(out / "labels" / f"{i:06d}.label", frame.semantic, frame.instance)
    write_poses(out / "poses.txt", poses)
