"""Core geometric types: point clouds and rigid SE(3) poses.

Clouds are stored column-wise as numpy arrays rather than as sequences of
point objects. Point ``k`` of a cloud is row ``k`` of ``xyz`` together with
entry ``k`` of each optional per-point attribute.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidPose

ORTHONORMAL_TOL = 1e-6


class Frame(enum.Enum):
    SENSOR_LOCAL = "sensor_local"
    MAP = "map"

    def flipped(self) -> "Frame":
        return Frame.MAP if self is Frame.SENSOR_LOCAL else Frame.SENSOR_LOCAL


def _optional_column(values, n, dtype, name):
    if values is None:
        return None
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


@dataclass
class PointCloud:
    """An ordered set of 3D points in meters.

    Attributes
    ----------
    xyz : (N, 3) float64 array
    intensity : (N,) float32 array or None
        Reflectance in [0, 1]. Carried through, never used by the pipeline.
    semantic, instance : (N,) uint16 arrays or None
        SemanticKITTI ground truth, kept bit-exact.
    ids : (N,) int64 array or None
        Stable point identifiers, used by the map pipeline.
    frame : Frame
    """

    xyz: np.ndarray
    intensity: Optional[np.ndarray] = None
    semantic: Optional[np.ndarray] = None
    instance: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None
    frame: Frame = Frame.SENSOR_LOCAL

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.size == 0:
            xyz = xyz.reshape(0, 3)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError(f"xyz must have shape (N, 3), got {xyz.shape}")
        self.xyz = xyz
        n = len(xyz)
        self.intensity = _optional_column(self.intensity, n, np.float32, "intensity")
        self.semantic = _optional_column(self.semantic, n, np.uint16, "semantic")
        self.instance = _optional_column(self.instance, n, np.uint16, "instance")
        self.ids = _optional_column(self.ids, n, np.int64, "ids")

    def __len__(self) -> int:
        return len(self.xyz)

    @classmethod
    def empty(cls, frame: Frame = Frame.SENSOR_LOCAL) -> "PointCloud":
        return cls(np.empty((0, 3)), frame=frame)

    @property
    def is_labeled(self) -> bool:
        return self.semantic is not None

    def select(self, index) -> "PointCloud":
        """Subset by boolean mask or integer index array; attributes follow."""

        def take(a):
            return None if a is None else a[index]

        return PointCloud(
            self.xyz[index],
            intensity=take(self.intensity),
            semantic=take(self.semantic),
            instance=take(self.instance),
            ids=take(self.ids),
            frame=self.frame,
        )

    def with_xyz(self, xyz: np.ndarray, frame: Optional[Frame] = None) -> "PointCloud":
        return replace(self, xyz=xyz, frame=self.frame if frame is None else frame)

    @staticmethod
    def concatenate(clouds: list["PointCloud"], frame: Optional[Frame] = None) -> "PointCloud":
        """Stack clouds; an attribute survives only if every input carries it."""
        if not clouds:
            return PointCloud.empty(frame or Frame.SENSOR_LOCAL)

        def cat(name):
            cols = [getattr(c, name) for c in clouds]
            if any(c is None for c in cols):
                return None
            return np.concatenate(cols)

        return PointCloud(
            np.concatenate([c.xyz for c in clouds]),
            intensity=cat("intensity"),
            semantic=cat("semantic"),
            instance=cat("instance"),
            ids=cat("ids"),
            frame=frame or clouds[0].frame,
        )


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform ``p -> R @ p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise InvalidPose(f"bad shapes: rotation {R.shape}, translation {t.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InvalidPose("pose contains non-finite values")
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHONORMAL_TOL:
            raise InvalidPose("rotation is not orthonormal")
        if np.linalg.det(R) <= 0:
            raise InvalidPose("rotation has determinant -1 (reflection)")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "PoseSE3":
        """Build from a 3x4 or 4x4 homogeneous matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape not in ((3, 4), (4, 4)):
            raise InvalidPose(f"expected 3x4 or 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        c, s = np.cos(yaw), np.sin(yaw)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(R, np.asarray(translation, dtype=np.float64))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """``self * other``: apply ``other`` first, then ``self``."""
        return PoseSE3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return self.compose(other)

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=np.float64)
        return xyz @ self.rotation.T + self.translation

    def allclose(self, other: "PoseSE3", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )


def _check_pose(pose) -> PoseSE3:
    # raw 3x4 / 4x4 matrices are accepted and validated on conversion
    if isinstance(pose, PoseSE3):
        return pose
    return PoseSE3.from_matrix(pose)


def transform_cloud(cloud: PointCloud, pose: PoseSE3) -> PointCloud:
    """Apply ``pose`` to every point; the frame tag is flipped."""
    pose = _check_pose(pose)
    return cloud.with_xyz(pose.apply(cloud.xyz), frame=cloud.frame.flipped())


def invert_pose(pose: PoseSE3) -> PoseSE3:
    pose = _check_pose(pose)
    Rt = pose.rotation.T
    return PoseSE3(Rt, -Rt @ pose.translation)
