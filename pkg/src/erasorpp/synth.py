"""Deterministic labelled scan sequences with known dynamic traces.

Every surface within range of the sensor is sampled each frame (there is
no occlusion model) except where a scene element explicitly hides points:
``Vegetation.occluded_frames`` and ``StaticBox.dropout_frames``. Output
coordinates are rounded to float32 so the in-memory sequence equals what
the KITTI binary writer and reader produce.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classify import ClassifyConfig
from .descriptor import VoiParams
from .ingest import SequenceSource
from .model import Frame, PointCloud, PoseSE3
from .pipeline import PipelineConfig

# SemanticKITTI class ids
ROAD = 40
BUILDING = 50
VEGETATION = 70
POLE = 80
MOVING_CAR = 252


@dataclass
class StaticBox:
    center: tuple[float, float]
    size: tuple[float, float, float]
    density: float = 20.0
    label: int = BUILDING
    dropout_frames: tuple[int, ...] = ()


@dataclass
class MovingBox:
    start: tuple[float, float]
    velocity: tuple[float, float]  # meters per frame
    size: tuple[float, float, float] = (4.0, 2.0, 1.7)
    density: float = 20.0
    clearance: float = 0.3
    label: int = MOVING_CAR


@dataclass
class Vegetation:
    """A volumetric patch (points per cubic meter) standing on the ground.

    In ``occluded_frames`` only the height band ``visible_band`` (meters
    above ground) is seen and the ground under the patch is hidden.
    """

    center: tuple[float, float]
    size: tuple[float, float, float]
    density: float = 20.0
    occluded_frames: tuple[int, ...] = ()
    visible_band: tuple[float, float] = (1.2, 1.5)
    label: int = VEGETATION


@dataclass
class SceneConfig:
    n_frames: int = 20
    trajectory: Optional[list[PoseSE3]] = None
    ground_extent: tuple[float, float, float, float] = (-150.0, 150.0, -150.0, 150.0)
    ground_z: float = -0.1
    ground_density: float = 5.0
    static_boxes: list[StaticBox] = field(default_factory=list)
    moving_boxes: list[MovingBox] = field(default_factory=list)
    vegetation: list[Vegetation] = field(default_factory=list)
    sensor_noise: float = 0.02
    max_range: float = 80.0
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.ground_density <= 0:
            raise ValueError("densities must be positive")
        for obj in [*self.static_boxes, *self.moving_boxes, *self.vegetation]:
            if obj.density <= 0:
                raise ValueError("densities must be positive")
        if self.trajectory is None:
            self.trajectory = linear_trajectory(self.n_frames)
        if len(self.trajectory) < self.n_frames:
            raise ValueError("trajectory shorter than n_frames")


def linear_trajectory(n_frames: int, start=(0.0, 0.0, 1.63), step=(0.5, 0.0, 0.0),
                      yaw: float = 0.0) -> list[PoseSE3]:
    start, step = np.asarray(start, float), np.asarray(step, float)
    return [PoseSE3.from_yaw(yaw, start + i * step) for i in range(n_frames)]


def _sample_rect(rng, n, origin, u, v) -> np.ndarray:
    """``n`` uniform points on the parallelogram ``origin + s*u + t*v``."""
    st = rng.random((n, 2))
    return origin + st[:, :1] * u + st[:, 1:] * v


def box_surface_counts(size, density) -> list[int]:
    """Points per face (top and four sides; the bottom is never sampled)."""
    sx, sy, sz = size
    areas = [sx * sy, sx * sz, sx * sz, sy * sz, sy * sz]
    return [int(round(density * a)) for a in areas]


def sample_box_surface(rng, center_xy, base_z, size, density) -> np.ndarray:
    sx, sy, sz = size
    x0, y0 = center_xy[0] - sx / 2, center_xy[1] - sy / 2
    ex, ey, ez = np.array([sx, 0, 0.0]), np.array([0, sy, 0.0]), np.array([0, 0, sz])
    o = np.array([x0, y0, base_z])
    faces = [
        (o + ez, ex, ey),       # top
        (o, ex, ez),            # y-min side
        (o + ey, ex, ez),       # y-max side
        (o, ey, ez),            # x-min side
        (o + ex, ey, ez),       # x-max side
    ]
    counts = box_surface_counts(size, density)
    return np.concatenate([_sample_rect(rng, n, *f) for n, f in zip(counts, faces)])


def _in_footprint(xy: np.ndarray, center, size) -> np.ndarray:
    return (np.abs(xy[:, 0] - center[0]) <= size[0] / 2) & (np.abs(xy[:, 1] - center[1]) <= size[1] / 2)


def _frame_points(cfg: SceneConfig, t: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pose = cfg.trajectory[t]
    sensor_xy = pose.translation[:2]
    parts, sem, inst = [], [], []

    def add(pts, label, instance=0):
        parts.append(pts)
        sem.append(np.full(len(pts), label, dtype=np.uint16))
        inst.append(np.full(len(pts), instance, dtype=np.uint16))

    # ground: uniform over the disc of radius max_range, clipped to the extent
    r = cfg.max_range
    n = int(round(cfg.ground_density * math.pi * r * r))
    rho = r * np.sqrt(rng.random(n))
    phi = rng.random(n) * 2 * math.pi
    g = np.column_stack([sensor_xy[0] + rho * np.cos(phi), sensor_xy[1] + rho * np.sin(phi),
                         np.full(n, cfg.ground_z)])
    x0, x1, y0, y1 = cfg.ground_extent
    keep = (g[:, 0] >= x0) & (g[:, 0] <= x1) & (g[:, 1] >= y0) & (g[:, 1] <= y1)
    for veg in cfg.vegetation:
        if t in veg.occluded_frames:
            keep &= ~_in_footprint(g, veg.center, veg.size)
    add(g[keep], ROAD)

    for box in cfg.static_boxes:
        pts = sample_box_surface(rng, box.center, cfg.ground_z, box.size, box.density)
        if t not in box.dropout_frames:
            add(pts, box.label)

    for veg in cfg.vegetation:
        sx, sy, sz = veg.size
        m = int(round(veg.density * sx * sy * sz))
        u = rng.random((m, 3))
        pts = np.column_stack([veg.center[0] + (u[:, 0] - 0.5) * sx,
                               veg.center[1] + (u[:, 1] - 0.5) * sy,
                               cfg.ground_z + u[:, 2] * sz])
        if t in veg.occluded_frames:
            h = pts[:, 2] - cfg.ground_z
            pts = pts[(h >= veg.visible_band[0]) & (h <= veg.visible_band[1])]
        add(pts, veg.label)

    for k, mb in enumerate(cfg.moving_boxes):
        center = np.asarray(mb.start, float) + t * np.asarray(mb.velocity, float)
        pts = sample_box_surface(rng, center, cfg.ground_z + mb.clearance, mb.size, mb.density)
        add(pts, mb.label, k + 1)

    return np.concatenate(parts), np.concatenate(sem), np.concatenate(inst)


def generate_frame(cfg: SceneConfig, t: int, rng) -> PointCloud:
    world, sem, inst = _frame_points(cfg, t, rng)
    world = world + rng.normal(0.0, cfg.sensor_noise, world.shape)
    pose = cfg.trajectory[t]
    local = (world - pose.translation) @ pose.rotation
    in_range = np.hypot(local[:, 0], local[:, 1]) < cfg.max_range
    local = local[in_range].astype(np.float32).astype(np.float64)
    return PointCloud(
        local,
        intensity=np.zeros(len(local), dtype=np.float32),
        semantic=sem[in_range],
        instance=inst[in_range],
        frame=Frame.SENSOR_LOCAL,
    )


def generate_scene(cfg: SceneConfig) -> SequenceSource:
    """Generate all frames; identical configs give identical output."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_frames)
    frames = [generate_frame(cfg, t, np.random.default_rng(s)) for t, s in enumerate(seeds)]
    return SequenceSource(poses=list(cfg.trajectory[: cfg.n_frames]), frames=frames)


# ---------------------------------------------------------------------------
# Reference scenes

SENSOR_HEIGHT = 1.73


def reference_scene(seed: int = 7) -> SceneConfig:
    """20 frames, one car driving past a slowly moving sensor, a few buildings.

    About 100k points per frame.
    """
    ground_z = -0.1
    traj = linear_trajectory(20, start=(0.0, 0.0, ground_z + SENSOR_HEIGHT), step=(0.5, 0.0, 0.0))
    return SceneConfig(
        n_frames=20,
        trajectory=traj,
        ground_z=ground_z,
        ground_density=4.0,
        static_boxes=[
            StaticBox((35.0, -22.0), (12.0, 8.0, 6.0)),
            StaticBox((-30.0, 25.0), (10.0, 10.0, 8.0)),
            StaticBox((5.0, -40.0), (20.0, 6.0, 5.0)),
            StaticBox((50.0, 30.0), (8.0, 14.0, 4.0)),
        ],
        moving_boxes=[MovingBox(start=(25.0, 9.0), velocity=(-1.0, 0.0))],
        seed=seed,
    )


def isolated_bin_location(pose: PoseSE3, rho: float = 30.0, sector: int = 10,
                          n_sectors: int = 60) -> tuple[float, float]:
    """World xy at the centre of one polar bin as seen from ``pose``."""
    theta = (sector - 0.5) * 2 * math.pi / n_sectors - math.pi
    local = np.array([rho * math.cos(theta), rho * math.sin(theta), 0.0])
    world = pose.apply(local)
    return float(world[0]), float(world[1])


def ablation_scene(seed: int = 7, dropout_frame: int = 12) -> SceneConfig:
    """Reference scene plus an intermittently occluded vegetation patch and a
    pole missing from one scan (an isolated false-dynamic bin)."""
    cfg = reference_scene(seed)
    cfg.vegetation.append(
        Vegetation(center=(-20.0, -20.0), size=(14.0, 14.0, 2.5), density=20.0,
                   occluded_frames=tuple(range(4, 10)))
    )
    pole_xy = isolated_bin_location(cfg.trajectory[dropout_frame], rho=30.0, sector=40)
    cfg.static_boxes.append(
        StaticBox(pole_xy, (0.5, 0.5, 1.6), density=60.0, label=POLE, dropout_frames=(dropout_frame,))
    )
    return cfg


def scene_from_dict(d: dict) -> SceneConfig:
    """Build a ``SceneConfig`` from plain data (e.g. a parsed YAML file).

    ``trajectory`` is a list of ``[x, y, z, yaw]`` rows; boxes and vegetation
    are lists of mappings with the dataclass field names.
    """
    d = dict(d)
    known = set(SceneConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise KeyError(f"unknown scene keys: {sorted(unknown)}")
    if d.get("trajectory") is not None:
        d["trajectory"] = [PoseSE3.from_yaw(row[3] if len(row) > 3 else 0.0, row[:3])
                           for row in d["trajectory"]]

    def build(cls, items: Sequence[dict]):
        out = []
        for item in items or []:
            extra = set(item) - set(cls.__dataclass_fields__)
            if extra:
                raise KeyError(f"unknown {cls.__name__} keys: {sorted(extra)}")
            out.append(cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in item.items()}))
        return out

    d["static_boxes"] = build(StaticBox, d.get("static_boxes"))
    d["moving_boxes"] = build(MovingBox, d.get("moving_boxes"))
    d["vegetation"] = build(Vegetation, d.get("vegetation"))
    if "ground_extent" in d:
        d["ground_extent"] = tuple(d["ground_extent"])
    return SceneConfig(**d)


def reference_pipeline_config(frame_interval: int = 1, **classify_overrides) -> PipelineConfig:
    """Default parameters with the height band shifted down by the sensor height."""
    voi = VoiParams(h_min=-1.0 - SENSOR_HEIGHT)
    return PipelineConfig(voi=voi, classify=ClassifyConfig(**classify_overrides),
                          frame_interval=frame_interval)
