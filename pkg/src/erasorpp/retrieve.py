"""Region-wise ground plane fitting: recover ground points from dynamic bins."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classify import BinStatus, GroundMask
from .descriptor import DescriptorGrid
from .errors import DegeneratePlane
from .model import PointCloud


@dataclass(frozen=True)
class RetrievalConfig:
    seed_fraction: float = 0.2
    iterations: int = 3
    inlier_threshold: float = 0.125
    min_inliers: int = 4

    def __post_init__(self):
        if not 0.0 < self.seed_fraction <= 1.0:
            raise ValueError("seed_fraction must lie in (0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.min_inliers < 3:
            raise ValueError("min_inliers must be >= 3")


@dataclass(frozen=True)
class GroundPlane:
    """Plane ``normal . p + offset = 0`` with an upward unit normal."""

    normal: np.ndarray
    offset: float
    inlier_threshold: float

    def distance(self, xyz: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(xyz) @ self.normal + self.offset)

    def inliers(self, xyz: np.ndarray) -> np.ndarray:
        return self.distance(xyz) <= self.inlier_threshold


def _least_squares_plane(xyz: np.ndarray) -> tuple[np.ndarray, float]:
    centroid = xyz.mean(axis=0)
    _, s, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    if len(s) < 3 or s[0] == 0.0 or s[1] <= 1e-10 * s[0]:
        raise DegeneratePlane("points are coincident or collinear")
    normal = vt[2]
    if abs(normal[2]) < 1e-12:
        raise DegeneratePlane("fitted plane is vertical")
    if normal[2] < 0:
        normal = -normal
    normal = normal / np.linalg.norm(normal)
    return normal, float(-normal @ centroid)


def fit_ground_plane(
    points: np.ndarray,
    cfg: RetrievalConfig,
    seed_pool: Optional[np.ndarray] = None,
) -> GroundPlane:
    """Fit a ground plane by iterated least squares.

    Seeds are the lowest-z ``seed_fraction`` of ``points`` (restricted to
    ``seed_pool`` when that boolean mask selects at least ``min_inliers``
    points). Each iteration fits the plane through the current inliers and
    re-selects every point within ``inlier_threshold`` of it.
    """
    xyz = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(xyz) < cfg.min_inliers:
        raise DegeneratePlane(f"{len(xyz)} points, need {cfg.min_inliers}")
    pool = xyz
    if seed_pool is not None and np.count_nonzero(seed_pool) >= cfg.min_inliers:
        pool = xyz[seed_pool]
    n_seed = min(len(pool), max(cfg.min_inliers, math.ceil(cfg.seed_fraction * len(pool))))
    inliers = pool[np.argsort(pool[:, 2], kind="stable")[:n_seed]]

    for _ in range(cfg.iterations):
        normal, offset = _least_squares_plane(inliers)
        plane = GroundPlane(normal, offset, cfg.inlier_threshold)
        inliers = xyz[plane.inliers(xyz)]
        if len(inliers) < cfg.min_inliers:
            raise DegeneratePlane(f"only {len(inliers)} inliers")
    return plane


@dataclass
class RetrievalResult:
    """Source-cloud indices split by ground retrieval, each sorted."""

    retained: np.ndarray
    rejected: np.ndarray
    n_bins: int = 0
    n_degenerate: int = 0


def retrieve_static_indices(
    map_grid: DescriptorGrid,
    status: np.ndarray,
    cfg: RetrievalConfig,
    ground: Optional[GroundMask] = None,
) -> RetrievalResult:
    dynamic = (np.asarray(status) == BinStatus.DYNAMIC_CONFIRMED).reshape(-1)
    in_dynamic = dynamic[map_grid.point_bin]
    src_idx = map_grid.voi_index[in_dynamic]
    bins = map_grid.point_bin[in_dynamic]
    layers = map_grid.point_layer[in_dynamic]
    if len(src_idx) == 0:
        empty = np.empty(0, dtype=np.int64)
        return RetrievalResult(empty, empty.copy())

    order = np.argsort(bins, kind="stable")
    src_idx, bins, layers = src_idx[order], bins[order], layers[order]
    splits = np.flatnonzero(np.diff(bins)) + 1
    xyz_all = map_grid.source.xyz

    retained, rejected = [], []
    n_degenerate = 0
    groups = np.split(np.arange(len(src_idx)), splits)
    for group in groups:
        idx = src_idx[group]
        xyz = xyz_all[idx]
        pool = None if ground is None else layers[group] < ground.gamma
        try:
            plane = fit_ground_plane(xyz, cfg, seed_pool=pool)
        except DegeneratePlane:
            n_degenerate += 1
            rejected.append(idx)
            continue
        keep = plane.inliers(xyz)
        retained.append(idx[keep])
        rejected.append(idx[~keep])

    return RetrievalResult(
        np.sort(np.concatenate(retained)) if retained else np.empty(0, dtype=np.int64),
        np.sort(np.concatenate(rejected)),
        n_bins=len(groups),
        n_degenerate=n_degenerate,
    )


def retrieve_static(
    map_grid: DescriptorGrid,
    status: np.ndarray,
    cfg: RetrievalConfig,
    ground: Optional[GroundMask] = None,
) -> tuple[PointCloud, PointCloud]:
    """Split the points of confirmed-dynamic bins into ground (retained) and
    the rest (rejected). Points of all other bins appear in neither output.

    A bin whose plane fit is degenerate is rejected whole. When a ground
    mask is given, seeds come from the map points in layers at or below it.
    """
    res = retrieve_static_indices(map_grid, status, cfg, ground)
    src = map_grid.source
    return src.select(res.retained), src.select(res.rejected)
