"""Per-frame dynamic removal over a sequence of scans."""
from __future__ import annotations

import logging
import time
from pathlib import Path
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .classify import BinStatus, ClassifyConfig, classify_frame, write_bin_diagnostics
from .descriptor import VoiParams, build_descriptor_grid, voi_mask
from .ingest import SequenceSource
from .model import Frame, PointCloud, PoseSE3, invert_pose, transform_cloud
from .retrieve import RetrievalConfig, retrieve_static_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    voi: VoiParams = field(default_factory=VoiParams)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    frame_interval: int = 1

    def __post_init__(self):
        if self.frame_interval < 1:
            raise ValueError("frame_interval must be >= 1")


@dataclass
class FrameStats:
    frame: int
    dynamic_bins: int
    rgpf_count: int
    seconds: float
    srt_bins: int = 0
    ground_layer: Optional[int] = None
    ground_confident: bool = False
    submap_points: int = 0
    rejected_points: int = 0

    CSV_COLUMNS = ("frame", "dynamic_bins", "rgpf_count", "seconds")


@dataclass
class MapState:
    """The map being cleaned, in the map frame, with stable point ids.

    ``rejected`` accumulates every point removed so far; the two clouds are
    disjoint by id and together equal the initial map.
    """

    map: PointCloud
    rejected: PointCloud
    stats: list[FrameStats] = field(default_factory=list)

    @classmethod
    def from_cloud(cls, cloud: PointCloud) -> "MapState":
        ids = cloud.ids if cloud.ids is not None else np.arange(len(cloud), dtype=np.int64)
        cloud = replace(cloud, ids=ids, frame=Frame.MAP)
        return cls(cloud, cloud.select(np.zeros(len(cloud), dtype=bool)))

    @property
    def rgpf_total(self) -> int:
        return sum(s.rgpf_count for s in self.stats)


def _submap_split(map_cloud: PointCloud, pose: PoseSE3, voi: VoiParams):
    ego_xyz = invert_pose(pose).apply(map_cloud.xyz)
    return ego_xyz, voi_mask(ego_xyz, voi)


def fetch_submap(state: MapState, pose: PoseSE3, voi: VoiParams) -> tuple[PointCloud, PointCloud]:
    """Map points inside the VoI around ``pose`` (sensor frame) and the rest
    (map frame)."""
    ego_xyz, mask = _submap_split(state.map, pose, voi)
    submap = state.map.select(mask).with_xyz(ego_xyz[mask], frame=Frame.SENSOR_LOCAL)
    return submap, state.map.select(~mask)


def process_frame(
    state: MapState,
    scan: PointCloud,
    pose: PoseSE3,
    cfg: PipelineConfig,
    frame_index: int = -1,
    diagnostics_dir=None,
) -> MapState:
    """Clean the part of the map seen by one scan.

    ``scan`` is in the sensor frame and ``pose`` places it in the map. The
    map points of confirmed-dynamic bins that the ground fit does not keep
    move from ``state.map`` to ``state.rejected``; every other point keeps
    its original map coordinates. With ``diagnostics_dir`` set, a per-bin
    CSV is written there for the frame.
    """
    t0 = time.perf_counter()
    ego_xyz, mask = _submap_split(state.map, pose, cfg.voi)
    submap_pos = np.flatnonzero(mask)
    # coordinates only: retrieval works on positions into the map arrays
    submap = PointCloud(ego_xyz[submap_pos], frame=Frame.SENSOR_LOCAL)

    scan_grid = build_descriptor_grid(scan, cfg.voi)
    map_grid = build_descriptor_grid(submap, cfg.voi)
    result = classify_frame(scan_grid, map_grid, cfg.classify)
    retrieval = retrieve_static_indices(map_grid, result.status, cfg.retrieval, result.ground)
    if diagnostics_dir is not None:
        path = Path(diagnostics_dir) / f"frame_{frame_index:06d}.csv"
        write_bin_diagnostics(path, scan_grid, map_grid, result)

    drop = submap_pos[retrieval.rejected]
    if len(drop):
        keep = np.ones(len(state.map), dtype=bool)
        keep[drop] = False
        new_map = state.map.select(keep)
        rejected = PointCloud.concatenate([state.rejected, state.map.select(drop)], frame=Frame.MAP)
        rejected = rejected.select(np.argsort(rejected.ids, kind="stable"))
    else:
        new_map, rejected = state.map, state.rejected

    stats = FrameStats(
        frame=frame_index,
        dynamic_bins=result.count(BinStatus.DYNAMIC_CONFIRMED, after_spt=False),
        rgpf_count=result.count(BinStatus.DYNAMIC_CONFIRMED),
        seconds=time.perf_counter() - t0,
        srt_bins=result.count(BinStatus.DYNAMIC_CANDIDATE, after_spt=False)
        + result.count(BinStatus.DYNAMIC_CONFIRMED, after_spt=False),
        ground_layer=result.ground.gamma if result.ground else None,
        ground_confident=bool(result.ground and result.ground.confident),
        submap_points=len(submap_pos),
        rejected_points=len(drop),
    )
    logger.debug(
        "frame %d: %d dynamic bins, %d after SPT, %d points rejected, %.3fs",
        frame_index, stats.dynamic_bins, stats.rgpf_count, stats.rejected_points, stats.seconds,
    )
    return MapState(new_map, rejected, state.stats + [stats])


def accumulate_map(source: SequenceSource) -> PointCloud:
    """Naive map: every frame of the range moved into the map frame, ids 0..N-1."""
    clouds = []
    for i in source.indices():
        try:
            clouds.append(transform_cloud(source.load_frame(i), source.pose(i)))
        except Exception as exc:
            raise type(exc)(f"frame {i}: {exc}") from exc
    cloud = PointCloud.concatenate(clouds, frame=Frame.MAP)
    cloud.ids = np.arange(len(cloud), dtype=np.int64)
    return cloud


def run_sequence(
    source: SequenceSource,
    cfg: PipelineConfig,
    initial_map: Optional[PointCloud] = None,
    diagnostics_dir=None,
) -> tuple[MapState, list[FrameStats]]:
    """Process frames ``start, start+k, ...`` (``k = frame_interval``) in order."""
    if initial_map is None:
        initial_map = accumulate_map(source)
    state = MapState.from_cloud(initial_map)
    for i in source.indices(cfg.frame_interval):
        try:
            scan = source.load_frame(i)
        except Exception as exc:
            raise type(exc)(f"frame {i}: {exc}") from exc
        state = process_frame(state, scan, source.pose(i), cfg, frame_index=i,
                              diagnostics_dir=diagnostics_dir)
    logger.info(
        "processed %d frames, rejected %d of %d points",
        len(state.stats), len(state.rejected), len(state.map) + len(state.rejected),
    )
    return state, state.stats


def check_conservation(initial_map: PointCloud, state: MapState) -> None:
    """Raise ``AssertionError`` unless map and rejected partition the initial ids."""
    kept, rejected = state.map.ids, state.rejected.ids
    if len(np.intersect1d(kept, rejected)):
        raise AssertionError("a point is both kept and rejected")
    both = np.sort(np.concatenate([kept, rejected]))
    if not np.array_equal(both, np.sort(initial_map.ids)):
        raise AssertionError("kept and rejected points do not add up to the initial map")
