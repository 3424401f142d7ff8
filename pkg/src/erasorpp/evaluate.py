"""Voxel-wise preservation rate (PR), rejection rate (RR) and F1.

A ground-truth voxel is dynamic if it holds at least one point of a
dynamic class, static if it holds points but none dynamic. PR is the share
of static voxels still occupied by the output map, RR the share of dynamic
voxels the output leaves empty.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import EmptyGroundTruth
from .ingest import DEFAULT_DYNAMIC_CLASSES, SequenceSource
from .model import PointCloud
from .pipeline import PipelineConfig, accumulate_map, run_sequence

logger = logging.getLogger(__name__)

DEFAULT_VOXEL_SIZE = 0.2
_PACK_BITS = 21


def f1_score(pr: float, rr: float) -> float:
    """Harmonic mean of PR and RR (0 when both are 0)."""
    return 2.0 * pr * rr / (pr + rr) if pr + rr > 0 else 0.0


@dataclass(frozen=True)
class MetricsReport:
    PR: float
    RR: float
    F1: float
    static_total: int
    static_preserved: int
    dynamic_total: int
    dynamic_removed: int
    voxel_size: float = DEFAULT_VOXEL_SIZE

    @classmethod
    def from_counts(cls, static_total, static_preserved, dynamic_total, dynamic_removed,
                    voxel_size=DEFAULT_VOXEL_SIZE) -> "MetricsReport":
        pr = static_preserved / static_total
        rr = dynamic_removed / dynamic_total
        return cls(pr, rr, f1_score(pr, rr), int(static_total), int(static_preserved),
                   int(dynamic_total), int(dynamic_removed), voxel_size)

    def to_dict(self) -> dict:
        return asdict(self)


def voxel_indices(xyz: np.ndarray, voxel_size: float) -> np.ndarray:
    """Integer voxel index ``floor(p / voxel_size)`` of each point."""
    return np.floor(np.asarray(xyz, dtype=np.float64) / voxel_size).astype(np.int64)


def _pack(indices: list[np.ndarray]) -> list[np.ndarray]:
    # one int64 key per voxel, 21 bits per axis relative to the joint minimum
    nonempty = [i for i in indices if len(i)]
    if not nonempty:
        return [np.empty(0, dtype=np.int64) for _ in indices]
    lo = np.min([i.min(axis=0) for i in nonempty], axis=0)
    hi = np.max([i.max(axis=0) for i in nonempty], axis=0)
    if np.any(hi - lo >= 1 << _PACK_BITS):
        raise ValueError("map extent too large for voxel key packing")
    out = []
    for idx in indices:
        s = idx - lo
        out.append((s[:, 0] << (2 * _PACK_BITS)) | (s[:, 1] << _PACK_BITS) | s[:, 2])
    return out


def compute_pr_rr(
    gt_map: PointCloud,
    output_map: PointCloud,
    voxel_size: float = DEFAULT_VOXEL_SIZE,
    dynamic_classes: Iterable[int] = DEFAULT_DYNAMIC_CLASSES,
) -> MetricsReport:
    """Compare a cleaned map against the labelled accumulated map.

    Voxels holding both static and dynamic ground truth count as dynamic.
    """
    if not gt_map.is_labeled:
        raise ValueError("ground-truth map carries no semantic labels")
    dyn_point = np.isin(gt_map.semantic, np.fromiter(dynamic_classes, dtype=np.int64))
    keys, out_keys = _pack([voxel_indices(gt_map.xyz, voxel_size),
                            voxel_indices(output_map.xyz, voxel_size)])
    dynamic = np.unique(keys[dyn_point])
    static = np.setdiff1d(np.unique(keys[~dyn_point]), dynamic, assume_unique=True)
    if len(static) == 0 or len(dynamic) == 0:
        which = "static" if len(static) == 0 else "dynamic"
        raise EmptyGroundTruth(f"ground truth has no {which} voxels")
    present = np.unique(out_keys)
    preserved = np.count_nonzero(np.isin(static, present, assume_unique=True))
    removed = len(dynamic) - np.count_nonzero(np.isin(dynamic, present, assume_unique=True))
    return MetricsReport.from_counts(len(static), preserved, len(dynamic), removed, voxel_size)


def compute_point_pr_rr(
    gt_map: PointCloud,
    kept_ids: np.ndarray,
    dynamic_classes: Iterable[int] = DEFAULT_DYNAMIC_CLASSES,
) -> MetricsReport:
    """Point-level PR/RR by point id; a diagnostic beside the voxel metric."""
    dyn_point = np.isin(gt_map.semantic, np.fromiter(dynamic_classes, dtype=np.int64))
    kept = np.isin(gt_map.ids, kept_ids)
    n_static, n_dyn = int((~dyn_point).sum()), int(dyn_point.sum())
    if n_static == 0 or n_dyn == 0:
        raise EmptyGroundTruth("ground truth lacks static or dynamic points")
    return MetricsReport.from_counts(
        n_static, int((kept & ~dyn_point).sum()), n_dyn, int((~kept & dyn_point).sum()), 0.0
    )


@dataclass
class SweepRow:
    interval: int
    PR: float
    RR: float
    F1: float
    error: Optional[str] = None


def interval_sweep(
    source: SequenceSource,
    cfg: PipelineConfig,
    intervals: Iterable[int],
    voxel_size: float = DEFAULT_VOXEL_SIZE,
    dynamic_classes: Iterable[int] = DEFAULT_DYNAMIC_CLASSES,
) -> list[SweepRow]:
    """Run and score the pipeline once per frame interval.

    A failing interval yields a row with NaN metrics and the error text; the
    remaining intervals still run.
    """
    intervals = list(intervals)
    if not intervals:
        return []
    gt_map = accumulate_map(source)
    dynamic_classes = frozenset(dynamic_classes)
    rows = []
    for k in intervals:
        try:
            run_cfg = PipelineConfig(cfg.voi, cfg.classify, cfg.retrieval, frame_interval=k)
            state, _ = run_sequence(source, run_cfg, initial_map=gt_map)
            rep = compute_pr_rr(gt_map, state.map, voxel_size, dynamic_classes)
            rows.append(SweepRow(k, rep.PR, rep.RR, rep.F1))
        except Exception as exc:
            logger.warning("interval %s failed: %s", k, exc)
            rows.append(SweepRow(k, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    return rows
