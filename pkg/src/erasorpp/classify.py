"""Per-bin dynamic-status tests.

Order of application for one frame:

1. ground layer test on the scan grid -> one ground mask per frame;
2. scan ratio test (height-difference ratio below a threshold);
3. height stack test (bitwise overlap of layer words above the ground);
4. surrounding points test (demote isolated dynamic bins).
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bits
from .descriptor import BinDescriptor, DescriptorGrid
from .errors import NotComparable, ParamMismatch


class BinStatus(enum.IntEnum):
    UNOCCUPIED = 0
    STATIC = 1
    DYNAMIC_CANDIDATE = 2
    DYNAMIC_CONFIRMED = 3


@dataclass(frozen=True)
class ClassifyConfig:
    """Thresholds for the bin tests.

    ``enable_hst`` switches the height stack test together with the ground
    layer test and the mid-layer part of the descriptor; ``enable_spt``
    switches the surrounding points test. Both exist for ablations.
    """

    srt_threshold: float = 0.2
    min_points_bin: int = 10
    min_map_height: float = 0.2
    max_overlap_bits: int = 0
    spt_range: int = 1
    glt_min_layer_points: int = 10
    glt_ring_fraction: float = 0.75
    glt_fallback_layer: int = 1
    enable_hst: bool = True
    enable_spt: bool = True

    def __post_init__(self):
        if not 0.0 < self.srt_threshold < 1.0:
            raise ValueError("srt_threshold must lie in (0, 1)")
        if self.spt_range < 0:
            raise ValueError("spt_range must be >= 0")
        if self.min_points_bin < 1:
            raise ValueError("min_points_bin must be >= 1")
        if self.max_overlap_bits < 0:
            raise ValueError("max_overlap_bits must be >= 0")
        if self.glt_fallback_layer < 1:
            raise ValueError("glt_fallback_layer must be >= 1")


@dataclass(frozen=True)
class GroundMask:
    gamma: int
    mask: int
    confident: bool = True
    ring: Optional[int] = None

    @classmethod
    def for_layer(cls, gamma: int, confident: bool = True, ring: Optional[int] = None) -> "GroundMask":
        return cls(gamma, bits.low_mask(gamma), confident, ring)


def ground_layer_test(scan_grid: DescriptorGrid, cfg: ClassifyConfig) -> GroundMask:
    """Find the ground layer by ring consensus, nearest ring first.

    In each ring, every bin with at least ``min_points_bin`` points votes for
    its most populated layer (if that layer holds ``glt_min_layer_points``).
    The first ring whose winning layer gets more than ``glt_ring_fraction``
    of its occupied bins decides. Otherwise the fallback layer is returned
    with ``confident=False``.
    """
    n_layers = scan_grid.params.n_layers
    for r in range(scan_grid.params.n_rings):
        occupied = scan_grid.counts[r] >= cfg.min_points_bin
        n_occupied = int(occupied.sum())
        if n_occupied == 0:
            continue
        lc = scan_grid.layer_counts[r][occupied]
        candidate = np.argmax(lc, axis=1)
        valid = lc.max(axis=1) >= cfg.glt_min_layer_points
        if not valid.any():
            continue
        votes = np.bincount(candidate[valid], minlength=n_layers)
        winner = int(np.argmax(votes))
        if votes[winner] > cfg.glt_ring_fraction * n_occupied:
            return GroundMask.for_layer(winner + 1, True, r + 1)
    gamma = min(cfg.glt_fallback_layer, n_layers)
    return GroundMask.for_layer(gamma, confident=False)


def _comparable(curr_points, map_points, map_diff, cfg: ClassifyConfig):
    return (
        (curr_points >= cfg.min_points_bin)
        & (map_points >= cfg.min_points_bin)
        & (map_diff >= cfg.min_map_height)
    )


def scan_ratio_test(curr: BinDescriptor, map: BinDescriptor, cfg: ClassifyConfig) -> bool:
    """True when ``curr.d_diff / map.d_diff < srt_threshold``."""
    if not _comparable(curr.n_points, map.n_points, map.d_diff, cfg):
        raise NotComparable("bins are under-populated or the map bin is too flat")
    return curr.d_diff / map.d_diff < cfg.srt_threshold


def overlap_word(curr_enc: int, map_enc: int, ground_mask: int) -> int:
    return (int(curr_enc) & int(map_enc)) & ~int(ground_mask)


def height_stack_test(
    curr: BinDescriptor, map: BinDescriptor, ground: GroundMask, cfg: ClassifyConfig
) -> bool:
    """True (removal confirmed) when scan and map share at most
    ``max_overlap_bits`` occupied layers above the ground."""
    return overlap_word(curr.d_enc, map.d_enc, ground.mask).bit_count() <= cfg.max_overlap_bits


@dataclass
class BinComparison:
    """Per-bin intermediate values of ``classify_bins``, for diagnostics."""

    comparable: np.ndarray
    ratio: np.ndarray
    overlap_bits: np.ndarray
    status: np.ndarray


def compare_bins(
    curr_grid: DescriptorGrid,
    map_grid: DescriptorGrid,
    ground: GroundMask,
    cfg: ClassifyConfig,
) -> BinComparison:
    if curr_grid.params != map_grid.params:
        raise ParamMismatch(f"{curr_grid.params} != {map_grid.params}")
    n_layers = curr_grid.params.n_layers
    comparable = _comparable(curr_grid.counts, map_grid.counts, map_grid.d_diff, cfg)
    ratio = np.full(comparable.shape, np.nan)
    ratio[comparable] = curr_grid.d_diff[comparable] / map_grid.d_diff[comparable]
    srt = comparable & (ratio < cfg.srt_threshold)

    overlap = (curr_grid.d_enc & map_grid.d_enc) & ~bits.as_words(ground.mask, n_layers)
    overlap_bits = bits.popcount(overlap)
    if cfg.enable_hst:
        hst = overlap_bits <= cfg.max_overlap_bits
    else:
        hst = np.ones(comparable.shape, dtype=bool)

    status = np.full(comparable.shape, BinStatus.UNOCCUPIED, dtype=np.int8)
    status[comparable] = BinStatus.STATIC
    status[srt & ~hst] = BinStatus.DYNAMIC_CANDIDATE
    status[srt & hst] = BinStatus.DYNAMIC_CONFIRMED
    return BinComparison(comparable, ratio, overlap_bits, status)


def classify_bins(
    curr_grid: DescriptorGrid,
    map_grid: DescriptorGrid,
    ground: GroundMask,
    cfg: ClassifyConfig,
) -> np.ndarray:
    """Status grid (``int8`` of ``BinStatus``) from the ratio and height stack tests.

    Bins where either side has fewer than ``min_points_bin`` points, or the
    map bin is flatter than ``min_map_height``, are ``UNOCCUPIED``.
    """
    return compare_bins(curr_grid, map_grid, ground, cfg).status


def dynamic_neighbor_count(dynamic: np.ndarray, spt_range: int) -> np.ndarray:
    """Dynamic bins in each bin's box neighbourhood, itself excluded.

    Sectors wrap around; rings do not.
    """
    n_rings, n_sectors = dynamic.shape
    if 2 * spt_range + 1 > n_sectors:
        # the wrapped sector window would count some bins twice
        return _neighbor_count_slow(dynamic, spt_range)
    d = dynamic.astype(np.int32)
    # sum over the sector window (wrapping) first, then over the ring window
    sector_sum = np.zeros_like(d)
    for dq in range(-spt_range, spt_range + 1):
        sector_sum += np.roll(d, dq, axis=1)
    total = np.zeros_like(d)
    for dp in range(-spt_range, spt_range + 1):
        lo, hi = max(0, dp), min(n_rings, n_rings + dp)
        if lo < hi:
            total[lo - dp:hi - dp] += sector_sum[lo:hi]
    return total - d


def _neighbor_count_slow(dynamic: np.ndarray, spt_range: int) -> np.ndarray:
    n_rings, n_sectors = dynamic.shape
    out = np.zeros(dynamic.shape, dtype=np.int32)
    for i in range(n_rings):
        for j in range(n_sectors):
            seen = set()
            for p in range(max(0, i - spt_range), min(n_rings, i + spt_range + 1)):
                for dq in range(-spt_range, spt_range + 1):
                    seen.add((p, (j + dq) % n_sectors))
            seen.discard((i, j))
            out[i, j] = sum(int(dynamic[p, q]) for p, q in seen)
    return out


def surrounding_points_test(status: np.ndarray, cfg: ClassifyConfig) -> np.ndarray:
    """Demote confirmed-dynamic bins with no confirmed-dynamic neighbour to static.

    Decisions read the input grid only, so the result does not depend on
    visiting order.
    """
    out = np.array(status, copy=True)
    if not cfg.enable_spt:
        return out
    dynamic = status == BinStatus.DYNAMIC_CONFIRMED
    isolated = dynamic & (dynamic_neighbor_count(dynamic, cfg.spt_range) == 0)
    out[isolated] = BinStatus.STATIC
    return out


@dataclass
class FrameClassification:
    ground: Optional[GroundMask]
    comparison: BinComparison
    status: np.ndarray

    @property
    def pre_spt(self) -> np.ndarray:
        return self.comparison.status

    def count(self, which: BinStatus, after_spt: bool = True) -> int:
        grid = self.status if after_spt else self.pre_spt
        return int(np.count_nonzero(grid == which))


def classify_frame(
    scan_grid: DescriptorGrid, map_grid: DescriptorGrid, cfg: ClassifyConfig
) -> FrameClassification:
    """Run the whole cascade for one frame."""
    if cfg.enable_hst:
        ground = ground_layer_test(scan_grid, cfg)
    else:
        ground = GroundMask.for_layer(cfg.glt_fallback_layer, confident=False)
    comparison = compare_bins(scan_grid, map_grid, ground, cfg)
    status = surrounding_points_test(comparison.status, cfg)
    return FrameClassification(ground if cfg.enable_hst else None, comparison, status)


def write_bin_diagnostics(path, scan_grid: DescriptorGrid, map_grid: DescriptorGrid,
                          result: FrameClassification) -> None:
    """One CSV row per bin: ring, sector, d_diff_curr, d_diff_map, ratio,
    overlap_bits, status (1-based indices, final status name)."""
    cmp = result.comparison
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["ring", "sector", "d_diff_curr", "d_diff_map", "ratio", "overlap_bits", "status"])
        for (r, s), st in np.ndenumerate(result.status):
            ratio = cmp.ratio[r, s]
            w.writerow([
                r + 1, s + 1,
                f"{scan_grid.d_diff[r, s]:.6g}", f"{map_grid.d_diff[r, s]:.6g}",
                "" if np.isnan(ratio) else f"{ratio:.6g}",
                int(cmp.overlap_bits[r, s]),
                BinStatus(st).name,
            ])
