"""Egocentric polar binning and the height coding descriptor.

A cloud in the sensor frame is cut to a cylindrical volume of interest,
split into ``n_rings x n_sectors`` polar bins, and each bin is summarised by

* ``d_diff``: max z minus min z of its points;
* ``d_enc``: an ``n_layers``-bit word, bit ``a-1`` set when height layer
  ``a`` holds at least one point.

Rings, sectors and layers are 1-based in the public API (``BinIndex``,
``layer_index``) and 0-based in the grid arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import bits
from .errors import OutOfVoi
from .model import PointCloud

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class VoiParams:
    """Volume-of-interest bounds (meters, sensor frame) and grid resolution."""

    l_max: float = 80.0
    h_min: float = -1.0
    h_max: float = 3.0
    n_rings: int = 20
    n_sectors: int = 60
    n_layers: int = 8

    def __post_init__(self):
        if not self.l_max > 0:
            raise ValueError("l_max must be positive")
        if not self.h_max > self.h_min:
            raise ValueError("h_max must exceed h_min")
        if self.n_rings < 1 or self.n_sectors < 1:
            raise ValueError("n_rings and n_sectors must be >= 1")
        if self.n_layers < 8 or self.n_layers % 8:
            raise ValueError("n_layers must be a positive multiple of 8")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rings, self.n_sectors)

    @property
    def n_bins(self) -> int:
        return self.n_rings * self.n_sectors

    def ring_edges(self) -> np.ndarray:
        return np.arange(self.n_rings + 1) * self.l_max / self.n_rings

    def sector_edges(self) -> np.ndarray:
        return np.arange(self.n_sectors + 1) * TWO_PI / self.n_sectors

    def layer_floors(self) -> np.ndarray:
        # layers are offset by h_min so the whole (h_min, h_max) band is covered
        step = (self.h_max - self.h_min) / self.n_layers
        return self.h_min + np.arange(self.n_layers) * step

    def layer_floors_with_top(self) -> np.ndarray:
        return np.append(self.layer_floors(), self.h_max)


class BinIndex(NamedTuple):
    ring: int
    sector: int


def voi_mask(xyz: np.ndarray, params: VoiParams) -> np.ndarray:
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    rho = np.sqrt(x * x + y * y)
    return (rho < params.l_max) & (z > params.h_min) & (z < params.h_max)


def extract_voi(cloud: PointCloud, params: VoiParams) -> PointCloud:
    """Keep points with ``rho < l_max`` and ``h_min < z < h_max`` (strict)."""
    return cloud.select(voi_mask(cloud.xyz, params))


def _interval_index(edges: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    """k with ``edges[k] <= v < edges[k+1]``; values past the last edge clamp to n-1.

    ``edges`` are uniformly spaced, so a scaled floor lands within one slot
    of the answer and a single comparison against the true edges fixes it.
    """
    lo, scale = edges[0], (len(edges) - 1) / (edges[-1] - edges[0])
    idx = ((values - lo) * scale).astype(np.int64)
    np.clip(idx, 0, len(edges) - 2, out=idx)
    idx -= values < edges[idx]
    idx += values >= edges[idx + 1]
    np.clip(idx, 0, n - 1, out=idx)
    return idx


def polar_coords(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(rho, theta)`` with ``theta = atan2(y, x) + pi`` in ``[0, 2*pi]``."""
    x, y = xyz[:, 0], xyz[:, 1]
    return np.sqrt(x * x + y * y), np.arctan2(y, x) + math.pi


def bin_indices(xyz: np.ndarray, params: VoiParams) -> tuple[np.ndarray, np.ndarray]:
    """0-based ring and sector of each point (points assumed inside the VoI)."""
    rho, theta = polar_coords(xyz)
    rings = _interval_index(params.ring_edges(), rho, params.n_rings)
    sectors = _interval_index(params.sector_edges(), theta, params.n_sectors)
    return rings, sectors


def layer_indices(z: np.ndarray, params: VoiParams) -> np.ndarray:
    """0-based layer of each height (heights assumed inside the VoI band)."""
    return _interval_index(params.layer_floors_with_top(), z, params.n_layers)


def assign_bin(point, params: VoiParams) -> BinIndex:
    """1-based ``(ring, sector)`` of a single point.

    A point at ``theta == 2*pi`` (on the negative x axis) lands in the last
    sector. Raises ``OutOfVoi`` for points outside the volume of interest.
    """
    xyz = np.asarray(point, dtype=np.float64).reshape(1, 3)
    if not voi_mask(xyz, params)[0]:
        raise OutOfVoi(f"point {tuple(xyz[0])} is outside the VoI")
    rings, sectors = bin_indices(xyz, params)
    return BinIndex(int(rings[0]) + 1, int(sectors[0]) + 1)


def layer_index(z: float, params: VoiParams) -> int:
    """1-based height layer of ``z``; raises ``OutOfVoi`` outside ``(h_min, h_max)``."""
    if not params.h_min < z < params.h_max:
        raise OutOfVoi(f"height {z} is outside ({params.h_min}, {params.h_max})")
    return int(layer_indices(np.array([z], dtype=np.float64), params)[0]) + 1


@dataclass
class BinDescriptor:
    d_diff: float
    d_enc: int
    layer_counts: np.ndarray
    point_ids: np.ndarray
    min_z: float
    max_z: float

    @property
    def n_points(self) -> int:
        return int(self.layer_counts.sum())


@dataclass
class DescriptorGrid:
    """Per-bin descriptors of one cloud.

    Arrays are indexed ``[ring - 1, sector - 1]``. ``voi_index`` lists the
    source-cloud indices of the VoI points; ``point_bin`` and
    ``point_layer`` give each of those points' flat bin and 0-based layer.
    """

    params: VoiParams
    counts: np.ndarray
    layer_counts: np.ndarray
    min_z: np.ndarray
    max_z: np.ndarray
    d_diff: np.ndarray
    d_enc: np.ndarray
    voi_index: np.ndarray
    point_bin: np.ndarray
    point_layer: np.ndarray
    source: PointCloud

    def bin(self, ring: int, sector: int) -> BinDescriptor:
        r, s = ring - 1, sector - 1
        if not (0 <= r < self.params.n_rings and 0 <= s < self.params.n_sectors):
            raise IndexError(f"bin ({ring}, {sector}) out of range")
        return BinDescriptor(
            d_diff=float(self.d_diff[r, s]),
            d_enc=int(self.d_enc[r, s]),
            layer_counts=self.layer_counts[r, s].copy(),
            point_ids=self.point_ids(ring, sector),
            min_z=float(self.min_z[r, s]),
            max_z=float(self.max_z[r, s]),
        )

    def point_ids(self, ring: int, sector: int) -> np.ndarray:
        """Sorted source-cloud indices of the points in a bin."""
        flat = (ring - 1) * self.params.n_sectors + (sector - 1)
        return self.voi_index[self.point_bin == flat]

    def point_mask(self, bin_mask: np.ndarray) -> np.ndarray:
        """Boolean mask over the source cloud of points in the selected bins."""
        out = np.zeros(len(self.source), dtype=bool)
        out[self.voi_index[bin_mask.reshape(-1)[self.point_bin]]] = True
        return out


def build_descriptor_grid(cloud: PointCloud, params: VoiParams) -> DescriptorGrid:
    """Bin the VoI of ``cloud`` and compute each bin's height coding descriptor.

    Empty bins get ``d_diff = 0`` and ``d_enc = 0``; their ``min_z``/``max_z``
    are NaN.
    """
    n_r, n_s, n_l = params.n_rings, params.n_sectors, params.n_layers
    x, y, z = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    rho = np.sqrt(x * x + y * y)
    voi_index = np.flatnonzero((rho < params.l_max) & (z > params.h_min) & (z < params.h_max))
    if len(voi_index) < len(rho):
        x, y, z, rho = x[voi_index], y[voi_index], z[voi_index], rho[voi_index]
    theta = np.arctan2(y, x) + math.pi
    rings = _interval_index(params.ring_edges(), rho, n_r)
    sectors = _interval_index(params.sector_edges(), theta, n_s)
    layers = _interval_index(params.layer_floors_with_top(), z, n_l)
    flat = rings * n_s + sectors

    counts = np.bincount(flat, minlength=n_r * n_s)
    layer_counts = np.bincount(flat * n_l + layers, minlength=n_r * n_s * n_l)

    min_z = np.full(n_r * n_s, np.inf)
    max_z = np.full(n_r * n_s, -np.inf)
    np.minimum.at(min_z, flat, z)
    np.maximum.at(max_z, flat, z)
    occupied = counts > 0
    min_z[~occupied] = np.nan
    max_z[~occupied] = np.nan
    d_diff = np.where(occupied, max_z - min_z, 0.0)

    layer_counts = layer_counts.reshape(n_r, n_s, n_l)
    return DescriptorGrid(
        params=params,
        counts=counts.reshape(n_r, n_s),
        layer_counts=layer_counts,
        min_z=min_z.reshape(n_r, n_s),
        max_z=max_z.reshape(n_r, n_s),
        d_diff=d_diff.reshape(n_r, n_s),
        d_enc=bits.encode_occupancy(layer_counts > 0),
        voi_index=voi_index,
        point_bin=flat,
        point_layer=layers,
        source=cloud,
    )
