import math

import numpy as np
import pytest

from conftest import grid_from_arrays
from erasorpp.classify import BinStatus, GroundMask
from erasorpp.descriptor import VoiParams, build_descriptor_grid
from erasorpp.errors import DegeneratePlane
from erasorpp.model import PointCloud
from erasorpp.retrieve import RetrievalConfig, fit_ground_plane, retrieve_static, retrieve_static_indices

CFG = RetrievalConfig()
P = VoiParams()


def test_flat_plane_recovered_under_clutter(rng):
    ground = np.column_stack([rng.uniform(0, 5, (100, 2)), np.zeros(100)])
    clutter = np.column_stack([rng.uniform(0, 5, (20, 2)), rng.uniform(1, 2, 20)])
    plane = fit_ground_plane(np.vstack([ground, clutter]), CFG)
    assert np.allclose(plane.normal, [0, 0, 1], atol=1e-6)
    assert abs(plane.offset) < 1e-6
    assert abs(np.linalg.norm(plane.normal) - 1) < 1e-9


def test_identical_points_are_degenerate():
    with pytest.raises(DegeneratePlane):
        fit_ground_plane(np.ones((30, 3)), CFG)


def test_collinear_and_too_few_points_are_degenerate():
    line = np.column_stack([np.linspace(0, 1, 20), np.zeros(20), np.zeros(20)])
    with pytest.raises(DegeneratePlane):
        fit_ground_plane(line, CFG)
    with pytest.raises(DegeneratePlane):
        fit_ground_plane(np.eye(3), CFG)


def test_tilted_plane_within_one_degree(rng):
    xy = rng.uniform(-5, 5, (500, 2))
    z = 0.1 * xy[:, 0] + rng.normal(0, 0.01, 500)
    plane = fit_ground_plane(np.column_stack([xy, z]), CFG)
    expected = np.array([-0.1, 0.0, 1.0]) / math.sqrt(1.01)
    angle = math.degrees(math.acos(min(1.0, float(plane.normal @ expected))))
    assert angle < 1.0
    assert plane.normal[2] > 0


def _bin_cloud(rng, with_trace=True):
    # bin (3, 10): ring 3 is rho in [8, 12)
    theta = (9.5) * 2 * math.pi / 60 - math.pi
    cx, cy = 10 * math.cos(theta), 10 * math.sin(theta)
    g = np.column_stack([cx + rng.uniform(-0.2, 0.2, 200), cy + rng.uniform(-0.2, 0.2, 200),
                         -0.4 + rng.normal(0, 0.01, 200)])
    parts = [g]
    if with_trace:
        parts.append(np.column_stack([cx + rng.uniform(-0.2, 0.2, 60), cy + rng.uniform(-0.2, 0.2, 60),
                                      rng.uniform(-0.1, 1.3, 60)]))
    return np.vstack(parts)


def _status_for(bin_, which=BinStatus.DYNAMIC_CONFIRMED):
    st = np.full(P.shape, BinStatus.STATIC, dtype=np.int8)
    st[bin_] = which
    return st


def test_ground_only_bin_is_fully_retained(rng):
    grid = build_descriptor_grid(PointCloud(_bin_cloud(rng, with_trace=False)), P)
    kept, rejected = retrieve_static(grid, _status_for((2, 9)), CFG)
    assert len(kept) == 200 and len(rejected) == 0


def test_ground_and_trace_split(rng):
    xyz = _bin_cloud(rng)
    grid = build_descriptor_grid(PointCloud(xyz), P)
    res = retrieve_static_indices(grid, _status_for((2, 9)), CFG, GroundMask.for_layer(2))
    # oracle: distance to the known plane z = -0.4
    near = np.abs(xyz[:, 2] + 0.4) <= CFG.inlier_threshold
    assert set(res.retained) == set(np.flatnonzero(near))
    assert set(res.rejected) == set(np.flatnonzero(~near))
    assert res.n_bins == 1


def test_other_bins_untouched(rng):
    grid = build_descriptor_grid(PointCloud(_bin_cloud(rng)), P)
    kept, rejected = retrieve_static(grid, _status_for((2, 9), BinStatus.DYNAMIC_CANDIDATE), CFG)
    assert len(kept) == 0 and len(rejected) == 0


def test_degenerate_bin_rejected_whole():
    xyz = np.tile([[10.0, 0.0, 0.5]], (15, 1))
    grid = build_descriptor_grid(PointCloud(xyz), P)
    r, s = np.argwhere(grid.counts > 0)[0]
    res = retrieve_static_indices(grid, _status_for((r, s)), CFG)
    assert len(res.retained) == 0 and len(res.rejected) == 15 and res.n_degenerate == 1


def test_permutation_invariance(rng):
    xyz = _bin_cloud(rng)
    perm = rng.permutation(len(xyz))
    st = _status_for((2, 9))
    a = retrieve_static_indices(build_descriptor_grid(PointCloud(xyz), P), st, CFG)
    b = retrieve_static_indices(build_descriptor_grid(PointCloud(xyz[perm]), P), st, CFG)
    assert np.array_equal(np.sort(perm[b.retained]), a.retained)
    assert np.array_equal(np.sort(perm[b.rejected]), a.rejected)


def test_retained_points_lie_near_plane(rng):
    xyz = _bin_cloud(rng)
    grid = build_descriptor_grid(PointCloud(xyz), P)
    res = retrieve_static_indices(grid, _status_for((2, 9)), CFG)
    members = grid.point_ids(3, 10)
    plane = fit_ground_plane(xyz[members], CFG)
    assert np.all(plane.distance(xyz[res.retained]) <= CFG.inlier_threshold)
    assert np.array_equal(np.sort(np.concatenate([res.retained, res.rejected])), members)


def test_config_validation():
    for bad in [dict(seed_fraction=0), dict(seed_fraction=1.5), dict(iterations=0)]:
        with pytest.raises(ValueError):
            RetrievalConfig(**bad)
