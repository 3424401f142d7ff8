import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    R = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
    from erasorpp.model import PoseSE3
    return PoseSE3(R, rng.uniform(-50, 50, 3))


def bin_center(ring, sector, params):
    """A point at the middle of 1-based bin ``(ring, sector)`` (x, y only)."""
    rho = (ring - 0.5) * params.l_max / params.n_rings
    theta = (sector - 0.5) * 2 * np.pi / params.n_sectors
    phi = theta - np.pi
    return rho * np.cos(phi), rho * np.sin(phi)


def points_in_bin(ring, sector, zs, params):
    x, y = bin_center(ring, sector, params)
    zs = np.asarray(zs, dtype=float)
    return np.column_stack([np.full(len(zs), x), np.full(len(zs), y), zs])


def grid_from_arrays(params, layer_counts, d_diff):
    """A ``DescriptorGrid`` built straight from per-bin arrays (no point data)."""
    from erasorpp import bits
    from erasorpp.descriptor import DescriptorGrid
    from erasorpp.model import PointCloud

    layer_counts = np.asarray(layer_counts, dtype=np.int64)
    counts = layer_counts.sum(axis=-1)
    d_diff = np.where(counts > 0, np.asarray(d_diff, dtype=float), 0.0)
    nan = np.full(counts.shape, np.nan)
    empty = np.empty(0, dtype=np.int64)
    return DescriptorGrid(params, counts, layer_counts, nan, nan, d_diff,
                          bits.encode_occupancy(layer_counts > 0), empty, empty, empty,
                          PointCloud.empty())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
